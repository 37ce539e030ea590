//! Global L-BFGS optimization of all node matrices.
//!
//! The free parameters are the real and imaginary parts of every `Q_k` and of
//! every `R_k` not pinned by the Dirichlet condition. Mesh refinement and bond
//! expansion can be scheduled by iteration; a Taylor truncation failure
//! during a line search refines the offending segments automatically.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::energy::{EnergyReport, HamiltonianSpec};
use crate::envelope::Envelopes;
use crate::envelope::TaylorTolerance;
use crate::error::{invalid, Error, Result};
use crate::gradient::{gradient_from_envelopes, GradientReport};
use crate::lbfgs::{initial_step, line_search, norm, Lbfgs, LbfgsOptions, Point, SearchOutcome};
use crate::linalg::{real, CMatrix};
use crate::math;
use crate::mesh::{Mesh, PiecewiseLinear};
use crate::precondition::{Block, BlockDiagonal, Jacobian};
use crate::state::CmpsState;
use crate::uniform::{density_estimate, UniformCmps};

/// How a scheduled refinement changes the mesh.
#[derive(Debug, Clone, PartialEq)]
pub enum MeshChange {
    /// Insert the midpoint of every segment.
    Midpoints,
    /// Insert these points.
    Insert(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementEvent {
    /// Applied after this many accepted iterations.
    pub iteration: usize,
    pub change: MeshChange,
}

/// Optimize at coupling `g` for at most `iterations` before moving on.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingStage {
    pub g: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BondEvent {
    /// Applied after this many accepted iterations.
    pub iteration: usize,
    pub dim: usize,
}

/// Knobs of [`optimize`].
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOptions {
    pub max_iterations: usize,
    /// Stop when `‖∇E‖ / √n ≤ gradient_tolerance`, with `n` the number of
    /// real parameters.
    pub gradient_tolerance: f64,
    pub lbfgs: LbfgsOptions,
    pub taylor: TaylorTolerance,
    /// Sorted by iteration.
    pub refinement_schedule: Vec<RefinementEvent>,
    /// Sorted by iteration, dimensions increasing.
    pub bond_schedule: Vec<BondEvent>,
    /// Couplings visited in order before the target `g`. A stage ends early
    /// once it converges or stalls.
    pub coupling_schedule: Vec<CouplingStage>,
    /// Size of the random entries filling new bond directions.
    pub bond_noise: f64,
    /// Automatic refinements allowed after truncation failures.
    pub refinement_budget: usize,
    /// Relative regularization of the local metric preconditioner, or
    /// `None` for plain L-BFGS.
    pub preconditioner: Option<f64>,
    pub seed: u64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            gradient_tolerance: 1e-6,
            lbfgs: LbfgsOptions::default(),
            taylor: TaylorTolerance::default(),
            refinement_schedule: Vec::new(),
            bond_schedule: Vec::new(),
            coupling_schedule: Vec::new(),
            bond_noise: 1e-3,
            refinement_budget: 4,
            preconditioner: Some(0.1),
            seed: 0,
        }
    }
}

impl OptimizeOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.gradient_tolerance > 0.0) {
            return Err(invalid("gradient tolerance must be positive"));
        }
        if !(self.bond_noise >= 0.0) {
            return Err(invalid("bond noise must be non-negative"));
        }
        if self
            .coupling_schedule
            .iter()
            .any(|c| !(c.g >= 0.0 && c.g.is_finite()) || c.iterations == 0)
        {
            return Err(invalid("coupling stages need finite g ≥ 0 and at least one iteration"));
        }
        if let Some(delta) = self.preconditioner {
            if !(delta > 0.0 && delta < 1.0) {
                return Err(invalid("preconditioner regularization must lie in (0, 1)"));
            }
        }
        self.lbfgs.validate()?;
        self.taylor.validate()?;
        if self
            .refinement_schedule
            .windows(2)
            .any(|w| w[0].iteration > w[1].iteration)
        {
            return Err(invalid("refinement schedule must be sorted by iteration"));
        }
        if self
            .bond_schedule
            .windows(2)
            .any(|w| w[0].iteration > w[1].iteration || w[0].dim >= w[1].dim)
        {
            return Err(invalid("bond schedule must be sorted with increasing dimensions"));
        }
        Ok(())
    }
}

/// Something that happened between iterations.
#[derive(Debug, Clone, PartialEq)]
pub enum TraceEvent {
    Refined { segments: usize },
    AutoRefined { segments: Vec<usize> },
    BondExpanded { dim: usize },
    NormShift { lambda: f64 },
    Coupling { g: f64 },
    MemoryReset,
}

/// One line of the optimization trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub energy: f64,
    pub gradient_norm: f64,
    pub step: f64,
    pub max_taylor_order: usize,
    /// Objective evaluations so far.
    pub evaluations: usize,
    /// Wall time since the start; zero without the `std` feature.
    pub seconds: f64,
    pub events: Vec<TraceEvent>,
}

impl TraceRecord {
    pub const COLUMNS: [&'static str; 6] = ["iteration", "energy", "gradNorm", "step", "maxTaylorOrder", "seconds"];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Gradient tolerance reached.
    Gradient,
    /// The energy cannot decrease further at floating-point resolution.
    Flat,
    /// Iteration cap reached.
    Iterations,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OptimizationTrace {
    pub records: Vec<TraceRecord>,
}

impl OptimizationTrace {
    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }
}

/// Final state, the (possibly refined) Hamiltonian it was optimized for, and
/// the trace.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOutcome {
    pub state: CmpsState,
    pub spec: HamiltonianSpec,
    pub report: EnergyReport,
    pub trace: OptimizationTrace,
    pub reason: StopReason,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OptimizeError {
    /// The line search could not make progress; `best` holds the lowest
    /// energy state reached.
    #[error("optimization stalled: {reason}")]
    Stalled { best: Box<OptimizeOutcome>, reason: String },
    #[error(transparent)]
    Evaluation(#[from] Error),
}

/// Number of real parameters for a state of this shape.
pub fn parameter_count(d: usize, num_points: usize, dirichlet: bool) -> usize {
    let r_nodes = if dirichlet {
        num_points.saturating_sub(2)
    } else {
        num_points
    };
    2 * d * d * (num_points + r_nodes)
}

fn free_r_range(state: &CmpsState) -> core::ops::Range<usize> {
    let n = state.mesh().num_points();
    if state.dirichlet() {
        1..n - 1
    } else {
        0..n
    }
}

/// Flattens the free parameters: `Re`, `Im` of every `Q` node then every free
/// `R` node, column-major within each matrix.
pub fn pack(state: &CmpsState) -> Vec<f64> {
    let d = state.dim();
    let mut x = Vec::with_capacity(parameter_count(d, state.mesh().num_points(), state.dirichlet()));
    let mut push = |m: &CMatrix| {
        for z in m.iter() {
            x.push(z.re);
            x.push(z.im);
        }
    };
    state.q_nodes().iter().for_each(&mut push);
    state.r_nodes()[free_r_range(state)].iter().for_each(&mut push);
    x
}

/// Inverse of [`pack`]: the template supplies mesh, boundaries, the
/// Dirichlet flag and the pinned wall nodes.
pub fn unpack(x: &[f64], template: &CmpsState) -> Result<CmpsState> {
    let d = template.dim();
    let n = template.mesh().num_points();
    let expected = parameter_count(d, n, template.dirichlet());
    if x.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: x.len(),
        });
    }
    let block = 2 * d * d;
    let read = |i: usize| {
        let s = &x[i * block..(i + 1) * block];
        CMatrix::from_iterator(d, d, s.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])))
    };
    let q: Vec<CMatrix> = (0..n).map(read).collect();
    let mut r: Vec<CMatrix> = template.r_nodes().to_vec();
    for (j, k) in free_r_range(template).enumerate() {
        r[k] = read(n + j);
    }
    template.with_nodes(q, r)
}

/// Real gradient matching [`pack`]: `∂E/∂Re Z = 2 Re g`, `∂E/∂Im Z = 2 Im g`
/// for the Wirtinger gradient `g`.
pub fn pack_gradient(grad: &GradientReport, template: &CmpsState) -> Vec<f64> {
    let mut out = Vec::new();
    let mut push = |m: &CMatrix| {
        for z in m.iter() {
            out.push(2.0 * z.re);
            out.push(2.0 * z.im);
        }
    };
    grad.grad_q.iter().for_each(&mut push);
    grad.grad_r[free_r_range(template)].iter().for_each(&mut push);
    out
}

/// Smooth ramp: 0 at `s = 0`, 1 for `s ≥ 1`, `C¹` in between.
fn ramp(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        s * s * (3.0 - 2.0 * s)
    }
}

/// Box state built from a uniform solution: every node gets the uniform
/// `(Q, R)`, and `R` is multiplied by a smooth ramp that vanishes at both
/// walls and reaches one at distance `taper_width`.
pub fn initialize_from_uniform(uniform: &UniformCmps, mesh: &Mesh, taper_width: f64) -> Result<CmpsState> {
    let length = mesh.length();
    if !(taper_width > 0.0 && taper_width < 0.5 * length) {
        return Err(invalid("taper width must lie in (0, L/2)"));
    }
    let d = uniform.dim();
    let last = mesh.num_points() - 1;
    let r_nodes = mesh
        .points()
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            if i == 0 || i == last {
                return CMatrix::zeros(d, d);
            }
            let w = ramp(x.min(length - x) / taper_width);
            &uniform.r * real(w)
        })
        .collect();
    let q = PiecewiseLinear::from_fn(mesh.clone(), |_| uniform.q.clone())?;
    let r = PiecewiseLinear::new(mesh.clone(), r_nodes)?;
    CmpsState::with_default_boundaries(q, r, true)
}

/// Random Dirichlet state sized so the initial density is roughly the
/// estimate from `μ` and `g`.
pub fn random_initial_state(mesh: &Mesh, d: usize, spec: &HamiltonianSpec, seed: u64) -> CmpsState {
    let scale = math::sqrt(density_estimate(spec.mu, spec.g) / d as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CmpsState::random(mesh, d, scale, scale * scale, true, &mut rng)
}

struct Clock {
    #[cfg(feature = "std")]
    start: std::time::Instant,
}

impl Clock {
    fn start() -> Self {
        Self {
            #[cfg(feature = "std")]
            start: std::time::Instant::now(),
        }
    }

    fn seconds(&self) -> f64 {
        #[cfg(feature = "std")]
        {
            self.start.elapsed().as_secs_f64()
        }
        #[cfg(not(feature = "std"))]
        {
            0.0
        }
    }
}

/// Block-diagonal approximation of the Hessian, one block per packed node.
///
/// Each block uses `ρ̄`, `σ̄` averaged over the node's support. For `R` the
/// Jacobians are the commutator with `Q` and the interaction map
/// `Z ↦ RZ + ZR` (weighted by `g`), and the derivative term contributes
/// `1/h` from both adjacent segments. For `Q` the Jacobian is the commutator
/// with `R`.
fn node_metric(state: &CmpsState, spec: &HamiltonianSpec, env: &Envelopes, norm: f64, delta: f64) -> BlockDiagonal {
    let mesh = state.mesh();
    let n = mesh.num_points();
    let rho: Vec<CMatrix> = (0..n).map(|k| env.left.node_value(k)).collect();
    let sigma: Vec<CMatrix> = (0..n).map(|k| env.right.node_value(k)).collect();
    let smooth = |m: &[CMatrix], k: usize| {
        let mut acc = &m[k] * real(2.0);
        let mut weight = 2.0;
        for j in [k.wrapping_sub(1), k + 1] {
            if j < n {
                acc += &m[j];
                weight += 1.0;
            }
        }
        acc / real(weight)
    };
    let scale = energy_scale(spec);
    let node = |k: usize, is_r: bool| {
        let lo = if k > 0 { mesh.width(k - 1) } else { 0.0 };
        let hi = if k + 1 < n { mesh.width(k) } else { 0.0 };
        let w = 0.5 * (lo + hi);
        let stiffness = if lo > 0.0 { 1.0 / lo } else { 0.0 } + if hi > 0.0 { 1.0 / hi } else { 0.0 };
        let (q, r) = (&state.q_nodes()[k], &state.r_nodes()[k]);
        let (c, jacobians) = if is_r {
            (
                stiffness + scale * w,
                alloc::vec![
                    Jacobian {
                        x: q,
                        sign: -1.0,
                        weight: w
                    },
                    Jacobian {
                        x: r,
                        sign: 1.0,
                        weight: spec.g * w
                    },
                ],
            )
        } else {
            (
                scale * w,
                alloc::vec![Jacobian {
                    x: r,
                    sign: -1.0,
                    weight: w
                }],
            )
        };
        Block::new(&smooth(&rho, k), &smooth(&sigma, k), c, &jacobians, norm, delta)
    };
    let blocks = (0..n)
        .map(|k| node(k, false))
        .chain(free_r_range(state).map(|k| node(k, true)))
        .collect();
    BlockDiagonal {
        dim: state.dim(),
        blocks,
    }
}

/// Energy per particle scale `|μ| + max|V| + 1` of the local metric term.
fn energy_scale(spec: &HamiltonianSpec) -> f64 {
    let v_max = (0..spec.potential.num_segments())
        .map(|k| spec.potential.segment(k).iter().map(|c| c.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    spec.mu.abs() + v_max + 1.0
}

/// Energy, packed gradient and (optionally) the metric at one point.
struct Evaluation {
    report: EnergyReport,
    gradient: Vec<f64>,
    metric: Option<BlockDiagonal>,
}

fn evaluate(state: &CmpsState, spec: &HamiltonianSpec, options: &OptimizeOptions) -> Result<Evaluation> {
    let env = Envelopes::compute(state, &options.taylor)?;
    let (report, grad) = gradient_from_envelopes(state, spec, &env)?;
    let metric = options
        .preconditioner
        .map(|delta| node_metric(state, spec, &env, report.norm, delta));
    Ok(Evaluation {
        gradient: pack_gradient(&grad, state),
        report,
        metric,
    })
}

/// Current iterate of the driver.
struct Current {
    state: CmpsState,
    spec: HamiltonianSpec,
    report: EnergyReport,
    point: Point,
    metric: Option<BlockDiagonal>,
}

impl Current {
    fn new(state: CmpsState, spec: HamiltonianSpec, eval: Evaluation) -> Self {
        let point = Point {
            x: pack(&state),
            value: eval.report.total,
            gradient: eval.gradient,
        };
        Self {
            state,
            spec,
            report: eval.report,
            point,
            metric: eval.metric,
        }
    }

    fn direction(&self, memory: &Lbfgs) -> Vec<f64> {
        match &self.metric {
            Some(m) => memory.preconditioned_direction(&self.point.gradient, &|v| m.apply(v)),
            None => memory.direction(&self.point.gradient),
        }
    }
}

/// Evaluates, refining the mesh on truncation failures while the budget
/// lasts.
fn evaluate_refining(
    mut state: CmpsState,
    mut spec: HamiltonianSpec,
    options: &OptimizeOptions,
    budget: &mut usize,
    events: &mut Vec<TraceEvent>,
) -> Result<Current> {
    loop {
        match evaluate(&state, &spec, options) {
            Ok(eval) => return Ok(Current::new(state, spec, eval)),
            Err(Error::Truncation { segment, .. }) if *budget > 0 => {
                *budget -= 1;
                let (s, h) = refine_segments(&state, &spec, &[segment])?;
                state = s;
                spec = h;
                events.push(TraceEvent::AutoRefined {
                    segments: alloc::vec![segment],
                });
            }
            Err(e) => return Err(e),
        }
    }
}

fn refine_segments(
    state: &CmpsState,
    spec: &HamiltonianSpec,
    segments: &[usize],
) -> Result<(CmpsState, HamiltonianSpec)> {
    let points = state.mesh().midpoints(Some(segments));
    refine_with(state, spec, &points)
}

fn refine_with(state: &CmpsState, spec: &HamiltonianSpec, points: &[f64]) -> Result<(CmpsState, HamiltonianSpec)> {
    let fine = state.refine(points)?;
    let spec = spec.refined(state.mesh(), fine.mesh())?;
    Ok((fine, spec))
}

/// Shifts `Q` when the norm leaves `[1e−8, 1e8]`.
fn normalize(state: &CmpsState, report: &EnergyReport) -> Option<(CmpsState, f64)> {
    let n = report.norm;
    if (1e-8..=1e8).contains(&n) {
        return None;
    }
    let lambda = math::ln(n) / state.mesh().length();
    Some((state.shifted(0.5 * lambda), lambda))
}

/// Runs [`optimize_with`] without a progress callback.
pub fn optimize(
    state: CmpsState,
    spec: HamiltonianSpec,
    options: &OptimizeOptions,
) -> core::result::Result<OptimizeOutcome, OptimizeError> {
    optimize_with(state, spec, options, &mut |_, _| {})
}

/// L-BFGS over all free parameters. `progress` sees every trace record
/// together with the current state.
pub fn optimize_with(
    state: CmpsState,
    spec: HamiltonianSpec,
    options: &OptimizeOptions,
    progress: &mut dyn FnMut(&TraceRecord, &CmpsState),
) -> core::result::Result<OptimizeOutcome, OptimizeError> {
    options.validate()?;
    spec.potential.check_mesh(state.mesh())?;
    let clock = Clock::start();
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut budget = options.refinement_budget;
    let mut events = Vec::new();
    let target_g = spec.g;
    let stages = &options.coupling_schedule;
    let mut stage = 0;
    let mut stage_end = stages.first().map_or(usize::MAX, |c| c.iterations);
    let mut spec = spec;
    if let Some(first) = stages.first() {
        spec.g = first.g;
        events.push(TraceEvent::Coupling { g: first.g });
    }
    let mut cur = evaluate_refining(state, spec, options, &mut budget, &mut events)?;
    if let Some((shifted, lambda)) = normalize(&cur.state, &cur.report) {
        cur = evaluate_refining(shifted, cur.spec, options, &mut budget, &mut events)?;
        events.push(TraceEvent::NormShift { lambda });
    }
    let mut trace = OptimizationTrace::default();
    let mut memory = Lbfgs::new(options.lbfgs.memory);
    let mut iteration = 0;
    let mut step = 0.0;
    let mut next_refine = 0;
    let mut next_bond = 0;
    let mut retried = false;

    let mut evaluations = 1;
    let mut record = |cur: &Current,
                      iteration: usize,
                      step: f64,
                      evaluations: usize,
                      events: Vec<TraceEvent>,
                      trace: &mut OptimizationTrace| {
        let rec = TraceRecord {
            evaluations,
            iteration,
            energy: cur.report.total,
            gradient_norm: scaled_norm(&cur.point.gradient),
            step,
            max_taylor_order: cur.report.max_taylor_order,
            seconds: clock.seconds(),
            events,
        };
        progress(&rec, &cur.state);
        trace.records.push(rec);
    };

    let finish = |cur: Current, trace: OptimizationTrace, reason: StopReason| OptimizeOutcome {
        state: cur.state,
        spec: cur.spec,
        report: cur.report,
        trace,
        reason,
    };

    // moves to the next coupling; false once the target is active
    let advance = |cur: &mut Current,
                   stage: &mut usize,
                   stage_end: &mut usize,
                   iteration: usize,
                   budget: &mut usize,
                   events: &mut Vec<TraceEvent>|
     -> Result<bool> {
        if *stage >= stages.len() {
            return Ok(false);
        }
        *stage += 1;
        let (g, end) = match stages.get(*stage) {
            Some(c) => (c.g, iteration + c.iterations),
            None => (target_g, usize::MAX),
        };
        *stage_end = end;
        let mut spec = cur.spec.clone();
        spec.g = g;
        events.push(TraceEvent::Coupling { g });
        *cur = evaluate_refining(cur.state.clone(), spec, options, budget, events)?;
        Ok(true)
    };

    loop {
        let mut changed = false;
        if iteration >= stage_end {
            changed |= advance(
                &mut cur,
                &mut stage,
                &mut stage_end,
                iteration,
                &mut budget,
                &mut events,
            )?;
        }
        while next_refine < options.refinement_schedule.len()
            && options.refinement_schedule[next_refine].iteration <= iteration
        {
            let points = match &options.refinement_schedule[next_refine].change {
                MeshChange::Midpoints => cur.state.mesh().midpoints(None),
                MeshChange::Insert(p) => p.clone(),
            };
            let (s, h) = refine_with(&cur.state, &cur.spec, &points)?;
            events.push(TraceEvent::Refined {
                segments: s.mesh().num_segments(),
            });
            cur = evaluate_refining(s, h, options, &mut budget, &mut events)?;
            next_refine += 1;
            changed = true;
        }
        while next_bond < options.bond_schedule.len() && options.bond_schedule[next_bond].iteration <= iteration {
            let dim = options.bond_schedule[next_bond].dim;
            if dim > cur.state.dim() {
                let s = cur.state.expand_bond(dim, options.bond_noise, &mut rng)?;
                events.push(TraceEvent::BondExpanded { dim });
                cur = evaluate_refining(s, cur.spec, options, &mut budget, &mut events)?;
                changed = true;
            }
            next_bond += 1;
        }
        if changed {
            memory.reset();
        }
        if iteration == 0 || changed || !events.is_empty() {
            record(
                &cur,
                iteration,
                step,
                evaluations,
                core::mem::take(&mut events),
                &mut trace,
            );
        }

        if scaled_norm(&cur.point.gradient) <= options.gradient_tolerance {
            if advance(
                &mut cur,
                &mut stage,
                &mut stage_end,
                iteration,
                &mut budget,
                &mut events,
            )? {
                memory.reset();
                continue;
            }
            return Ok(finish(cur, trace, StopReason::Gradient));
        }
        if iteration >= options.max_iterations {
            while advance(
                &mut cur,
                &mut stage,
                &mut stage_end,
                iteration,
                &mut budget,
                &mut events,
            )? {}
            return Ok(finish(cur, trace, StopReason::Iterations));
        }

        let mut dir = cur.direction(&memory);
        if !(crate::lbfgs::dot(&dir, &cur.point.gradient) < 0.0) {
            memory.reset();
            dir = cur.direction(&memory);
        }
        let step0 = initial_step(&memory, &dir);
        let mut truncated: Vec<usize> = Vec::new();
        let mut last: Option<(Vec<f64>, CmpsState, Evaluation)> = None;
        let template = cur.state.clone();
        let spec = cur.spec.clone();
        let mut objective = |x: &[f64]| -> Option<(f64, Vec<f64>)> {
            evaluations += 1;
            let s = unpack(x, &template).ok()?;
            match evaluate(&s, &spec, options) {
                Ok(eval) => {
                    let out = (eval.report.total, eval.gradient.clone());
                    last = Some((x.to_vec(), s, eval));
                    Some(out)
                }
                Err(Error::Truncation { segment, .. }) => {
                    if !truncated.contains(&segment) {
                        truncated.push(segment);
                    }
                    None
                }
                Err(_) => None,
            }
        };
        match line_search(&mut objective, &cur.point, &dir, step0, &options.lbfgs) {
            SearchOutcome::Accepted { point, step: alpha, .. } => {
                let s: Vec<f64> = point.x.iter().zip(&cur.point.x).map(|(a, b)| a - b).collect();
                let y: Vec<f64> = point
                    .gradient
                    .iter()
                    .zip(&cur.point.gradient)
                    .map(|(a, b)| a - b)
                    .collect();
                memory.push(s, y);
                let (state, eval) = match last.take() {
                    Some((x, state, eval)) if x == point.x => (state, eval),
                    _ => {
                        let state = unpack(&point.x, &template)?;
                        let eval = evaluate(&state, &cur.spec, options)?;
                        (state, eval)
                    }
                };
                cur = Current::new(state, cur.spec, eval);
                if let Some((shifted, lambda)) = normalize(&cur.state, &cur.report) {
                    cur = evaluate_refining(shifted, cur.spec, options, &mut budget, &mut events)?;
                    events.push(TraceEvent::NormShift { lambda });
                }
                iteration += 1;
                step = alpha;
                retried = false;
                record(
                    &cur,
                    iteration,
                    step,
                    evaluations,
                    core::mem::take(&mut events),
                    &mut trace,
                );
            }
            SearchOutcome::Failed { flat, .. } => {
                if !truncated.is_empty() && budget > 0 {
                    budget -= 1;
                    truncated.sort_unstable();
                    let (s, h) = refine_segments(&cur.state, &cur.spec, &truncated)?;
                    events.push(TraceEvent::AutoRefined { segments: truncated });
                    cur = evaluate_refining(s, h, options, &mut budget, &mut events)?;
                    memory.reset();
                    continue;
                }
                if !memory.is_empty() && !retried {
                    memory.reset();
                    retried = true;
                    events.push(TraceEvent::MemoryReset);
                    continue;
                }
                if advance(
                    &mut cur,
                    &mut stage,
                    &mut stage_end,
                    iteration,
                    &mut budget,
                    &mut events,
                )? {
                    memory.reset();
                    continue;
                }
                if flat {
                    return Ok(finish(cur, trace, StopReason::Flat));
                }
                let reason = alloc::format!(
                    "line search failed at iteration {iteration} (gradient norm {:e})",
                    scaled_norm(&cur.point.gradient)
                );
                return Err(OptimizeError::Stalled {
                    best: Box::new(finish(cur, trace, StopReason::Iterations)),
                    reason,
                });
            }
        }
    }
}

fn scaled_norm(g: &[f64]) -> f64 {
    if g.is_empty() {
        0.0
    } else {
        norm(g) / math::sqrt(g.len() as f64)
    }
}
