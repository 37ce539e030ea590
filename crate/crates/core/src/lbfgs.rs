//! Limited-memory BFGS on flat real vectors with a strong-Wolfe line search.
//!
//! The objective returns `None` for points it cannot evaluate (for instance a
//! Taylor truncation failure). The line search treats those as `+∞`, which
//! shrinks the step without aborting.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::math::{abs, sqrt};

/// Line-search and memory parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsOptions {
    /// Number of stored correction pairs.
    pub memory: usize,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    /// Objective evaluations allowed in one line search.
    pub max_evaluations: usize,
    /// Largest step length tried.
    pub max_step: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            memory: 10,
            c1: 1e-4,
            c2: 0.9,
            max_evaluations: 40,
            max_step: 1e10,
        }
    }
}

impl LbfgsOptions {
    pub fn validate(&self) -> crate::Result<()> {
        if self.memory == 0 {
            return Err(crate::error::invalid("L-BFGS memory must be at least 1"));
        }
        if !(self.c1 > 0.0 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(crate::error::invalid("line search needs 0 < c1 < c2 < 1"));
        }
        if self.max_evaluations == 0 || !(self.max_step > 0.0) {
            return Err(crate::error::invalid(
                "line search budget and step cap must be positive",
            ));
        }
        Ok(())
    }
}

/// A point together with its value and gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    sqrt(dot(a, a))
}

/// Inverse-Hessian approximation from the last `memory` steps.
#[derive(Debug, Clone)]
pub struct Lbfgs {
    memory: usize,
    s: VecDeque<Vec<f64>>,
    y: VecDeque<Vec<f64>>,
    rho: VecDeque<f64>,
}

impl Lbfgs {
    pub fn new(memory: usize) -> Self {
        Self {
            memory: memory.max(1),
            s: VecDeque::new(),
            y: VecDeque::new(),
            rho: VecDeque::new(),
        }
    }

    pub fn reset(&mut self) {
        self.s.clear();
        self.y.clear();
        self.rho.clear();
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    /// Stores a correction pair; pairs without positive curvature are
    /// skipped. Returns whether the pair was kept.
    pub fn push(&mut self, s: Vec<f64>, y: Vec<f64>) -> bool {
        let sy = dot(&s, &y);
        if !(sy > 1e-300) || !(sy > 1e-14 * norm(&s) * norm(&y)) {
            return false;
        }
        if self.s.len() == self.memory {
            self.s.pop_front();
            self.y.pop_front();
            self.rho.pop_front();
        }
        self.s.push_back(s);
        self.y.push_back(y);
        self.rho.push_back(1.0 / sy);
        true
    }

    /// Two-loop recursion: returns `−H g`.
    pub fn direction(&self, gradient: &[f64]) -> Vec<f64> {
        self.preconditioned_direction(gradient, &|_: &mut [f64]| {})
    }

    /// Two-loop recursion with initial inverse Hessian `γ P⁻¹`, where
    /// `apply` overwrites a vector with `P⁻¹` times it.
    pub fn preconditioned_direction(&self, gradient: &[f64], apply: &dyn Fn(&mut [f64])) -> Vec<f64> {
        let mut q: Vec<f64> = gradient.to_vec();
        let m = self.s.len();
        let mut alpha = alloc::vec![0.0; m];
        for i in (0..m).rev() {
            alpha[i] = self.rho[i] * dot(&self.s[i], &q);
            for (qj, yj) in q.iter_mut().zip(&self.y[i]) {
                *qj -= alpha[i] * yj;
            }
        }
        apply(&mut q);
        if let (Some(s), Some(y)) = (self.s.back(), self.y.back()) {
            let mut py = y.clone();
            apply(&mut py);
            let gamma = dot(s, y) / dot(y, &py);
            if gamma.is_finite() && gamma > 0.0 {
                for qj in q.iter_mut() {
                    *qj *= gamma;
                }
            }
        }
        for i in 0..m {
            let beta = self.rho[i] * dot(&self.y[i], &q);
            for (qj, sj) in q.iter_mut().zip(&self.s[i]) {
                *qj += (alpha[i] - beta) * sj;
            }
        }
        for qj in q.iter_mut() {
            *qj = -*qj;
        }
        q
    }
}

/// Result of one line search.
#[derive(Debug, Clone, PartialEq)]
pub enum SearchOutcome {
    /// `wolfe` is false when only sufficient decrease could be established
    /// within the evaluation budget.
    Accepted {
        point: Point,
        step: f64,
        evaluations: usize,
        wolfe: bool,
    },
    /// `flat` is set when every evaluated trial value was within
    /// [`FLAT_TOLERANCE`] (relative) of the starting value.
    Failed {
        evaluations: usize,
        failed_evaluations: usize,
        flat: bool,
    },
}

struct Trial {
    step: f64,
    value: f64,
    slope: f64,
    point: Option<Point>,
}

struct Search<'a, F> {
    objective: &'a mut F,
    start: &'a Point,
    direction: &'a [f64],
    evaluations: usize,
    failed: usize,
    max_change: f64,
}

impl<F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>> Search<'_, F> {
    fn eval(&mut self, step: f64) -> Trial {
        self.evaluations += 1;
        let x: Vec<f64> = self
            .start
            .x
            .iter()
            .zip(self.direction)
            .map(|(x, d)| x + step * d)
            .collect();
        match (self.objective)(&x) {
            Some((value, gradient)) if value.is_finite() && gradient.iter().all(|g| g.is_finite()) => {
                let slope = dot(&gradient, self.direction);
                self.max_change = self.max_change.max(abs(value - self.start.value));
                Trial {
                    step,
                    value,
                    slope,
                    point: Some(Point { x, value, gradient }),
                }
            }
            _ => {
                self.failed += 1;
                Trial {
                    step,
                    value: f64::INFINITY,
                    slope: f64::NAN,
                    point: None,
                }
            }
        }
    }
}

/// Minimizer of the cubic through two trials, or `None` when the data do
/// not define one.
fn cubic_step(a: &Trial, b: &Trial) -> Option<f64> {
    if !(a.value.is_finite() && b.value.is_finite() && a.slope.is_finite() && b.slope.is_finite()) {
        return None;
    }
    let d1 = a.slope + b.slope - 3.0 * (a.value - b.value) / (a.step - b.step);
    let disc = d1 * d1 - a.slope * b.slope;
    if disc < 0.0 {
        return None;
    }
    let d2 = (b.step - a.step).signum() * sqrt(disc);
    let denom = b.slope - a.slope + 2.0 * d2;
    if denom == 0.0 {
        return None;
    }
    let step = b.step - (b.step - a.step) * (b.slope + d2 - d1) / denom;
    step.is_finite().then_some(step)
}

/// Strong-Wolfe line search along `direction` starting at `initial_step`.
pub fn line_search<F>(
    objective: &mut F,
    start: &Point,
    direction: &[f64],
    initial_step: f64,
    options: &LbfgsOptions,
) -> SearchOutcome
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let slope0 = dot(&start.gradient, direction);
    if !(slope0 < 0.0) {
        return SearchOutcome::Failed {
            evaluations: 0,
            failed_evaluations: 0,
            flat: false,
        };
    }
    let f0 = start.value;
    let (c1, c2) = (options.c1, options.c2);
    let armijo = |t: &Trial| t.value <= f0 + c1 * t.step * slope0;
    let curvature = |t: &Trial| abs(t.slope) <= -c2 * slope0;

    let mut search = Search {
        objective,
        start,
        direction,
        evaluations: 0,
        failed: 0,
        max_change: 0.0,
    };
    let origin = Trial {
        step: 0.0,
        value: f0,
        slope: slope0,
        point: None,
    };
    let mut prev = origin;
    let mut step = initial_step.min(options.max_step);
    let (mut lo, mut hi);
    loop {
        let t = search.eval(step);
        if t.point.is_none() || !armijo(&t) || (prev.step > 0.0 && t.value >= prev.value) {
            lo = prev;
            hi = t;
            break;
        }
        if curvature(&t) {
            return accepted(t, &search, true);
        }
        if t.slope >= 0.0 {
            lo = t;
            hi = prev;
            break;
        }
        if search.evaluations >= options.max_evaluations || step >= options.max_step {
            return accepted(t, &search, false);
        }
        let next = cubic_step(&prev, &t)
            .filter(|s| *s > 1.1 * step)
            .unwrap_or(4.0 * step)
            .min(4.0 * step)
            .min(options.max_step);
        prev = t;
        step = next;
    }

    // zoom: lo satisfies sufficient decrease and has the lowest value so far
    loop {
        if search.evaluations >= options.max_evaluations {
            break;
        }
        let width = hi.step - lo.step;
        if abs(width) <= 1e-15 * lo.step.max(hi.step) {
            break;
        }
        let (a, b) = (lo.step.min(hi.step), lo.step.max(hi.step));
        let margin = 0.1 * (b - a);
        let step = cubic_step(&lo, &hi)
            .filter(|s| *s > a + margin && *s < b - margin)
            .unwrap_or(0.5 * (a + b));
        let t = search.eval(step);
        if t.point.is_none() || !armijo(&t) || t.value >= lo.value {
            hi = t;
            continue;
        }
        if curvature(&t) {
            return accepted(t, &search, true);
        }
        if t.slope * (hi.step - lo.step) >= 0.0 {
            hi = lo;
        }
        lo = t;
    }
    if lo.step > 0.0 {
        accepted(lo, &search, false)
    } else {
        SearchOutcome::Failed {
            evaluations: search.evaluations,
            failed_evaluations: search.failed,
            flat: search.failed < search.evaluations
                && search.max_change <= FLAT_TOLERANCE * abs(f0).max(f64::MIN_POSITIVE),
        }
    }
}

/// Relative change of the objective below which a failed line search
/// counts as flat.
pub const FLAT_TOLERANCE: f64 = 1e-12;

fn accepted<F>(t: Trial, search: &Search<'_, F>, wolfe: bool) -> SearchOutcome {
    SearchOutcome::Accepted {
        step: t.step,
        point: t.point.expect("accepted trial has a point"),
        evaluations: search.evaluations,
        wolfe,
    }
}

/// Stopping rules for [`minimize`].
#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeOptions {
    pub lbfgs: LbfgsOptions,
    pub max_iterations: usize,
    /// Stop when `‖g‖ ≤ gradient_tolerance`.
    pub gradient_tolerance: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            lbfgs: LbfgsOptions::default(),
            max_iterations: 1000,
            gradient_tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Gradient,
    /// No decrease resolvable in floating point along the steepest-descent
    /// direction.
    Flat,
    Iterations,
    LineSearch,
}

impl Termination {
    /// Gradient tolerance reached or no further decrease representable.
    pub fn converged(self) -> bool {
        matches!(self, Termination::Gradient | Termination::Flat)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub point: Point,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
}

/// Initial step for a direction: unit step once curvature information is
/// available, otherwise a step of length at most one in parameter space.
pub fn initial_step(memory: &Lbfgs, direction: &[f64]) -> f64 {
    if memory.is_empty() {
        (1.0 / norm(direction)).min(1.0)
    } else {
        1.0
    }
}

/// Plain L-BFGS loop. Returns `None` if `x0` cannot be evaluated.
pub fn minimize<F>(mut objective: F, x0: Vec<f64>, options: &MinimizeOptions) -> Option<Minimum>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    minimize_with(|x| objective(x).map(|(f, g)| (f, g, ())), |_, _| {}, x0, options)
}

/// L-BFGS whose initial inverse Hessian is supplied per iterate. The
/// objective returns an auxiliary value `A` with every evaluation, and
/// `precondition(a, v)` overwrites `v` with `P⁻¹v` for the `A` of the
/// current iterate.
pub fn minimize_with<F, A, P>(
    mut objective: F,
    precondition: P,
    x0: Vec<f64>,
    options: &MinimizeOptions,
) -> Option<Minimum>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>, A)>,
    P: Fn(&A, &mut [f64]),
{
    let (value, gradient, mut aux) = objective(&x0)?;
    let mut point = Point { x: x0, value, gradient };
    let mut memory = Lbfgs::new(options.lbfgs.memory);
    let mut evaluations = 1;
    let mut iterations = 0;
    let mut retried = false;
    let termination = loop {
        if norm(&point.gradient) <= options.gradient_tolerance {
            break Termination::Gradient;
        }
        if iterations >= options.max_iterations {
            break Termination::Iterations;
        }
        let apply = |v: &mut [f64]| precondition(&aux, v);
        let mut dir = memory.preconditioned_direction(&point.gradient, &apply);
        if !(dot(&dir, &point.gradient) < 0.0) {
            memory.reset();
            dir = memory.preconditioned_direction(&point.gradient, &apply);
        }
        let step0 = initial_step(&memory, &dir);
        let mut last: Option<(Vec<f64>, A)> = None;
        let mut search = |x: &[f64]| {
            let (f, g, a) = objective(x)?;
            last = Some((x.to_vec(), a));
            Some((f, g))
        };
        match line_search(&mut search, &point, &dir, step0, &options.lbfgs) {
            SearchOutcome::Accepted {
                point: next,
                evaluations: e,
                ..
            } => {
                evaluations += e;
                aux = match last {
                    Some((x, a)) if x == next.x => a,
                    _ => {
                        evaluations += 1;
                        objective(&next.x)?.2
                    }
                };
                let s = next.x.iter().zip(&point.x).map(|(a, b)| a - b).collect();
                let y = next.gradient.iter().zip(&point.gradient).map(|(a, b)| a - b).collect();
                memory.push(s, y);
                point = next;
                iterations += 1;
                retried = false;
            }
            SearchOutcome::Failed {
                evaluations: e, flat, ..
            } => {
                evaluations += e;
                if retried || memory.is_empty() {
                    break if flat {
                        Termination::Flat
                    } else {
                        Termination::LineSearch
                    };
                }
                memory.reset();
                retried = true;
            }
        }
    };
    Some(Minimum {
        point,
        iterations,
        evaluations,
        termination,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn rosenbrock(x: &[f64]) -> Option<(f64, Vec<f64>)> {
        let mut f = 0.0;
        let mut g = vec![0.0; x.len()];
        for i in 0..x.len() - 1 {
            let a = x[i + 1] - x[i] * x[i];
            let b = 1.0 - x[i];
            f += 100.0 * a * a + b * b;
            g[i] += -400.0 * x[i] * a - 2.0 * b;
            g[i + 1] += 200.0 * a;
        }
        Some((f, g))
    }

    #[test]
    fn minimizes_rosenbrock() {
        let m = minimize(rosenbrock, vec![-1.2, 1.0, -0.5, 0.8], &MinimizeOptions::default()).unwrap();
        assert_eq!(m.termination, Termination::Gradient);
        for xi in &m.point.x {
            assert!((xi - 1.0).abs() < 1e-7);
        }
    }

    #[test]
    fn quadratic_converges_in_few_iterations() {
        let diag = [1.0, 3.0, 10.0, 0.5];
        let f = |x: &[f64]| {
            let v = x.iter().zip(&diag).map(|(x, d)| 0.5 * d * x * x).sum();
            Some((v, x.iter().zip(&diag).map(|(x, d)| d * x).collect()))
        };
        let m = minimize(f, vec![1.0, -2.0, 0.3, 4.0], &MinimizeOptions::default()).unwrap();
        assert_eq!(m.termination, Termination::Gradient);
        assert!(m.iterations <= 12, "{}", m.iterations);
    }

    #[test]
    fn failed_evaluations_shrink_the_step() {
        // undefined for x ≥ 0.5; minimum of (x − 0.4)² inside the domain
        let f = |x: &[f64]| (x[0] < 0.5).then(|| ((x[0] - 0.4).powi(2), vec![2.0 * (x[0] - 0.4)]));
        let start = Point {
            x: vec![0.0],
            value: 0.16,
            gradient: vec![-0.8],
        };
        let mut obj = f;
        match line_search(&mut obj, &start, &[1.0], 10.0, &LbfgsOptions::default()) {
            SearchOutcome::Accepted { point, .. } => {
                assert!(point.x[0] < 0.5 && point.value < 0.16);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ascent_direction_fails_immediately() {
        let start = Point {
            x: vec![0.0],
            value: 0.0,
            gradient: vec![1.0],
        };
        let mut f = |x: &[f64]| Some((x[0], vec![1.0]));
        assert!(matches!(
            line_search(&mut f, &start, &[1.0], 1.0, &LbfgsOptions::default()),
            SearchOutcome::Failed { evaluations: 0, .. }
        ));
    }

    #[test]
    fn accepted_steps_satisfy_sufficient_decrease() {
        let mut f = |x: &[f64]| Some((x[0].cos() + 0.1 * x[0] * x[0], vec![-x[0].sin() + 0.2 * x[0]]));
        let opts = LbfgsOptions::default();
        for x0 in [0.3, 1.0, 2.0, -0.7] {
            let (v, g) = f(&[x0]).unwrap();
            let start = Point {
                x: vec![x0],
                value: v,
                gradient: g.clone(),
            };
            let d = [-g[0]];
            if let SearchOutcome::Accepted { point, step, wolfe, .. } = line_search(&mut f, &start, &d, 1.0, &opts) {
                assert!(point.value <= v + opts.c1 * step * g[0] * d[0]);
                if wolfe {
                    assert!((point.gradient[0] * d[0]).abs() <= -opts.c2 * g[0] * d[0] + 1e-15);
                }
            }
        }
    }
}
