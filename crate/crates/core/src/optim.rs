//! Limited-memory BFGS minimiser with a strong-Wolfe line search.
//!
//! The search direction comes from the standard two-loop recursion over the
//! last `memory` curvature pairs, with the initial inverse Hessian scaled by
//! `sᵀy / yᵀy`. The line search brackets a step satisfying the strong Wolfe
//! conditions and refines it with safeguarded cubic interpolation.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iters: usize,
    /// Converged when `max|g| <= grad_tol * max(1, |f|)`.
    pub grad_tol: f64,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    pub max_line_search: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions {
            memory: 10,
            max_iters: 2000,
            grad_tol: 1e-6,
            c1: 1e-4,
            c2: 0.9,
            max_line_search: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
    /// No step satisfying sufficient decrease was found, even along steepest
    /// descent.
    LineSearchFailed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
    /// Objective after every accepted step, starting with the initial value.
    pub f_history: Vec<f64>,
    /// `gᵀp` for the direction used at every accepted step.
    pub slopes: Vec<f64>,
}

impl LbfgsResult {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    pub fn grad_max_abs(&self) -> f64 {
        max_abs(&self.grad)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct Point {
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
}

/// Minimises `objective`, which returns the value and gradient at a point.
pub fn minimize<F>(mut objective: F, x0: &[f64], options: &LbfgsOptions) -> Result<LbfgsResult>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let (f0, g0) = objective(x0);
    if !f0.is_finite() || g0.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric(format!(
            "objective is not finite at the initial point (f = {f0})"
        )));
    }
    let mut cur = Point {
        x: x0.to_vec(),
        f: f0,
        g: g0,
    };
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(options.memory);
    let mut f_history = vec![cur.f];
    let mut slopes = Vec::new();
    let converged = |p: &Point| max_abs(&p.g) <= options.grad_tol * p.f.abs().max(1.0);

    let mut iterations = 0;
    let termination = loop {
        if converged(&cur) {
            break Termination::Converged;
        }
        if iterations >= options.max_iters {
            break Termination::MaxIterations;
        }
        let mut dir = two_loop(&cur.g, &pairs);
        let mut slope = dot(&cur.g, &dir);
        if !(slope < 0.0) {
            pairs.clear();
            dir = cur.g.iter().map(|v| -v).collect();
            slope = -dot(&cur.g, &cur.g);
        }
        let step0 = if pairs.is_empty() {
            (1.0 / max_abs(&cur.g)).min(1.0)
        } else {
            1.0
        };
        let found = line_search(&mut objective, &cur, &dir, slope, step0, options).or_else(|| {
            if pairs.is_empty() {
                return None;
            }
            // Curvature information went stale; retry along steepest descent.
            pairs.clear();
            dir = cur.g.iter().map(|v| -v).collect();
            slope = -dot(&cur.g, &cur.g);
            line_search(&mut objective, &cur, &dir, slope, (1.0 / max_abs(&cur.g)).min(1.0), options)
        });
        let Some(next) = found else {
            break Termination::LineSearchFailed;
        };
        let s: Vec<f64> = next.x.iter().zip(&cur.x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next.g.iter().zip(&cur.g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > f64::EPSILON * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if pairs.len() == options.memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        slopes.push(slope);
        cur = next;
        f_history.push(cur.f);
        iterations += 1;
    };
    Ok(LbfgsResult {
        x: cur.x,
        f: cur.f,
        grad: cur.g,
        iterations,
        termination,
        f_history,
        slopes,
    })
}

/// `-H g` from the stored curvature pairs.
fn two_loop(g: &[f64], pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = pairs.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

struct Trial {
    step: f64,
    f: f64,
    slope: f64,
    point: Option<Point>,
}

fn evaluate<F>(objective: &mut F, cur: &Point, dir: &[f64], step: f64) -> Trial
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let x: Vec<f64> = cur.x.iter().zip(dir).map(|(x, d)| x + step * d).collect();
    let (f, g) = objective(&x);
    let finite = f.is_finite() && g.iter().all(|v| v.is_finite());
    let f = if finite { f } else { f64::INFINITY };
    let slope = if finite { dot(&g, dir) } else { f64::NAN };
    Trial {
        step,
        f,
        slope,
        point: Some(Point { x, f, g }),
    }
}

/// Strong-Wolfe line search. Returns the accepted point, or `None` if no
/// step with sufficient decrease was found.
fn line_search<F>(
    objective: &mut F,
    cur: &Point,
    dir: &[f64],
    slope0: f64,
    step0: f64,
    opt: &LbfgsOptions,
) -> Option<Point>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let armijo = |t: &Trial| t.f <= cur.f + opt.c1 * t.step * slope0;
    let curvature = |t: &Trial| t.slope.abs() <= -opt.c2 * slope0;
    let mut prev = Trial {
        step: 0.0,
        f: cur.f,
        slope: slope0,
        point: None,
    };
    let mut step = step0;
    let mut evals = 0;
    while evals < opt.max_line_search {
        let trial = evaluate(objective, cur, dir, step);
        evals += 1;
        if !armijo(&trial) || (prev.step > 0.0 && trial.f >= prev.f) {
            return zoom(objective, cur, dir, slope0, prev, trial, opt, evals);
        }
        if curvature(&trial) {
            return trial.point;
        }
        if trial.slope >= 0.0 {
            return zoom(objective, cur, dir, slope0, trial, prev, opt, evals);
        }
        step = trial.step * 2.0;
        prev = trial;
    }
    // Budget exhausted while still descending: keep the last improving point.
    if prev.step > 0.0 {
        prev.point
    } else {
        None
    }
}

#[allow(clippy::too_many_arguments)]
fn zoom<F>(
    objective: &mut F,
    cur: &Point,
    dir: &[f64],
    slope0: f64,
    mut lo: Trial,
    mut hi: Trial,
    opt: &LbfgsOptions,
    mut evals: usize,
) -> Option<Point>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    while evals < opt.max_line_search {
        let step = interpolate(&lo, &hi);
        if (hi.step - lo.step).abs() < 1e-16 * lo.step.abs().max(1.0) {
            break;
        }
        let trial = evaluate(objective, cur, dir, step);
        evals += 1;
        if trial.f > cur.f + opt.c1 * step * slope0 || trial.f >= lo.f {
            hi = trial;
        } else {
            if trial.slope.abs() <= -opt.c2 * slope0 {
                return trial.point;
            }
            if trial.slope * (hi.step - lo.step) >= 0.0 {
                hi = lo;
            }
            lo = trial;
        }
    }
    // Fall back to the best point satisfying sufficient decrease.
    if lo.step > 0.0 {
        lo.point
    } else {
        None
    }
}

/// Minimiser of the cubic through both ends, kept inside the central 80% of
/// the bracket; bisection when the cubic is unusable.
fn interpolate(lo: &Trial, hi: &Trial) -> f64 {
    let (a, b) = (lo.step, hi.step);
    let mid = 0.5 * (a + b);
    if !(lo.f.is_finite() && hi.f.is_finite() && lo.slope.is_finite() && hi.slope.is_finite()) {
        return mid;
    }
    let d1 = lo.slope + hi.slope - 3.0 * (lo.f - hi.f) / (a - b);
    let disc = d1 * d1 - lo.slope * hi.slope;
    if disc < 0.0 {
        return mid;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let t = b - (b - a) * (hi.slope + d2 - d1) / (hi.slope - lo.slope + 2.0 * d2);
    let (left, right) = if a < b { (a, b) } else { (b, a) };
    let margin = 0.1 * (right - left);
    if t.is_finite() && t >= left + margin && t <= right - margin {
        t
    } else {
        mid
    }
}
