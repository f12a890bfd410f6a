//! Bracketed root finding for strictly decreasing scalar equations.
//!
//! Every threshold equation here has the shape `f(x) = A(x) - B(x)` with `A`
//! nonincreasing and `B` strictly increasing, so a single sign change exists.
//! The driver keeps a bracket `[lo, hi]` with `f(lo) > 0 > f(hi)` and takes a
//! Newton step when a derivative is supplied and the step stays inside the
//! bracket, bisecting otherwise.

use super::ThresholdSolution;
use crate::error::{Error, Result};

/// Evaluation of `f` and, when cheaply available, `f'`.
pub type Eval = (f64, Option<f64>);

fn width_tol(tol: f64, x: f64) -> f64 {
    tol * x.abs().max(1.0)
}

/// Finds the root of a decreasing `f` inside `[lo, hi]`.
///
/// Returns once `|f(x)| <= tol` and the bracket is no wider than
/// `tol * max(1, |x|)`. The returned value is always an endpoint of the
/// returned bracket.
pub fn solve_decreasing<F>(
    equation: &'static str,
    mut f: F,
    lo: f64,
    hi: f64,
    start: Option<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<ThresholdSolution>
where
    F: FnMut(f64) -> Eval,
{
    let (mut lo, mut hi) = (lo, hi);
    let mut x = start.unwrap_or(0.5 * (lo + hi)).clamp(lo, hi);
    let mut step_old = hi - lo;
    let mut probed = false;

    for iteration in 1..=max_iter {
        let (fx, dfx) = f(x);
        if !fx.is_finite() {
            return Err(failure(
                equation,
                format!("non-finite residual at x = {x}"),
                lo,
                hi,
                iteration,
            ));
        }
        if fx == 0.0 {
            return Ok(ThresholdSolution {
                value: x,
                residual: 0.0,
                iterations: iteration,
                bracket: (x, x),
            });
        }
        if fx > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let wtol = width_tol(tol, x);
        if fx.abs() <= tol && hi - lo <= wtol {
            return Ok(ThresholdSolution {
                value: x,
                residual: fx,
                iterations: iteration,
                bracket: (lo, hi),
            });
        }

        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // Bracket cannot shrink further in floating point.
            if fx.abs() <= tol {
                return Ok(ThresholdSolution {
                    value: x,
                    residual: fx,
                    iterations: iteration,
                    bracket: (lo, hi),
                });
            }
            return Err(failure(
                equation,
                format!("bracket exhausted with residual {fx:e}"),
                lo,
                hi,
                iteration,
            ));
        }

        let mut next = mid;
        if let Some(d) = dfx.filter(|d| d.is_finite() && *d < 0.0) {
            let newton = x - fx / d;
            if newton > lo && newton < hi && (2.0 * fx).abs() <= (step_old * d).abs() {
                next = newton;
            }
        }
        if fx.abs() <= tol {
            // Residual is already small: step just past x towards the root
            // to close the bracket. A flat residual can defeat the probe, so
            // probes alternate with bisection.
            let probe = if fx > 0.0 {
                x + 0.5 * wtol
            } else {
                x - 0.5 * wtol
            };
            if probed {
                next = mid;
                probed = false;
            } else if probe > lo && probe < hi {
                next = probe;
                probed = true;
            }
        } else {
            probed = false;
        }
        step_old = next - x;
        x = next;
    }
    Err(failure(
        equation,
        "iteration limit reached".into(),
        lo,
        hi,
        max_iter,
    ))
}

/// Plain bisection on a decreasing `f`.
pub fn bisect_decreasing<F>(
    equation: &'static str,
    mut f: F,
    lo: f64,
    hi: f64,
    tol: f64,
    max_iter: usize,
) -> Result<ThresholdSolution>
where
    F: FnMut(f64) -> f64,
{
    solve_decreasing(equation, |x| (f(x), None), lo, hi, None, tol, max_iter)
}

/// Grows `[0, 1]` by doubling the top until `f(hi) <= 0`.
///
/// Returns `Ok(None)` when `f(0) <= 0`, in which case zero is the root.
pub fn bracket_from_zero<F>(
    equation: &'static str,
    mut f: F,
    max_doublings: usize,
) -> Result<Option<(f64, f64)>>
where
    F: FnMut(f64) -> f64,
{
    if f(0.0) <= 0.0 {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..max_doublings {
        let fh = f(hi);
        if !fh.is_finite() {
            return Err(failure(
                equation,
                format!("non-finite residual at {hi}"),
                lo,
                hi,
                0,
            ));
        }
        if fh <= 0.0 {
            return Ok(Some((lo, hi)));
        }
        lo = hi;
        hi *= 2.0;
    }
    Err(failure(
        equation,
        format!("no sign change after {max_doublings} doublings"),
        lo,
        hi,
        max_doublings,
    ))
}

fn failure(equation: &'static str, reason: String, lo: f64, hi: f64, iterations: usize) -> Error {
    Error::SolverFailure {
        equation,
        reason,
        lo,
        hi,
        iterations,
    }
}
