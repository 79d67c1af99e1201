//! Safeguarded Newton iteration on a sign-change bracket.

use crate::error::{Error, Result};

/// Derivative magnitude below which Newton steps are abandoned for bisection.
pub const MIN_DERIVATIVE: f64 = 1e-14;

/// Iteration cap shared by all root searches.
pub const MAX_ITER: usize = 200;

/// Sign class used for brackets: `g >= 0` counts as nonnegative.
pub fn nonneg(g: f64) -> bool {
    g >= 0.0
}

/// Locates the sign change of `g` between `a` and `b` to within `tol`.
///
/// `eval` returns `(g(x), g'(x))`. The sign classes at `a` and `b` must differ.
/// Returns the final bracket as `(nonneg_side, neg_side)`, at most `tol` apart.
pub fn safeguarded_newton<F>(mut eval: F, a: f64, b: f64, tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<(f64, f64)>,
{
    let (ga, _) = eval(a)?;
    let (gb, _) = eval(b)?;
    if nonneg(ga) == nonneg(gb) {
        return Err(Error::NoConvergence { lo: a.min(b), hi: a.max(b) });
    }
    // keep `neg` on the negative side and `pos` on the nonnegative side
    let (mut neg, mut pos) = if nonneg(ga) { (b, a) } else { (a, b) };
    let mut x = 0.5 * (neg + pos);
    for _ in 0..MAX_ITER {
        if (pos - neg).abs() <= tol {
            return Ok((pos, neg));
        }
        let (g, dg) = eval(x)?;
        if nonneg(g) {
            pos = x;
        } else {
            neg = x;
        }
        let (lo, hi) = (neg.min(pos), neg.max(pos));
        let newton = if dg.abs() >= MIN_DERIVATIVE && dg.is_finite() {
            Some(x - g / dg)
        } else {
            None
        };
        x = match newton {
            Some(y) if y > lo && y < hi => {
                // nudge off the bracket ends so the bracket keeps shrinking
                let margin = 0.25 * tol.min(hi - lo);
                y.clamp(lo + margin, hi - margin)
            }
            _ => 0.5 * (lo + hi),
        };
    }
    Err(Error::NoConvergence {
        lo: neg.min(pos),
        hi: neg.max(pos),
    })
}

/// `count + 1` points from `from` to `to` (inclusive), evenly spaced in log
/// scale when both ends are positive and linearly otherwise.
pub fn scan_points(from: f64, to: f64, count: usize) -> Vec<f64> {
    let count = count.max(1);
    if from > 0.0 && to > 0.0 {
        let (la, lb) = (from.ln(), to.ln());
        (0..=count)
            .map(|k| {
                if k == count {
                    to
                } else {
                    (la + (lb - la) * k as f64 / count as f64).exp()
                }
            })
            .collect()
    } else {
        (0..=count)
            .map(|k| if k == count { to } else { from + (to - from) * k as f64 / count as f64 })
            .collect()
    }
}
