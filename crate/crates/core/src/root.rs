//! Bracketed bisection for monotone scalar functions.

use crate::error::{Error, Result};

/// Stopping rule: stop when the bracket is narrower than `x_width` or when
/// `|f(x)| <= f_abs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stop {
    pub x_width: f64,
    pub f_abs: f64,
    pub max_iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub fx: f64,
    pub iterations: usize,
}

/// Finds a zero of `f` on `[lo, hi]` given `f(lo)` and `f(hi)` of opposite
/// sign (either may be zero). `f` may fail; failures abort the search.
pub fn bisect<F>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    f_lo: f64,
    f_hi: f64,
    stop: Stop,
) -> Result<Root>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(lo < hi) {
        return Err(Error::InvalidInput(format!("empty bracket [{lo}, {hi}]")));
    }
    if f_lo == 0.0 {
        return Ok(Root {
            x: lo,
            fx: 0.0,
            iterations: 0,
        });
    }
    if f_hi == 0.0 {
        return Ok(Root {
            x: hi,
            fx: 0.0,
            iterations: 0,
        });
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Numeric(format!(
            "no sign change on [{lo}, {hi}]: f = {f_lo:e}, {f_hi:e}"
        )));
    }
    let rising = f_lo < 0.0;
    let mut best = if f_lo.abs() < f_hi.abs() {
        Root {
            x: lo,
            fx: f_lo,
            iterations: 0,
        }
    } else {
        Root {
            x: hi,
            fx: f_hi,
            iterations: 0,
        }
    };
    for it in 1..=stop.max_iterations {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if fm.abs() < best.fx.abs() || (fm.abs() == best.fx.abs() && mid < best.x) {
            best = Root {
                x: mid,
                fx: fm,
                iterations: it,
            };
        }
        best.iterations = it;
        if fm == 0.0 || fm.abs() <= stop.f_abs {
            return Ok(Root {
                x: mid,
                fx: fm,
                iterations: it,
            });
        }
        if (fm < 0.0) == rising {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= stop.x_width {
            return Ok(best);
        }
    }
    Err(Error::Numeric(format!(
        "bisection did not converge in {} iterations (bracket [{lo}, {hi}])",
        stop.max_iterations
    )))
}
