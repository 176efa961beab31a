//! Scalar bisection on a sign function.

use crate::error::{LabError, Result};

/// Outcome of a bisection search: final bracket and midpoint.
#[derive(Debug, Clone)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub iterations: usize,
}

impl Bracket {
    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Bisect on the sign of `f` over [lo, hi]; requires opposite signs at the
/// ends (sign(f(lo)) < 0 < sign(f(hi)) or the reverse). Stops when the
/// bracket width drops below `width_tol` or after `max_iter` halvings.
pub fn bisect_sign<F>(mut f: F, lo: f64, hi: f64, width_tol: f64, max_iter: usize) -> Result<Bracket>
where
    F: FnMut(f64) -> f64,
{
    if !(hi > lo) {
        return Err(LabError::invalid("bisection needs hi > lo"));
    }
    let flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(Bracket { lo, hi: lo, iterations: 0 });
    }
    if fhi == 0.0 {
        return Ok(Bracket { lo: hi, hi, iterations: 0 });
    }
    if flo.signum() == fhi.signum() {
        return Err(LabError::invalid(format!(
            "no sign change on [{lo}, {hi}]: f(lo) = {flo:.3e}, f(hi) = {fhi:.3e}"
        )));
    }
    let (mut lo, mut hi) = (lo, hi);
    let mut sign_lo = flo.signum();
    let mut iterations = 0;
    while hi - lo > width_tol && iterations < max_iter {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        iterations += 1;
        if fm == 0.0 {
            return Ok(Bracket { lo: mid, hi: mid, iterations });
        }
        if fm.signum() == sign_lo {
            lo = mid;
        } else {
            hi = mid;
        }
        let _ = &mut sign_lo;
    }
    Ok(Bracket { lo, hi, iterations })
}
