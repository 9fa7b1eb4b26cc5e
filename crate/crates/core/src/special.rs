//! The Gauss hypergeometric function `2F1(1, b; 1 + b; -x)` with `b = 2/eta`,
//! which carries the co-SF interference term of the SIR success probability.
//!
//! For `x <= 1` the Pfaff transform gives a series in `w = x/(1+x) <= 1/2`.
//! For `x > 1` the integral `b x^-b \int_0^x s^(b-1)/(1+s) ds` is split at 1
//! and the outer piece mapped back onto `[1/x, 1]`; every piece is then
//! either a short Pfaff series or the elementary `(x^(b-1) - 1)/(b-1)`,
//! which stays stable through `b = 1` (the `eta = 2` logarithm).

use crate::{Error, Result};

const MAX_TERMS: usize = 500;

/// `2F1(c, c; 1 + c; w)` by its power series, for `0 <= w <= 1/2`.
fn pfaff_series(c: f64, w: f64) -> Result<f64> {
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 0..MAX_TERMS {
        let nf = n as f64;
        term *= (c + nf) * (c + nf) / ((1.0 + c + nf) * (nf + 1.0)) * w;
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            return Ok(sum);
        }
    }
    Err(Error::Numeric(format!(
        "2F1({c}, {c}; {}; {w}) series did not converge in {MAX_TERMS} terms (last term {term:e}, sum {sum})",
        1.0 + c
    )))
}

/// `2F1(1, c; 1 + c; -t)` for `0 <= t <= 1`.
fn small_argument(c: f64, t: f64) -> Result<f64> {
    Ok((1.0 + t).powf(-c) * pfaff_series(c, t / (1.0 + t))?)
}

/// `\int_0^t u^(c-1)/(1+u) du` for `0 < t <= 1`.
fn partial_integral(c: f64, t: f64) -> Result<f64> {
    Ok(t.powf(c) / c * small_argument(c, t)?)
}

/// `(x^e - 1)/e`, continuous at `e = 0` where it equals `ln x`.
fn power_difference(e: f64, ln_x: f64) -> f64 {
    let y = e * ln_x;
    if y == 0.0 {
        ln_x
    } else {
        ln_x * y.exp_m1() / y
    }
}

/// `2F1(1, 2/eta; 1 + 2/eta; -x)` for `eta >= 2`, `x >= 0`.
pub fn hyp2f1_special(eta: f64, x: f64) -> Result<f64> {
    if !(eta >= 2.0) || !eta.is_finite() {
        return Err(Error::Domain(format!("path-loss exponent must be >= 2, got {eta}")));
    }
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("argument must be >= 0, got {x}")));
    }
    let b = 2.0 / eta;
    let value = if x == 0.0 {
        1.0
    } else if x.is_infinite() {
        0.0
    } else if x <= 1.0 {
        small_argument(b, x)?
    } else {
        let c = 2.0 - b;
        let inner = partial_integral(b, 1.0)?;
        let outer = power_difference(b - 1.0, x.ln()) - partial_integral(c, 1.0)?
            + partial_integral(c, 1.0 / x)?;
        b * x.powf(-b) * (inner + outer)
    };
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::Numeric(format!(
            "2F1(1, {b}; {}; {}) evaluated to {value}",
            1.0 + b,
            -x
        )))
    }
}
