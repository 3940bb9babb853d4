//! Closed-form maximization of `s^a <st>^{-rho}` over `s >= 1`.

use crate::error::{param, Result};

/// Turning point `t*`: for `t >= t*` the maximum sits at `s = 1`.
pub fn lemma_max_threshold(a: f64, rho: f64) -> f64 {
    (rho / a - 1.0).powf(-0.5)
}

/// `max_{s >= 1} s^a <st>^{-rho}` for `rho > 1`, `0 < a < rho`, `t > 0`.
pub fn lemma_max_eval(a: f64, rho: f64, t: f64) -> Result<f64> {
    if !(rho > 1.0) || !(a > 0.0 && a < rho) || !(t > 0.0) || !t.is_finite() {
        return param(format!("need rho > 1, 0 < a < rho, t > 0 (got a={a}, rho={rho}, t={t})"));
    }
    if t >= lemma_max_threshold(a, rho) {
        Ok((1.0 + t * t).powf(-0.5 * rho))
    } else {
        let c = (1.0 - a / rho).powf(0.5 * rho) * (rho / a - 1.0).powf(-0.5 * a);
        Ok(c * t.powf(-a))
    }
}

/// Grid maximization over `count` log-spaced `s` in `[1, s_max]`.
pub fn lemma_max_brute(a: f64, rho: f64, t: f64, s_max: f64, count: usize) -> f64 {
    let step = s_max.ln() / (count.max(2) - 1) as f64;
    (0..count.max(2))
        .map(|i| {
            let s = (i as f64 * step).exp();
            s.powf(a) * (1.0 + (s * t).powi(2)).powf(-0.5 * rho)
        })
        .fold(0.0, f64::max)
}
