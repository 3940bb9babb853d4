//! Function-space norms of grid fields and the Hilbert-space operator norm of
//! Poisson operators.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::fd::mixed_central;
use crate::grid::{bracket, BoundaryField, Field, HalfSpaceField, NormalGrid, TangentialGrid};
use crate::symbols::SymbolKernel;
use crate::transforms::{forward, lp_blocks, LPPartition};

/// Highest normal derivative order accepted by the mixed and totally characteristic norms.
pub const MAX_NORMAL_ORDER: usize = 3;

/// A named norm with its parameters.
///
/// Weak-L^p always refers to the normal direction of a half-space field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", deny_unknown_fields)]
pub enum NormSpec {
    Lp { p: f64 },
    WeakLp { p: f64, q: f64 },
    Mixed { p: f64, q: f64, m: usize, weak: bool },
    Besov { s: f64, p: f64, q: f64 },
    TotChar { s: usize, p: f64, q: f64, weak: bool },
    Bessel2 { s: f64 },
}

fn check_exponent(name: &str, p: f64) -> Result<()> {
    if p >= 1.0 && p.is_finite() {
        Ok(())
    } else {
        param(format!("exponent {name} must lie in [1, inf), got {p}"))
    }
}

impl NormSpec {
    pub fn name(&self) -> String {
        match self {
            NormSpec::Lp { p } => format!("L^{p}"),
            NormSpec::WeakLp { p, q } => format!("L^({p},inf)(L^{q})"),
            NormSpec::Mixed { p, q, m, weak } => {
                format!("{}^{p}(L^{q}), m={m}", if *weak { "weak-L" } else { "L" })
            }
            NormSpec::Besov { s, p, q } => format!("B^{s}_({p},{q})"),
            NormSpec::TotChar { s, p, q, weak } => {
                format!("totchar s={s} {}^{p}(L^{q})", if *weak { "weak-L" } else { "L" })
            }
            NormSpec::Bessel2 { s } => format!("H^{s}_2"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            NormSpec::Lp { p } => check_exponent("p", p),
            NormSpec::WeakLp { p, q } => {
                check_exponent("p", p)?;
                check_exponent("q", q)
            }
            NormSpec::Mixed { p, q, m, .. } => {
                check_exponent("p", p)?;
                check_exponent("q", q)?;
                if m > MAX_NORMAL_ORDER {
                    return param(format!("normal derivative order {m} exceeds {MAX_NORMAL_ORDER}"));
                }
                Ok(())
            }
            NormSpec::Besov { s, p, q } => {
                if !s.is_finite() {
                    return param("Besov smoothness must be finite");
                }
                if !(p > 1.0) {
                    return param(format!("Besov p must exceed 1, got {p}"));
                }
                check_exponent("p", p)?;
                check_exponent("q", q)
            }
            NormSpec::TotChar { s, p, q, .. } => {
                check_exponent("p", p)?;
                check_exponent("q", q)?;
                if s > MAX_NORMAL_ORDER {
                    return param(format!("totally characteristic order {s} exceeds {MAX_NORMAL_ORDER}"));
                }
                Ok(())
            }
            NormSpec::Bessel2 { s } => {
                if s.is_finite() {
                    Ok(())
                } else {
                    param("Bessel smoothness must be finite")
                }
            }
        }
    }

    /// True when the norm is the plain L^2 norm of the field (Hilbert structure).
    pub fn is_l2(&self) -> bool {
        match *self {
            NormSpec::Lp { p } => p == 2.0,
            NormSpec::Mixed { p, q, m, weak } => p == 2.0 && q == 2.0 && m == 0 && !weak,
            NormSpec::Bessel2 { s } => s == 0.0,
            _ => false,
        }
    }

    pub fn eval(&self, f: &Field) -> Result<f64> {
        self.validate()?;
        let mismatch = |f: &Field| Error::NormMismatch { norm: self.name(), field: f.kind() };
        match (*self, f) {
            (NormSpec::Lp { p }, _) => lp_norm(f, p),
            (NormSpec::WeakLp { p, q }, Field::HalfSpace(u)) => mixed_norm(u, p, q, 0, true),
            (NormSpec::Mixed { p, q, m, weak }, Field::HalfSpace(u)) => mixed_norm(u, p, q, m, weak),
            (NormSpec::Besov { s, p, q }, Field::Boundary(g)) => besov_norm(g, s, p, q, &LPPartition::for_grid(&g.grid)),
            (NormSpec::TotChar { s, p, q, weak }, Field::HalfSpace(u)) => tot_char_norm(u, s, p, q, weak),
            (NormSpec::Bessel2 { s }, Field::Boundary(g)) => Ok(bessel2_norm(g, s)),
            _ => Err(mismatch(f)),
        }
    }
}

fn pow_sum(samples: &[Complex64], p: f64) -> f64 {
    if p == 2.0 {
        samples.iter().map(|z| z.norm_sqr()).sum()
    } else {
        samples.iter().map(|z| z.norm().powf(p)).sum()
    }
}

/// Quadrature L^p norm with tangential cell measure and normal trapezoid weights.
pub fn lp_norm(f: &Field, p: f64) -> Result<f64> {
    check_exponent("p", p)?;
    let total = match f {
        Field::Boundary(g) => pow_sum(&g.samples, p) * g.grid.cell_measure(),
        Field::HalfSpace(u) => {
            let cell = u.tangential.cell_measure();
            let nt = u.tangential.len();
            u.normal
                .weights()
                .iter()
                .enumerate()
                .map(|(j, w)| w * cell * pow_sum(&u.samples[j * nt..(j + 1) * nt], p))
                .sum()
        }
    };
    Ok(total.powf(1.0 / p))
}

/// `max_k v_k M_k^{1/p}` over values sorted descending with cumulative measures `M_k`.
pub fn weak_lp_norm(values: &[f64], measures: &[f64], p: f64) -> Result<f64> {
    if values.len() != measures.len() {
        return Err(Error::GridMismatch(format!(
            "{} values against {} measures",
            values.len(),
            measures.len()
        )));
    }
    check_exponent("p", p)?;
    if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return param("weak-L^p values must be finite and nonnegative");
    }
    if measures.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
        return param("weak-L^p measures must be finite and nonnegative");
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut cum = 0.0;
    let mut best = 0.0f64;
    for i in order {
        cum += measures[i];
        best = best.max(values[i] * cum.powf(1.0 / p));
    }
    Ok(best)
}

/// First normal derivative of per-node data by 3-point differences on the
/// graded grid (one-sided at both ends).
pub fn normal_derivative_1d(nodes: &[f64], f: &[Complex64]) -> Vec<Complex64> {
    let n = nodes.len();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    if n < 2 {
        return out;
    }
    if n == 2 {
        let d = (f[1] - f[0]) / (nodes[1] - nodes[0]);
        return vec![d, d];
    }
    let (h1, h2) = (nodes[1] - nodes[0], nodes[2] - nodes[1]);
    out[0] = f[0] * (-(2.0 * h1 + h2) / (h1 * (h1 + h2))) + f[1] * ((h1 + h2) / (h1 * h2)) - f[2] * (h1 / (h2 * (h1 + h2)));
    for i in 1..n - 1 {
        let (hm, hp) = (nodes[i] - nodes[i - 1], nodes[i + 1] - nodes[i]);
        out[i] = f[i - 1] * (-hp / (hm * (hm + hp))) + f[i] * ((hp - hm) / (hm * hp)) + f[i + 1] * (hm / (hp * (hm + hp)));
    }
    let (ha, hb) = (nodes[n - 2] - nodes[n - 3], nodes[n - 1] - nodes[n - 2]);
    out[n - 1] = f[n - 3] * (hb / (ha * (ha + hb))) - f[n - 2] * ((ha + hb) / (ha * hb)) + f[n - 1] * ((2.0 * hb + ha) / (hb * (ha + hb)));
    out
}

/// `D_{x_n} u` on every tangential column.
pub fn normal_derivative(u: &HalfSpaceField) -> HalfSpaceField {
    let nt = u.tangential.len();
    let m = u.normal.len();
    let nodes = u.normal.nodes();
    let mut out = u.samples.clone();
    for i in 0..nt {
        let column: Vec<Complex64> = (0..m).map(|j| u.samples[j * nt + i]).collect();
        for (j, d) in normal_derivative_1d(nodes, &column).into_iter().enumerate() {
            out[j * nt + i] = d;
        }
    }
    HalfSpaceField { tangential: u.tangential.clone(), normal: u.normal.clone(), samples: out }
}

/// Per-slice tangential L^q norms.
fn slice_norms(u: &HalfSpaceField, q: f64) -> Vec<f64> {
    let cell = u.tangential.cell_measure();
    u.samples
        .chunks(u.tangential.len())
        .map(|s| (pow_sum(s, q) * cell).powf(1.0 / q))
        .collect()
}

fn normal_norm(values: &[f64], normal: &NormalGrid, p: f64, weak: bool) -> Result<f64> {
    if weak {
        weak_lp_norm(values, normal.weights(), p)
    } else {
        Ok(values.iter().zip(normal.weights()).map(|(v, w)| w * v.powf(p)).sum::<f64>().powf(1.0 / p))
    }
}

/// `sum_{l <= m} || || D^l u ||_{L^q(x')} ||_{L^p or L^{p,inf}(x_n)}`.
pub fn mixed_norm(u: &HalfSpaceField, p: f64, q: f64, m: usize, weak: bool) -> Result<f64> {
    NormSpec::Mixed { p, q, m, weak }.validate()?;
    let mut total = 0.0;
    let mut cur = u.clone();
    for l in 0..=m {
        if l > 0 {
            cur = normal_derivative(&cur);
        }
        total += normal_norm(&slice_norms(&cur, q), &u.normal, p, weak)?;
    }
    Ok(total)
}

/// `sum_{l <= s}` mixed norm of `(x_n D_{x_n})^l u`.
pub fn tot_char_norm(u: &HalfSpaceField, s: usize, p: f64, q: f64, weak: bool) -> Result<f64> {
    NormSpec::TotChar { s, p, q, weak }.validate()?;
    let nt = u.tangential.len();
    let mut total = 0.0;
    let mut cur = u.clone();
    for l in 0..=s {
        if l > 0 {
            cur = normal_derivative(&cur);
            for (j, &x) in u.normal.nodes().iter().enumerate() {
                cur.samples[j * nt..(j + 1) * nt].iter_mut().for_each(|z| *z *= x);
            }
        }
        total += normal_norm(&slice_norms(&cur, q), &u.normal, p, weak)?;
    }
    Ok(total)
}

/// `(sum_j 2^{jsq} ||psi_j(D) g||_p^q)^{1/q}`.
pub fn besov_norm(g: &BoundaryField, s: f64, p: f64, q: f64, part: &LPPartition) -> Result<f64> {
    NormSpec::Besov { s, p, q }.validate()?;
    let mut total = 0.0;
    for (j, block) in lp_blocks(g, part).into_iter().enumerate() {
        let n = lp_norm(&Field::Boundary(block), p)?;
        total += (2f64.powf(j as f64 * s) * n).powf(q);
    }
    Ok(total.powf(1.0 / q))
}

/// `(L^{-d} sum <xi'>^{2s} |g^|^2)^{1/2}`.
pub fn bessel2_norm(g: &BoundaryField, s: f64) -> f64 {
    let hat = forward(&g.grid, &g.samples);
    let sum: f64 = hat
        .iter()
        .enumerate()
        .map(|(i, z)| bracket(g.grid.frequency(i), None).powf(2.0 * s) * z.norm_sqr())
        .sum();
    (sum / g.grid.measure()).sqrt()
}

/// Precomputed double-quadrature weights `w_i w_j |x_i - x_j|^{-1-2 sigma}` (zero on the diagonal).
struct SlobodeckijQuadrature {
    sigma: f64,
    pair: Vec<f64>,
    tail: Vec<f64>,
    cell: Vec<f64>,
}

impl SlobodeckijQuadrature {
    fn new(normal: &NormalGrid, sigma: f64) -> Self {
        let (x, w) = (normal.nodes(), normal.weights());
        let m = x.len();
        let mut pair = vec![0.0; m * m];
        for i in 0..m {
            for j in i + 1..m {
                let v = w[i] * w[j] * (x[j] - x[i]).powf(-1.0 - 2.0 * sigma);
                pair[i * m + j] = v;
            }
        }
        let last = x[m - 1];
        let floor = 0.5 * (x[m - 1] - x[m - 2]);
        let tail = (0..m)
            .map(|i| 2.0 * w[i] * (last - x[i]).max(floor).powf(-2.0 * sigma) / (2.0 * sigma))
            .collect();
        // exact cell integral of |x - y|^{1 - 2 sigma} minus its trapezoid value
        let factor = 2.0 / ((2.0 - 2.0 * sigma) * (3.0 - 2.0 * sigma)) - 0.5;
        let cell = x.windows(2).map(|c| factor * (c[1] - c[0]).powf(1.0 - 2.0 * sigma)).collect();
        Self { sigma, pair, tail, cell }
    }

    /// `int int |f(x) - f(y)|^2 / |x - y|^{1 + 2 sigma}` over the half-line (f = 0 beyond the grid).
    fn seminorm_sq(&self, f: &[Complex64]) -> f64 {
        let m = f.len();
        let mut s = 0.0;
        for i in 0..m {
            let row = &self.pair[i * m..(i + 1) * m];
            for j in i + 1..m {
                s += 2.0 * row[j] * (f[i] - f[j]).norm_sqr();
            }
        }
        for (i, c) in self.cell.iter().enumerate() {
            s += c * (f[i + 1] - f[i]).norm_sqr();
        }
        debug_assert!(self.sigma > 0.0);
        s + self.tail.iter().zip(f).map(|(t, z)| t * z.norm_sqr()).sum::<f64>()
    }
}

/// Operator norm (up to equivalence) of `K_mu : H^s_2(torus) -> H^t_2(half-space)`:
/// the sup over grid frequencies of
/// `<xi'>^{-s} (<xi'>^{2t} ||k||^2 + ||D^n k||^2 + |D^n k|^2_sigma)^{1/2}`
/// with `t = n + sigma`, the last two terms present only for `n >= 1`, resp. `sigma > 0`.
pub fn opnorm_hilbert(
    k: &SymbolKernel,
    mu: Option<Complex64>,
    tangential: &TangentialGrid,
    normal: &NormalGrid,
    s: f64,
    t: f64,
) -> Result<f64> {
    if !(t >= 0.0) || !t.is_finite() || !s.is_finite() {
        return param(format!("need finite s and t >= 0, got s={s}, t={t}"));
    }
    k.sector.check(mu)?;
    if normal.len() < 3 {
        return param("normal grid needs at least 3 nodes");
    }
    let n = t.floor() as usize;
    let sigma = t - n as f64;
    let sigma = if sigma < 1e-12 { 0.0 } else { sigma };
    let quad = (sigma > 0.0).then(|| SlobodeckijQuadrature::new(normal, sigma));
    let (x, w) = (normal.nodes(), normal.weights());
    let values: Vec<Result<f64>> = (0..tangential.len())
        .into_par_iter()
        .map(|i| {
            let xi = tangential.frequency(i);
            let br = bracket(xi, mu);
            let f: Vec<Complex64> = x.iter().map(|&xn| k.raw(xi, mu, xn)).collect();
            if f.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Domain(format!("{} not finite at xi' = {xi:?}", k.name)));
            }
            let l2 = |g: &[Complex64]| g.iter().zip(w).map(|(z, w)| w * z.norm_sqr()).sum::<f64>();
            let bx = bracket(xi, None);
            let mut total = bx.powf(2.0 * t) * l2(&f);
            let g = if n >= 1 {
                let kf = |v: &[f64]| k.raw(xi, mu, v[0]);
                let d: Vec<Complex64> = x
                    .iter()
                    .map(|&xn| {
                        let h = 1e-3 * (xn + 1.0 / br);
                        let xe = xn.max(0.5 * n as f64 * h * 1.000001);
                        mixed_central(&kf, &[xe], &[n], &[h])
                    })
                    .collect();
                total += l2(&d);
                d
            } else {
                f
            };
            if let Some(q) = &quad {
                total += q.seminorm_sq(&g);
            }
            Ok(bx.powf(-s) * total.sqrt())
        })
        .collect();
    let mut best = 0.0f64;
    for v in values {
        best = best.max(v?);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grids, GridConfig};
    use crate::symbols::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn grids(n: usize, m: usize) -> (Arc<TangentialGrid>, Arc<NormalGrid>) {
        make_grids(&GridConfig { points_per_dim: n, normal_count: m, ..GridConfig::default() }).unwrap()
    }

    fn random_half(seed: u64, n: usize, m: usize) -> HalfSpaceField {
        let (t, nrm) = grids(n, m);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = (0..t.len() * nrm.len()).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        HalfSpaceField::new(t, nrm, s).unwrap()
    }

    fn random_boundary(seed: u64, n: usize) -> BoundaryField {
        let (t, _) = grids(n, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = (0..t.len()).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        BoundaryField::new(t, s).unwrap()
    }

    #[test]
    fn lp_examples() {
        let (t, _) = grids(64, 4);
        let one = Field::Boundary(BoundaryField::from_fn(t.clone(), |_| c(1.0)));
        assert_relative_eq!(lp_norm(&one, 2.0).unwrap(), (2.0 * PI).sqrt(), epsilon = 1e-13);
        let sine = Field::Boundary(BoundaryField::from_fn(t.clone(), |x| c(x[0].sin())));
        assert_relative_eq!(lp_norm(&sine, 2.0).unwrap(), PI.sqrt(), epsilon = 1e-13);
        assert_eq!(lp_norm(&Field::Boundary(BoundaryField::zeros(t)), 3.0).unwrap(), 0.0);
        assert!(lp_norm(&one, 0.5).is_err());
        assert!(lp_norm(&one, f64::INFINITY).is_err());
    }

    #[test]
    fn weak_lp_examples() {
        // t^{-1/2} on (0, 1e4] with left-cell measures
        let nodes: Vec<f64> = (1..=200_000).map(|i| 1e4 * (i as f64 / 200_000.0).powi(3)).collect();
        let mut prev = 0.0;
        let measures: Vec<f64> = nodes.iter().map(|&x| { let m = x - prev; prev = x; m }).collect();
        let values: Vec<f64> = nodes.iter().map(|x| x.powf(-0.5)).collect();
        assert_relative_eq!(weak_lp_norm(&values, &measures, 2.0).unwrap(), 1.0, epsilon = 1e-9);
        assert_relative_eq!(weak_lp_norm(&[1.0; 10], &[0.1; 10], 2.0).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(weak_lp_norm(&[3.0; 4], &[2.0; 4], 4.0).unwrap(), 3.0 * 8f64.powf(0.25), epsilon = 1e-12);
        assert!(weak_lp_norm(&[1.0], &[1.0, 2.0], 2.0).is_err());
    }

    #[test]
    fn mixed_product_and_derivative() {
        let (t, nrm) = grids(32, 256);
        let u = HalfSpaceField::from_fn(t.clone(), nrm.clone(), |x, xn| c((1.0 + x[0].cos()) * (-xn).exp()));
        let gq = ((0..t.len()).map(|i| (1.0 + t.position(i)[0].cos()).powi(3)).sum::<f64>() * t.cell_measure()).powf(1.0 / 3.0);
        let hp: f64 = nrm.nodes().iter().zip(nrm.weights()).map(|(x, w)| w * (-2.0 * x).exp()).sum::<f64>().sqrt();
        assert_relative_eq!(mixed_norm(&u, 2.0, 3.0, 0, false).unwrap(), gq * hp, epsilon = 1e-12);

        let e = HalfSpaceField::from_fn(t.clone(), nrm.clone(), |_, xn| c((-xn).exp()));
        let expect = 2.0 * (2.0 * PI).sqrt() / 2f64.sqrt();
        assert_relative_eq!(mixed_norm(&e, 2.0, 2.0, 1, false).unwrap(), expect, max_relative = 0.01);
        let zero = HalfSpaceField::zeros(t, nrm);
        assert_eq!(mixed_norm(&zero, 2.0, 2.0, 2, true).unwrap(), 0.0);
        assert!(mixed_norm(&e, 2.0, 2.0, 4, false).is_err());
        assert!(mixed_norm(&e, 2.0, 0.5, 0, false).is_err());
    }

    #[test]
    fn mixed_equals_lp_when_exponents_agree() {
        let u = random_half(4, 16, 32);
        let a = mixed_norm(&u, 2.0, 2.0, 0, false).unwrap();
        let b = lp_norm(&Field::HalfSpace(u), 2.0).unwrap();
        assert!((a - b).abs() <= 1e-10 * b);
    }

    #[test]
    fn tot_char_examples() {
        let (t, nrm) = grids(16, 256);
        let e = HalfSpaceField::from_fn(t.clone(), nrm.clone(), |_, xn| c((-xn).exp()));
        for weak in [false, true] {
            assert_eq!(tot_char_norm(&e, 0, 2.0, 2.0, weak).unwrap(), mixed_norm(&e, 2.0, 2.0, 0, weak).unwrap());
        }
        let meas = (2.0 * PI).sqrt();
        let expect = meas / 2f64.sqrt() + meas * 0.5;
        assert_relative_eq!(tot_char_norm(&e, 1, 2.0, 2.0, false).unwrap(), expect, max_relative = 0.01);
        assert_eq!(tot_char_norm(&HalfSpaceField::zeros(t, nrm), 2, 2.0, 2.0, false).unwrap(), 0.0);
        assert!(tot_char_norm(&e, 4, 2.0, 2.0, false).is_err());
    }

    #[test]
    fn besov_examples() {
        let (t, _) = grids(64, 4);
        let part = LPPartition::for_grid(&t);
        assert_eq!(besov_norm(&BoundaryField::zeros(t.clone()), 1.0, 2.0, 2.0, &part).unwrap(), 0.0);
        let m4 = BoundaryField::mode(t.clone(), &[4]).unwrap();
        let l3 = lp_norm(&Field::Boundary(m4.clone()), 3.0).unwrap();
        assert_relative_eq!(besov_norm(&m4, 0.5, 3.0, 2.0, &part).unwrap(), 2f64.powf(1.0) * l3, epsilon = 1e-12);
        for seed in 0..5 {
            let g = random_boundary(seed, 64);
            let l2 = lp_norm(&Field::Boundary(g.clone()), 2.0).unwrap();
            let b = besov_norm(&g, 0.0, 2.0, 2.0, &part).unwrap();
            assert!(b <= l2 * (1.0 + 1e-12) && b >= l2 / 2f64.sqrt() * (1.0 - 1e-12), "{b} {l2}");
        }
        assert!(besov_norm(&m4, 0.0, 1.0, 2.0, &part).is_err());
    }

    #[test]
    fn chebyshev_weak_below_strong() {
        for p in [1.5, 2.0, 4.0] {
            for seed in 0..4 {
                let u = random_half(seed, 8, 64);
                let weak = mixed_norm(&u, p, 2.0, 0, true).unwrap();
                let strong = mixed_norm(&u, p, 2.0, 0, false).unwrap();
                assert!(weak <= strong * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn norm_spec_dispatch() {
        let u = Field::HalfSpace(random_half(1, 8, 8));
        let g = Field::Boundary(random_boundary(1, 8));
        assert!(matches!(NormSpec::WeakLp { p: 2.0, q: 2.0 }.eval(&g), Err(Error::NormMismatch { .. })));
        assert!(matches!(NormSpec::Besov { s: 0.0, p: 2.0, q: 2.0 }.eval(&u), Err(Error::NormMismatch { .. })));
        assert!(NormSpec::Bessel2 { s: 1.0 }.eval(&g).is_ok());
        assert!(NormSpec::Mixed { p: 2.0, q: 2.0, m: 0, weak: false }.is_l2());
        let spec: NormSpec = serde_json::from_str(r#"{"family":"WeakLp","p":1.5,"q":2}"#).unwrap();
        assert_eq!(spec, NormSpec::WeakLp { p: 1.5, q: 2.0 });
        assert!(serde_json::from_str::<NormSpec>(r#"{"family":"Lp","p":2,"x":1}"#).is_err());
    }

    #[test]
    fn bessel2_of_plane_wave() {
        let (t, _) = grids(32, 4);
        let m = BoundaryField::mode(t, &[3]).unwrap();
        assert_relative_eq!(bessel2_norm(&m, 1.0), 10f64.sqrt() * (2.0 * PI).sqrt(), epsilon = 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn homogeneity_and_triangle(seed in 0u64..500, re in -4.0f64..4.0, im in -4.0f64..4.0) {
            let z = Complex64::new(re, im);
            let u = random_half(seed, 8, 16);
            let v = random_half(seed + 7, 8, 16);
            let g = random_boundary(seed, 16);
            let h = random_boundary(seed + 3, 16);
            let specs_u = [NormSpec::Lp { p: 1.5 }, NormSpec::Mixed { p: 2.0, q: 3.0, m: 1, weak: false },
                NormSpec::Mixed { p: 1.5, q: 2.0, m: 0, weak: true }, NormSpec::TotChar { s: 2, p: 2.0, q: 2.0, weak: false }];
            let specs_g = [NormSpec::Lp { p: 4.0 }, NormSpec::Besov { s: 0.5, p: 2.0, q: 1.0 }, NormSpec::Bessel2 { s: -0.5 }];
            for spec in specs_u {
                let base = spec.eval(&Field::HalfSpace(u.clone())).unwrap();
                let scaled = spec.eval(&Field::HalfSpace(u.scaled(z))).unwrap();
                prop_assert!((scaled - z.norm() * base).abs() <= 1e-12 * scaled.max(1.0));
            }
            for spec in specs_g {
                let base = spec.eval(&Field::Boundary(g.clone())).unwrap();
                let scaled = spec.eval(&Field::Boundary(g.scaled(z))).unwrap();
                prop_assert!((scaled - z.norm() * base).abs() <= 1e-12 * scaled.max(1.0));
            }
            let sum_u = HalfSpaceField { samples: u.samples.iter().zip(&v.samples).map(|(a, b)| a + b).collect(), ..u.clone() };
            for spec in [NormSpec::Lp { p: 3.0 }, NormSpec::Mixed { p: 2.0, q: 1.5, m: 2, weak: false }] {
                let l = spec.eval(&Field::HalfSpace(sum_u.clone())).unwrap();
                let r = spec.eval(&Field::HalfSpace(u.clone())).unwrap() + spec.eval(&Field::HalfSpace(v.clone())).unwrap();
                prop_assert!(l <= r * (1.0 + 1e-12));
            }
            let sum_g = BoundaryField { samples: g.samples.iter().zip(&h.samples).map(|(a, b)| a + b).collect(), ..g.clone() };
            let spec = NormSpec::Besov { s: 0.3, p: 2.0, q: 2.0 };
            let l = spec.eval(&Field::Boundary(sum_g)).unwrap();
            let r = spec.eval(&Field::Boundary(g.clone())).unwrap() + spec.eval(&Field::Boundary(h.clone())).unwrap();
            prop_assert!(l <= r * (1.0 + 1e-12));
        }
    }

    #[test]
    fn opnorm_closed_form_at_t_zero() {
        let (t, nrm) = grids(256, 256);
        let k = heat_kernel(DEFAULT_THETA);
        for mu in [1.0, 10.0, 100.0, 1000.0] {
            let v = opnorm_hilbert(&k, Some(c(mu)), &t, &nrm, 0.0, 0.0).unwrap();
            let exact = (2.0 * (1.0 + mu * mu).sqrt()).powf(-0.5);
            assert!((v / exact - 1.0).abs() < 0.02, "{mu}: {v} vs {exact}");
        }
        let z = zero_kernel(k.sector);
        assert_eq!(opnorm_hilbert(&z, Some(c(1.0)), &t, &nrm, 0.3, 0.5).unwrap(), 0.0);
        assert!(opnorm_hilbert(&k, Some(c(1.0)), &t, &nrm, 0.0, -1.0).is_err());
    }

    #[test]
    fn slobodeckij_quadrature_matches_closed_form() {
        // |e^{-x}|^2_{sigma} on the half-line equals Gamma(1-2s)... computed here by a
        // fine composite rule in the difference variable instead:
        // int_0^inf int_0^inf (e^{-x}-e^{-y})^2 |x-y|^{-1-2s} = int_0^inf (1-e^{-r})^2 r^{-1-2s} dr
        let sigma = 0.5;
        let n = 2_000_000;
        let h = 60.0 / n as f64;
        let oracle: f64 = (0..n).map(|i| { let r = (i as f64 + 0.5) * h; (1.0 - (-r).exp()).powi(2) * r.powf(-1.0 - 2.0 * sigma) }).sum::<f64>() * h
            + 60f64.powf(-2.0 * sigma) / (2.0 * sigma);
        let nrm = NormalGrid::graded(512, 40.0, 1.02).unwrap();
        let q = SlobodeckijQuadrature::new(&nrm, sigma);
        let f: Vec<Complex64> = nrm.nodes().iter().map(|x| c((-x).exp())).collect();
        let v = q.seminorm_sq(&f);
        assert!((v / oracle - 1.0).abs() < 0.03, "{v} vs {oracle}");
    }
}
