//! Lattice estimators for symbol-class seminorms, the L^p characterization of
//! Poisson symbol-kernels, and Mikhlin norms of multipliers.
//!
//! Every supremum here is taken over a finite probe lattice, so the returned
//! values are lower estimates. Finiteness is judged operationally: a value is
//! accepted as finite when refining the lattice (denser sampling, ranges
//! widened by 4x) changes it by less than [`REFINEMENT_TOLERANCE`].

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::fd::{mixed_central, multi_indices};
use crate::grid::{bracket, NormalGrid};
use crate::symbols::catalog::{KernelKind, MultiplierSymbol, SymbolKernel};

/// Relative change tolerated between a probe lattice and its refinement.
pub const REFINEMENT_TOLERANCE: f64 = 0.10;

/// Highest seminorm index supported by the finite-difference stencils.
pub const MAX_SEMINORM_ORDER: usize = 4;

fn logspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
}

fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect()
}

/// Sample lattices and finite-difference step for seminorm estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeSpec {
    pub xi_min: f64,
    pub xi_max: f64,
    pub xi_count: usize,
    pub mu_min: f64,
    pub mu_max: f64,
    pub mu_count: usize,
    pub arg_count: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub t_count: usize,
    /// Finite-difference step relative to the natural scale of the variable.
    pub h_rel: f64,
    /// Minimal angular distance of mu-samples from the sector boundary.
    pub edge_margin: f64,
}

impl Default for ProbeSpec {
    fn default() -> Self {
        Self {
            xi_min: 0.1,
            xi_max: 100.0,
            xi_count: 7,
            mu_min: 0.05,
            mu_max: 100.0,
            mu_count: 7,
            arg_count: 3,
            t_min: 1e-3,
            t_max: 16.0,
            t_count: 25,
            h_rel: 1e-3,
            edge_margin: 0.01,
        }
    }
}

impl ProbeSpec {
    /// Doubled density (nested lattices) and ranges widened by 4x.
    pub fn refined(&self) -> Self {
        Self {
            xi_min: self.xi_min / 4.0,
            xi_max: self.xi_max * 4.0,
            xi_count: 2 * self.xi_count + 1,
            mu_min: self.mu_min / 4.0,
            mu_max: self.mu_max * 4.0,
            mu_count: 2 * self.mu_count + 1,
            arg_count: 2 * self.arg_count - 1,
            t_min: self.t_min / 4.0,
            t_max: self.t_max * 4.0,
            t_count: 2 * self.t_count + 1,
            ..*self
        }
    }

    /// Tangential sample vectors: the origin plus log-spaced radii along the
    /// first axis (and the diagonal for `dim = 2`).
    pub fn xi_points(&self, dim: usize) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; dim]];
        let dirs: Vec<Vec<f64>> = if dim == 1 {
            vec![vec![1.0]]
        } else {
            let mut e1 = vec![0.0; dim];
            e1[0] = 1.0;
            let diag = vec![1.0 / (dim as f64).sqrt(); dim];
            vec![e1, diag]
        };
        for r in logspace(self.xi_min, self.xi_max, self.xi_count) {
            for d in &dirs {
                out.push(d.iter().map(|x| x * r).collect());
            }
        }
        out
    }

    pub fn mu_points(&self, sector: &crate::grid::Sector) -> Vec<Option<Complex64>> {
        match sector.inner_bounds(self.edge_margin) {
            None => vec![None],
            Some((lo, hi)) => {
                let args = linspace(lo, hi, self.arg_count);
                let mut out = Vec::new();
                for r in logspace(self.mu_min, self.mu_max, self.mu_count) {
                    for &a in &args {
                        out.push(Some(Complex64::from_polar(r, a)));
                    }
                }
                out
            }
        }
    }

    pub fn t_points(&self) -> Vec<f64> {
        let mut out = vec![0.0];
        out.extend(logspace(self.t_min, self.t_max, self.t_count));
        out
    }
}

fn check_finite(v: Complex64, what: &str) -> Result<Complex64> {
    if v.re.is_finite() && v.im.is_finite() {
        Ok(v)
    } else {
        Err(Error::Domain(format!("{what} not evaluable at a probe point")))
    }
}

/// Layout of the finite-difference variables `[xi_1..xi_dim, (mu_re, mu_im), t]`.
struct VarLayout {
    dim: usize,
    has_mu: bool,
}

impl VarLayout {
    fn len(&self) -> usize {
        self.dim + if self.has_mu { 2 } else { 0 } + 1
    }

    fn split<'a>(&self, v: &'a [f64]) -> (&'a [f64], Option<Complex64>, f64) {
        let xi = &v[..self.dim];
        let mu = self.has_mu.then(|| Complex64::new(v[self.dim], v[self.dim + 1]));
        (xi, mu, v[self.len() - 1])
    }
}

/// Seminorm estimates for every index `0..=max_n` (monotone in the index by construction).
pub fn seminorm_table(k: &SymbolKernel, max_n: usize, probe: &ProbeSpec) -> Result<Vec<f64>> {
    if max_n > MAX_SEMINORM_ORDER {
        return param(format!("seminorm index {max_n} exceeds {MAX_SEMINORM_ORDER}"));
    }
    // dimension is taken from the kernel's own evaluation domain; the catalog is
    // radial, so one tangential axis probes it fully
    seminorm_table_dim(k, max_n, probe, 1)
}

/// As [`seminorm_table`], probing `dim` tangential variables.
pub fn seminorm_table_dim(
    k: &SymbolKernel,
    max_n: usize,
    probe: &ProbeSpec,
    dim: usize,
) -> Result<Vec<f64>> {
    if max_n > MAX_SEMINORM_ORDER {
        return param(format!("seminorm index {max_n} exceeds {MAX_SEMINORM_ORDER}"));
    }
    let layout = VarLayout { dim, has_mu: !k.sector.is_empty() };
    let n_vars = layout.len();
    // derivative multi-indices over (xi, mu) only; t handled separately
    let sym_indices = multi_indices(n_vars - 1, max_n);
    let ts = probe.t_points();
    let points: Vec<(Vec<f64>, Option<Complex64>)> = probe
        .xi_points(dim)
        .into_iter()
        .flat_map(|xi| probe.mu_points(&k.sector).into_iter().map(move |mu| (xi.clone(), mu)))
        .collect();

    let per_point: Vec<Result<Vec<f64>>> = points
        .par_iter()
        .map(|(xi, mu)| {
            k.sector.check(*mu)?;
            let br = bracket(xi, *mu);
            let scaled = |v: &[f64]| {
                let (x, m, t) = layout.split(v);
                k.raw(x, m, t / bracket(x, m))
            };
            let mut best = vec![0.0f64; max_n + 1];
            for &t in &ts {
                for idx in &sym_indices {
                    let sym_order: usize = idx.iter().sum();
                    let weight = br.powf(-k.order + sym_order as f64);
                    let budget = max_n - sym_order;
                    match k.kind {
                        KernelKind::Strong => {
                            let h_t = probe.h_rel * (1.0 + t);
                            for j in 0..=budget {
                                let t_eff = t.max(0.5 * j as f64 * h_t * 1.000001);
                                let mut x = xi.clone();
                                if let Some(m) = mu {
                                    x.push(m.re);
                                    x.push(m.im);
                                }
                                x.push(t_eff);
                                let mut orders = idx.clone();
                                orders.push(j);
                                let steps: Vec<f64> = (0..n_vars)
                                    .map(|v| if v + 1 == n_vars { h_t } else { probe.h_rel * br })
                                    .collect();
                                let d = check_finite(mixed_central(&scaled, &x, &orders, &steps), &k.name)?;
                                for ell in 0..=(budget - j) {
                                    let val = t.powi(ell as i32) * d.norm() * weight;
                                    let total = sym_order + j + ell;
                                    best[total] = best[total].max(val);
                                }
                            }
                        }
                        KernelKind::Weak => {
                            // (t D_t)^m is d^m/ds^m in s = ln t; it vanishes at t = 0 for m >= 1
                            for m_ord in 0..=budget {
                                let d = if m_ord == 0 || t == 0.0 {
                                    if m_ord > 0 {
                                        Complex64::new(0.0, 0.0)
                                    } else {
                                        let mut x = xi.clone();
                                        if let Some(mm) = mu {
                                            x.push(mm.re);
                                            x.push(mm.im);
                                        }
                                        x.push(t);
                                        let mut orders = idx.clone();
                                        orders.push(0);
                                        let steps: Vec<f64> = (0..n_vars).map(|_| probe.h_rel * br).collect();
                                        mixed_central(&scaled, &x, &orders, &steps)
                                    }
                                } else {
                                    let log_fn = |v: &[f64]| {
                                        let mut w = v.to_vec();
                                        let last = w.len() - 1;
                                        w[last] = w[last].exp();
                                        scaled(&w)
                                    };
                                    let mut x = xi.clone();
                                    if let Some(mm) = mu {
                                        x.push(mm.re);
                                        x.push(mm.im);
                                    }
                                    x.push(t.ln());
                                    let mut orders = idx.clone();
                                    orders.push(m_ord);
                                    let steps: Vec<f64> = (0..n_vars)
                                        .map(|v| if v + 1 == n_vars { probe.h_rel * 10.0 } else { probe.h_rel * br })
                                        .collect();
                                    mixed_central(&log_fn, &x, &orders, &steps)
                                };
                                let d = check_finite(d, &k.name)?;
                                let tb = (1.0 + t * t).sqrt();
                                for ell in 0..=(budget - m_ord) {
                                    let val = tb.powi(ell as i32) * d.norm() * weight;
                                    let total = sym_order + m_ord + ell;
                                    best[total] = best[total].max(val);
                                }
                            }
                        }
                    }
                }
            }
            Ok(best)
        })
        .collect();

    let mut table = vec![0.0f64; max_n + 1];
    for r in per_point {
        for (a, b) in table.iter_mut().zip(r?) {
            *a = a.max(b);
        }
    }
    // cumulative: index N includes every combination of total <= N
    for n in 1..=max_n {
        table[n] = table[n].max(table[n - 1]);
    }
    Ok(table)
}

/// Lower estimate of the order-`n` seminorm of `k` (strong or weak according to its kind).
pub fn seminorm(k: &SymbolKernel, n: usize, probe: &ProbeSpec) -> Result<f64> {
    Ok(seminorm_table(k, n, probe)?[n])
}

/// Seminorm values on a lattice and on its refinement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeminormCertificate {
    pub n: usize,
    pub coarse: f64,
    pub refined: f64,
    /// `refined / coarse`; 1 when both vanish.
    pub ratio: f64,
}

impl SeminormCertificate {
    pub fn is_stable(&self) -> bool {
        self.ratio.is_finite() && (self.ratio - 1.0).abs() < REFINEMENT_TOLERANCE
    }
}

fn ratio(coarse: f64, refined: f64) -> f64 {
    if coarse == 0.0 && refined == 0.0 {
        1.0
    } else if coarse == 0.0 {
        f64::INFINITY
    } else {
        refined / coarse
    }
}

/// Per-index refinement certificates for `N = 0..=max_n`.
pub fn certify_seminorms(k: &SymbolKernel, max_n: usize, probe: &ProbeSpec) -> Result<Vec<SeminormCertificate>> {
    let coarse = seminorm_table(k, max_n, probe)?;
    let fine = seminorm_table(k, max_n, &probe.refined())?;
    Ok(coarse
        .iter()
        .zip(&fine)
        .enumerate()
        .map(|(n, (&c, &f))| SeminormCertificate { n, coarse: c, refined: f, ratio: ratio(c, f) })
        .collect())
}

/// Estimate of
/// `sup_{xi', mu} <xi',mu>^{-d + 1/p + l - l' + |alpha|} || x^l D_x^{l'} D_xi^alpha k(xi', mu; .) ||_{L^p(R_+)}`.
///
/// The normal integral is evaluated in the rescaled variable `t = <xi',mu> x_n`
/// on `quad`, so the quadrature follows the kernel's own length scale.
pub fn char_lp_bound(
    k: &SymbolKernel,
    p: f64,
    l: usize,
    lp: usize,
    alpha: &[usize],
    probe: &ProbeSpec,
    quad: &NormalGrid,
) -> Result<f64> {
    if !(p >= 1.0) {
        return param(format!("L^p exponent must be >= 1, got {p}"));
    }
    if k.kind != KernelKind::Strong {
        return param("the L^p characterization applies to strong kernels");
    }
    let alpha_order: usize = alpha.iter().sum();
    if lp + alpha_order > 3 {
        return param("derivative order l' + |alpha| must not exceed 3");
    }
    let dim = alpha.len().max(1);
    let mut alpha_full = alpha.to_vec();
    alpha_full.resize(dim, 0);
    let points: Vec<(Vec<f64>, Option<Complex64>)> = probe
        .xi_points(dim)
        .into_iter()
        .flat_map(|xi| probe.mu_points(&k.sector).into_iter().map(move |mu| (xi.clone(), mu)))
        .collect();
    let inv_p = if p.is_infinite() { 0.0 } else { 1.0 / p };
    let values: Vec<Result<f64>> = points
        .par_iter()
        .map(|(xi, mu)| {
            k.sector.check(*mu)?;
            let br = bracket(xi, *mu);
            let f = |v: &[f64]| k.raw(&v[..dim], *mu, v[dim]);
            let mut orders = alpha_full.clone();
            orders.push(lp);
            let mut acc = 0.0f64;
            for (&t, &w) in quad.nodes().iter().zip(quad.weights()) {
                let x = t / br;
                let h_x = probe.h_rel * (x + 1.0 / br);
                let x_eff = x.max(0.5 * lp as f64 * h_x * 1.000001);
                let mut pt = xi.clone();
                pt.push(x_eff);
                let mut steps = vec![probe.h_rel * br; dim];
                steps.push(h_x);
                let d = check_finite(mixed_central(&f, &pt, &orders, &steps), &k.name)?;
                let g = x.powi(l as i32) * d.norm();
                if p.is_infinite() {
                    acc = acc.max(g);
                } else {
                    acc += w * g.powf(p);
                }
            }
            let norm = if p.is_infinite() { acc } else { (acc / br).powf(inv_p) };
            let expo = -k.order + inv_p + l as f64 - lp as f64 + alpha_order as f64;
            Ok(br.powf(expo) * norm)
        })
        .collect();
    let mut best = 0.0f64;
    for v in values {
        best = best.max(v?);
    }
    Ok(best)
}

/// Default quadrature grid in the rescaled normal variable.
pub fn default_char_quadrature() -> NormalGrid {
    NormalGrid::graded(512, 64.0, 1.02).expect("valid quadrature grid")
}

/// Lattice for Mikhlin-norm estimation (radii avoid the origin).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MikhlinProbe {
    pub xi_min: f64,
    pub xi_max: f64,
    pub count: usize,
    pub h_rel: f64,
}

impl Default for MikhlinProbe {
    fn default() -> Self {
        Self { xi_min: 1e-4, xi_max: 1e4, count: 801, h_rel: 1e-3 }
    }
}

/// Lower estimate of `sup_{xi != 0, |alpha| <= dim} |xi|^{|alpha|} |d^alpha a(xi, mu)|`.
pub fn mikhlin_fnorm(a: &MultiplierSymbol, mu: Option<Complex64>, dim: usize, probe: &MikhlinProbe) -> Result<f64> {
    if dim == 0 || dim > 3 {
        return param(format!("Mikhlin norm supports dim 1..=3, got {dim}"));
    }
    a.sector.check(mu)?;
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for axis in 0..dim {
        for sign in [1.0, -1.0] {
            let mut e = vec![0.0; dim];
            e[axis] = sign;
            dirs.push(e);
        }
    }
    if dim > 1 {
        for sign in [1.0, -1.0] {
            dirs.push(vec![sign / (dim as f64).sqrt(); dim]);
        }
    }
    let radii = logspace(probe.xi_min, probe.xi_max, probe.count);
    let indices = multi_indices(dim, dim);
    let f = |v: &[f64]| a.raw(v, mu);
    let values: Vec<Result<f64>> = radii
        .par_iter()
        .map(|&r| {
            let mut best = 0.0f64;
            for d in &dirs {
                let x: Vec<f64> = d.iter().map(|c| c * r).collect();
                let steps = vec![probe.h_rel * r; dim];
                for idx in &indices {
                    let order: usize = idx.iter().sum();
                    let v = check_finite(mixed_central(&f, &x, idx, &steps), &a.name)?;
                    best = best.max(r.powi(order as i32) * v.norm());
                }
            }
            Ok(best)
        })
        .collect();
    let mut best = 0.0f64;
    for v in values {
        best = best.max(v?);
    }
    Ok(best)
}
