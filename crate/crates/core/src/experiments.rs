//! Parameter scans shared by the command line tool and the acceptance suite.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::dynbc::{DynBCProblem, Variant};
use crate::error::{param, Result};
use crate::grid::{bracket2, make_grids, BoundaryField, Field, GridConfig};
use crate::norms::{lp_norm, opnorm_hilbert, NormSpec};
use crate::rbound::{probe_dictionary, rbound_lower, Abscissa, OpHandle, PoissonOp, RBoundSearch, RademacherSampler, ScanResult, ScanRow};
use crate::symbols::{lemma_max_brute, lemma_max_eval, KppParams, SymbolKernel};

/// `count` log-spaced moduli in `[abs_min, abs_max]` on each ray `arg mu = angle`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MuScan {
    pub rays: Vec<f64>,
    pub abs_min: f64,
    pub abs_max: f64,
    pub count: usize,
}

impl Default for MuScan {
    fn default() -> Self {
        Self { rays: vec![0.0], abs_min: 1.0, abs_max: 1e3, count: 20 }
    }
}

impl MuScan {
    pub fn validate(&self) -> Result<()> {
        if self.rays.is_empty() {
            return param("a mu scan needs at least one ray");
        }
        if !(self.abs_min > 0.0 && self.abs_max > self.abs_min && self.abs_max.is_finite()) {
            return param(format!("need 0 < abs_min < abs_max, got [{}, {}]", self.abs_min, self.abs_max));
        }
        if self.count < 2 {
            return param("a mu scan needs at least 2 points per ray");
        }
        Ok(())
    }

    pub fn moduli(&self) -> Vec<f64> {
        let (a, b) = (self.abs_min.ln(), self.abs_max.ln());
        (0..self.count).map(|i| (a + (b - a) * i as f64 / (self.count - 1) as f64).exp()).collect()
    }

    /// Ray-major list of parameters.
    pub fn points(&self) -> Vec<Complex64> {
        let moduli = self.moduli();
        self.rays.iter().flat_map(|&arg| moduli.iter().map(move |&r| Complex64::from_polar(r, arg))).collect()
    }
}

fn rows_for(points: &[Complex64], norms: Vec<f64>) -> Vec<ScanRow> {
    points.iter().zip(norms).map(|(mu, norm)| ScanRow { abs_mu: mu.norm(), arg_mu: mu.arg(), norm }).collect()
}

/// `mu -> opnorm_hilbert(k, mu, s, t)` over the scan.
pub fn opnorm_scan(kernel: &SymbolKernel, scan: &MuScan, grid: &GridConfig, s: f64, t: f64) -> Result<ScanResult> {
    scan.validate()?;
    let (tg, ng) = make_grids(grid)?;
    let points = scan.points();
    let norms = points.par_iter().map(|&mu| opnorm_hilbert(kernel, Some(mu), &tg, &ng, s, t)).collect::<Result<Vec<_>>>()?;
    let meta = json!({ "scan": "opnorm", "kernel": kernel.name, "s": s, "t": t, "mu": scan, "grid": grid });
    ScanResult::new(rows_for(&points, norms), Abscissa::Bracket, 0, meta)
}

/// Normal-direction norm of the image space of an R-bound scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalNorm {
    Weak,
    Strong,
}

/// R-bound scan of `<mu>^{1/p - loss} K_mu` over batches of parameters,
/// `L^2(boundary) -> L^p(R_+; L^2)` (weak or strong in the normal variable).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RBoundScan {
    pub p: f64,
    pub normal_norm: NormalNorm,
    pub loss: f64,
    /// Batch centres (the rows of the scan).
    pub centres: MuScan,
    /// Each batch holds `centre * spread` on every ray of `batch_rays`.
    pub spread: Vec<f64>,
    pub batch_rays: Vec<f64>,
    pub grid: GridConfig,
    pub search: RBoundSearch,
    pub seed: u64,
}

impl Default for RBoundScan {
    fn default() -> Self {
        Self {
            p: 2.0,
            normal_norm: NormalNorm::Weak,
            loss: 0.0,
            centres: MuScan { count: 10, ..MuScan::default() },
            spread: vec![1.0, 1.5, 2.25],
            batch_rays: vec![0.0, -0.35, 0.35],
            grid: GridConfig { points_per_dim: 64, ..GridConfig::default() },
            search: RBoundSearch::default(),
            seed: 1,
        }
    }
}

impl RBoundScan {
    pub fn out_norm(&self) -> NormSpec {
        match self.normal_norm {
            NormalNorm::Weak => NormSpec::WeakLp { p: self.p, q: 2.0 },
            NormalNorm::Strong => NormSpec::Mixed { p: self.p, q: 2.0, m: 0, weak: false },
        }
    }

    pub fn exponent(&self) -> f64 {
        1.0 / self.p - self.loss
    }
}

pub fn rbound_scan(kernel: &SymbolKernel, cfg: &RBoundScan) -> Result<ScanResult> {
    cfg.centres.validate()?;
    if cfg.spread.is_empty() || cfg.batch_rays.is_empty() {
        return param("batches need at least one spread factor and one ray");
    }
    let (tg, ng) = make_grids(&cfg.grid)?;
    let inputs: Vec<Field> = probe_dictionary(&tg).into_iter().map(Field::Boundary).collect();
    let in_norm = NormSpec::Lp { p: 2.0 };
    let out_norm = cfg.out_norm();
    let root = RademacherSampler::new(cfg.seed);
    let centres = cfg.centres.points();
    let mut norms = Vec::with_capacity(centres.len());
    for (b, centre) in centres.iter().enumerate() {
        let ops: Vec<OpHandle> = cfg
            .spread
            .iter()
            .flat_map(|&f| cfg.batch_rays.iter().map(move |&a| Complex64::from_polar(centre.norm() * f, centre.arg() + a)))
            .map(|mu| {
                Arc::new(PoissonOp {
                    kernel: kernel.clone(),
                    mu: Some(mu),
                    normal: ng.clone(),
                    factor: bracket2(0.0, mu.norm()).powf(cfg.exponent()),
                }) as OpHandle
            })
            .collect();
        let est = rbound_lower(&ops, &inputs, &cfg.search, &in_norm, &out_norm, &root.split(b as u64))?;
        norms.push(est.value);
    }
    let meta = json!({ "scan": "rbound", "kernel": kernel.name, "in_norm": in_norm, "out_norm": out_norm, "config": cfg });
    ScanResult::new(rows_for(&centres, norms), Abscissa::Bracket, cfg.seed, meta)
}

/// `mu -> sup_g ||mu^2 v(mu; 0, g)||_2 / ||g||_2` over the probe dictionary,
/// with `v` the boundary component of the resolvent.
pub fn resolvent_scan(variant: Variant, theta: f64, scan: &MuScan, grid: &GridConfig) -> Result<ScanResult> {
    scan.validate()?;
    let (tg, ng) = make_grids(grid)?;
    let problem = DynBCProblem::new(variant, theta, tg.clone(), ng)?;
    let dictionary = probe_dictionary(&tg);
    let g_norms: Vec<f64> = dictionary.iter().map(|g| lp_norm(&Field::Boundary(g.clone()), 2.0)).collect::<Result<_>>()?;
    let points = scan.points();
    let norms = points
        .par_iter()
        .map(|&mu| {
            let mut best = 0.0f64;
            for (g, gn) in dictionary.iter().zip(&g_norms) {
                let out = problem.resolvent(None, g, mu)?;
                let v = out.v.scaled(mu * mu);
                best = best.max(lp_norm(&Field::Boundary(v), 2.0)? / gn);
            }
            Ok(best)
        })
        .collect::<Result<Vec<_>>>()?;
    let meta = json!({ "scan": "resolvent", "problem": variant, "theta": theta, "mu": scan, "grid": grid });
    ScanResult::new(rows_for(&points, norms), Abscissa::Bracket, 0, meta)
}

/// Lattice of the boundedness check for the road-field multipliers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KppLatticeSpec {
    pub params: KppParams,
    /// Half-angle of the `mu` sector.
    pub theta: f64,
    /// Rays `arg z = +-eps_angle`.
    pub eps_angle: f64,
    /// Log-spaced moduli of `z` and `mu` in `[1e-3, 1e3]`.
    pub count: usize,
    pub edge_margin: f64,
}

impl Default for KppLatticeSpec {
    fn default() -> Self {
        Self { params: KppParams::default(), theta: std::f64::consts::FRAC_PI_4, eps_angle: 0.1, count: 25, edge_margin: 0.01 }
    }
}

impl KppLatticeSpec {
    /// Nested lattice with twice the density.
    pub fn refined(&self) -> Self {
        Self { count: 2 * self.count - 1, ..*self }
    }

    fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.theta > self.edge_margin && self.theta < FRAC_PI_2) {
            return param(format!("sector half-angle must lie in ({}, pi/2)", self.edge_margin));
        }
        if !(self.eps_angle > 0.0 && self.eps_angle < FRAC_PI_2) || self.count < 2 {
            return param("need 0 < eps_angle < pi/2 and at least 2 moduli");
        }
        Ok(())
    }

    fn mu_args(&self) -> [f64; 5] {
        let edge = self.theta - self.edge_margin;
        [0.0, 0.5 * self.theta, -0.5 * self.theta, edge, -edge]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KppLatticeReport {
    pub points: usize,
    pub sup_m1: f64,
    pub sup_m2: f64,
    /// `min |f(z, mu) - k|`.
    pub min_gap: f64,
    /// Largest `|m1|` on the spheres `|(z, mu)| = 1e-3` and `1e3`.
    pub m1_small: f64,
    pub m1_large: f64,
}

pub fn kpp_lattice(spec: &KppLatticeSpec) -> Result<KppLatticeReport> {
    spec.validate()?;
    let p = spec.params;
    let moduli = MuScan { rays: vec![0.0], abs_min: 1e-3, abs_max: 1e3, count: spec.count }.moduli();
    let z_args = [spec.eps_angle, -spec.eps_angle];
    let mu_args = spec.mu_args();
    let mut pts = Vec::new();
    for &za in &z_args {
        for &zr in &moduli {
            for &ma in &mu_args {
                for &mr in &moduli {
                    pts.push((Complex64::from_polar(zr, za), Complex64::from_polar(mr, ma)));
                }
            }
        }
    }
    let (sup_m1, sup_m2, min_gap) = pts
        .par_iter()
        .map(|&(z, mu)| (p.m1(z, mu).norm(), p.m2(z, mu).norm(), (p.f(z, mu) - p.k).norm()))
        .reduce(|| (0.0, 0.0, f64::INFINITY), |a, b| (a.0.max(b.0), a.1.max(b.1), a.2.min(b.2)));
    let sphere = |r: f64| {
        let mut best = 0.0f64;
        for phi in [FRAC_PI_2 / 4.0, FRAC_PI_2 / 2.0, 3.0 * FRAC_PI_2 / 4.0] {
            for &za in &z_args {
                for &ma in &mu_args {
                    let z = Complex64::from_polar(r * phi.cos(), za);
                    let mu = Complex64::from_polar(r * phi.sin(), ma);
                    best = best.max(p.m1(z, mu).norm());
                }
            }
        }
        best
    };
    Ok(KppLatticeReport { points: pts.len(), sup_m1, sup_m2, min_gap, m1_small: sphere(1e-3), m1_large: sphere(1e3) })
}

/// One tuple of the closed-form versus brute-force comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaRow {
    pub a: f64,
    pub rho: f64,
    pub t: f64,
    pub closed: f64,
    pub brute: f64,
    pub rel_err: f64,
}

/// `rho in {1.5, 2, 3}`, `a in {0.3, 0.7, 0.9} rho`, `t in 10^{-3..3}`.
pub fn lemma_max_lattice() -> Vec<(f64, f64, f64)> {
    let mut out = Vec::new();
    for rho in [1.5, 2.0, 3.0] {
        for frac in [0.3, 0.7, 0.9] {
            for e in -3..=3 {
                out.push((frac * rho, rho, 10f64.powi(e)));
            }
        }
    }
    out
}

pub fn lemma_max_scan(tuples: &[(f64, f64, f64)], s_max: f64, count: usize) -> Result<Vec<LemmaRow>> {
    tuples
        .par_iter()
        .map(|&(a, rho, t)| {
            let closed = lemma_max_eval(a, rho, t)?;
            let brute = lemma_max_brute(a, rho, t, s_max, count);
            Ok(LemmaRow { a, rho, t, closed, brute, rel_err: (closed - brute).abs() / closed })
        })
        .collect()
}

/// Manufactured heat-dynbc solution `e^{-t} e^{i x'} (e^{-x_n}, 1)` with zero forcing;
/// returns the sup-norm error of the boundary component at `t_end`.
pub fn euler_manufactured_error(grid: &GridConfig, theta: f64, dt: f64, t_end: f64) -> Result<f64> {
    let (tg, ng) = make_grids(grid)?;
    let problem = DynBCProblem::new(Variant::HeatDynbc, theta, tg.clone(), ng.clone())?;
    let u0 = crate::grid::HalfSpaceField::from_fn(tg.clone(), ng, |x, y| Complex64::from_polar((-y).exp(), x[0]));
    let v0 = BoundaryField::from_fn(tg.clone(), |x| Complex64::from_polar(1.0, x[0]));
    let tr = crate::dynbc::implicit_euler_evolve(&problem, None, None, &u0, &v0, dt, t_end)?;
    let decay = (-t_end).exp();
    Ok(tr
        .v
        .samples
        .iter()
        .zip(&v0.samples)
        .map(|(v, e)| (v - e * decay).norm())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::{heat_kernel, DEFAULT_THETA};

    #[test]
    fn mu_scan_points() {
        let s = MuScan { rays: vec![0.0, 0.5], abs_min: 1.0, abs_max: 100.0, count: 3 };
        let pts = s.points();
        assert_eq!(pts.len(), 6);
        assert!((pts[1].norm() - 10.0).abs() < 1e-12);
        assert!((pts[4].arg() - 0.5).abs() < 1e-12);
        assert!(MuScan { count: 1, ..s.clone() }.validate().is_err());
        assert!(MuScan { abs_min: 0.0, ..s }.validate().is_err());
    }

    #[test]
    fn lattice_has_every_tuple() {
        let l = lemma_max_lattice();
        assert_eq!(l.len(), 63);
        let rows = lemma_max_scan(&l[..5], 1e4, 10_000).unwrap();
        assert!(rows.iter().all(|r| r.rel_err < 1e-4));
    }

    #[test]
    fn small_opnorm_scan_decays() {
        let grid = GridConfig { points_per_dim: 16, normal_count: 128, ..GridConfig::default() };
        let scan = MuScan { count: 6, ..MuScan::default() };
        let r = opnorm_scan(&heat_kernel(DEFAULT_THETA), &scan, &grid, 0.0, 0.0).unwrap();
        assert!((r.slope + 0.5).abs() < 0.05, "{}", r.slope);
    }

    #[test]
    fn kpp_lattice_is_bounded() {
        let r = kpp_lattice(&KppLatticeSpec { count: 9, ..KppLatticeSpec::default() }).unwrap();
        assert!(r.sup_m1.is_finite() && r.sup_m2.is_finite() && r.min_gap > 0.0);
        assert!(r.m1_small < 0.01 * r.sup_m1 && r.m1_large < 0.01 * r.sup_m1);
    }
}
