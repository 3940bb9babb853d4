//! Resolvents of half-space problems with dynamic boundary conditions, and
//! implicit Euler time stepping built on them.
//!
//! Conventions: `x_n >= 0` is the normal variable, the outer normal derivative
//! is `d_nu = -d/dx_n`, and every solve is carried out mode by mode on the
//! tangential Fourier lattice.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::grid::{BoundaryField, Field, HalfSpaceField, NormalGrid, Sector, TangentialGrid};
use crate::norms::{lp_norm, normal_derivative_1d};
use crate::symbols::{ch_b, ch_roots, heat_dynbc_b, heat_kernel, kpp_kernel, kpp_m1, kpp_m2, tau, KppParams};
use crate::transforms::{forward, inverse};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `int_0^h s^k e^{-tau s} ds` for `k = 0, 1, 2`.
fn moments(tau: Complex64, h: f64) -> [Complex64; 3] {
    let z = tau * h;
    if z.norm() <= 1.0 {
        let mut out = [ZERO; 3];
        for (k, m) in out.iter_mut().enumerate() {
            let mut term = Complex64::new(1.0, 0.0);
            let mut sum = ZERO;
            for n in 0..40 {
                if n > 0 {
                    term *= -z / n as f64;
                }
                sum += term / (n + k + 1) as f64;
                if term.norm() < 1e-18 {
                    break;
                }
            }
            *m = sum * h.powi(k as i32 + 1);
        }
        out
    } else {
        let e = (-z).exp();
        [
            (1.0 - e) / tau,
            (1.0 - e * (1.0 + z)) / (tau * tau),
            (2.0 - e * (z * z + 2.0 * z + 2.0)) / (tau * tau * tau),
        ]
    }
}

/// `int_0^h e^{-tau s} p(s) ds` where `p` interpolates `values` at offsets `s`.
fn local_integral(m: &[Complex64; 3], s: [f64; 3], values: [Complex64; 3]) -> Complex64 {
    let mut acc = ZERO;
    for a in 0..3 {
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        let den = (s[a] - s[b]) * (s[a] - s[c]);
        let w = (m[2] - m[1] * (s[b] + s[c]) + m[0] * (s[b] * s[c])) / den;
        acc += w * values[a];
    }
    acc
}

/// Dirichlet problem `(tau^2 - d^2) u = f`, `u(0) = 0` on one Fourier mode,
/// with `f = 0` beyond the last node.
///
/// Returns `u` at the nodes and `u'(0) = int_0^inf e^{-tau y} f(y) dy`.
/// Both one-sided Green integrals are accumulated recursively with
/// piecewise-quadratic product integration, which is stable for any `tau`.
pub fn green_solve(tau: Complex64, nodes: &[f64], f: &[Complex64]) -> (Vec<Complex64>, Complex64) {
    let m = nodes.len();
    debug_assert!(m >= 3 && f.len() == m);
    let mut fwd = vec![ZERO; m];
    let mut bwd = vec![ZERO; m];
    for i in 1..m {
        let h = nodes[i] - nodes[i - 1];
        let mo = moments(tau, h);
        // s = x_i - y; the third interpolation node is the right neighbour when available
        let (k, sk) = if i + 1 < m { (i + 1, nodes[i] - nodes[i + 1]) } else { (i - 2, nodes[i] - nodes[i - 2]) };
        let local = local_integral(&mo, [0.0, h, sk], [f[i], f[i - 1], f[k]]);
        fwd[i] = (-tau * h).exp() * fwd[i - 1] + local;
    }
    for i in (0..m - 1).rev() {
        let h = nodes[i + 1] - nodes[i];
        let mo = moments(tau, h);
        // s = y - x_i
        let (k, sk) = if i >= 1 { (i - 1, nodes[i - 1] - nodes[i]) } else { (i + 2, nodes[i + 2] - nodes[i]) };
        let local = local_integral(&mo, [0.0, h, sk], [f[i], f[i + 1], f[k]]);
        bwd[i] = (-tau * h).exp() * bwd[i + 1] + local;
    }
    let b0 = bwd[0];
    let u = (0..m)
        .map(|i| (fwd[i] + bwd[i] - (-tau * nodes[i]).exp() * b0) / (2.0 * tau))
        .collect();
    (u, b0)
}

/// Largest equation-line residual over all modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub line: String,
    pub max: f64,
    /// True for residuals evaluated with grid finite differences.
    pub grid: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub residuals: Vec<Residual>,
}

impl Diagnostics {
    fn push(&mut self, line: &str, max: f64, grid: bool) {
        self.residuals.push(Residual { line: line.to_string(), max, grid });
    }

    /// Largest residual among the analytic (non-grid) lines.
    pub fn max_analytic(&self) -> f64 {
        self.residuals.iter().filter(|r| !r.grid).map(|r| r.max).fold(0.0, f64::max)
    }

    pub fn max_grid(&self) -> f64 {
        self.residuals.iter().filter(|r| r.grid).map(|r| r.max).fold(0.0, f64::max)
    }

    pub fn get(&self, line: &str) -> Option<f64> {
        self.residuals.iter().find(|r| r.line == line).map(|r| r.max)
    }
}

/// `|sum terms| / sum |terms|`, zero when every term vanishes.
fn relative(terms: &[Complex64]) -> f64 {
    let scale: f64 = terms.iter().map(|z| z.norm()).sum();
    if scale == 0.0 {
        0.0
    } else {
        terms.iter().sum::<Complex64>().norm() / scale
    }
}

/// Solution of a resolvent problem: interior field (when reconstructed), boundary field, residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolventOutput {
    pub u: Option<HalfSpaceField>,
    pub v: BoundaryField,
    pub diagnostics: Diagnostics,
}

/// Per-mode normal columns of the Fourier transform of `f` (`[mode][node]`).
fn columns(f: &HalfSpaceField) -> Vec<Vec<Complex64>> {
    let nt = f.tangential.len();
    let slices: Vec<Vec<Complex64>> = f.samples.par_chunks(nt).map(|s| forward(&f.tangential, s)).collect();
    (0..nt).map(|i| slices.iter().map(|s| s[i]).collect()).collect()
}

fn from_columns(tangential: &Arc<TangentialGrid>, normal: &Arc<NormalGrid>, cols: &[Vec<Complex64>]) -> Result<HalfSpaceField> {
    let samples: Vec<Complex64> = (0..normal.len())
        .into_par_iter()
        .flat_map_iter(|j| {
            let hat: Vec<Complex64> = cols.iter().map(|c| c[j]).collect();
            inverse(tangential, &hat)
        })
        .collect();
    HalfSpaceField::new(tangential.clone(), normal.clone(), samples)
}

fn check_mu(sector: &Sector, mu: Complex64) -> Result<()> {
    if mu == ZERO {
        return Err(Error::Domain("mu = 0 is excluded (the resolvent divides by mu^2)".into()));
    }
    sector.check(Some(mu))
}

fn check_normal(normal: &NormalGrid) -> Result<()> {
    if normal.len() < 3 {
        return param("normal grid needs at least 3 nodes");
    }
    Ok(())
}

/// `(tau^2 - d^2) u = f`, `u(0) = 0` mode by mode, `tau = tau(xi', mu)`.
pub fn dirichlet_resolvent(f: &HalfSpaceField, mu: Complex64, sector: &Sector) -> Result<HalfSpaceField> {
    check_mu(sector, mu)?;
    check_normal(&f.normal)?;
    let nodes = f.normal.nodes();
    let cols: Vec<Vec<Complex64>> = columns(f)
        .into_par_iter()
        .enumerate()
        .map(|(i, col)| green_solve(tau(f.tangential.frequency(i), mu), nodes, &col).0)
        .collect();
    from_columns(&f.tangential, &f.normal, &cols)
}

fn check_pair(f: &HalfSpaceField, g: &BoundaryField) -> Result<()> {
    if *f.tangential != *g.grid {
        return Err(Error::GridMismatch("interior and boundary data live on different tangential grids".into()));
    }
    Ok(())
}

/// Resolvent of the heat equation with dynamic boundary condition:
/// `(mu^2 + 1) u - Lap u = f`, `mu^2 v + d_nu u = g`, `u|_{x_n=0} = v`.
///
/// Reduction: `u_1` solves the Dirichlet problem for `f`; then
/// `v = mu^{-2} b_mu(D') (g - gamma_1 u_1)` and `u = u_1 + K_mu v`.
pub fn heat_dynbc_resolvent(f: &HalfSpaceField, g: &BoundaryField, mu: Complex64, theta: f64) -> Result<ResolventOutput> {
    let sector = Sector::symmetric(theta)?;
    check_mu(&sector, mu)?;
    check_normal(&f.normal)?;
    check_pair(f, g)?;
    let b = heat_dynbc_b(theta);
    let k = heat_kernel(theta);
    let grid = &g.grid;
    let nodes = f.normal.nodes();
    let g_hat = forward(grid, &g.samples);
    let mu2 = mu * mu;

    struct Mode {
        col: Vec<Complex64>,
        v: Complex64,
        res: [f64; 4],
    }
    let modes: Vec<Mode> = columns(f)
        .into_par_iter()
        .enumerate()
        .map(|(i, fcol)| {
            let xi = grid.frequency(i);
            let t = tau(xi, mu);
            let (u1, b0) = green_solve(t, nodes, &fcol);
            // gamma_1 u_1 = d_nu u_1(0) = -u_1'(0) = -b0
            let g_tilde = g_hat[i] + b0;
            let v = b.raw(xi, Some(mu)) / mu2 * g_tilde;
            let col: Vec<Complex64> = u1.iter().zip(nodes).map(|(a, &x)| a + v * k.raw(xi, Some(mu), x)).collect();
            let xi2: f64 = xi.iter().map(|x| x * x).sum();
            // line 1 on the homogeneous part: (mu^2 + 1 + |xi|^2 - tau^2) v e^{-tau x}
            let line1 = relative(&[(mu2 + 1.0 + xi2) * v, -(t * t) * v]);
            // line 2: mu^2 v + d_nu u - g, with d_nu u = -(u_1'(0) - tau v)
            let dnu = -(b0 - t * v);
            let line2 = relative(&[mu2 * v, dnu, -g_hat[i]]);
            let line3 = relative(&[col[0], -v]);
            let dnu_fd = -normal_derivative_1d(nodes, &col)[0];
            let line2_fd = relative(&[mu2 * v, dnu_fd, -g_hat[i]]);
            Mode { col, v, res: [line1, line2, line3, line2_fd] }
        })
        .collect();

    let mut diagnostics = Diagnostics::default();
    let names = ["interior", "dynamic", "trace", "dynamic-fd"];
    for (n, name) in names.iter().enumerate() {
        diagnostics.push(name, modes.iter().map(|m| m.res[n]).fold(0.0, f64::max), n == 3);
    }
    let v_hat: Vec<Complex64> = modes.iter().map(|m| m.v).collect();
    let cols: Vec<Vec<Complex64>> = modes.into_iter().map(|m| m.col).collect();
    let u = from_columns(&f.tangential, &f.normal, &cols)?;
    Ok(ResolventOutput { u: Some(u), v: BoundaryField { grid: grid.clone(), samples: inverse(grid, &v_hat) }, diagnostics })
}

/// Boundary dynamics of the Cahn–Hilliard problem: `mu^2 v = b_mu(D') g`.
pub fn ch_boundary_resolvent(g: &BoundaryField, mu: Complex64, theta: f64) -> Result<ResolventOutput> {
    let sector = Sector::symmetric(theta)?;
    check_mu(&sector, mu)?;
    let b = ch_b(theta);
    let grid = &g.grid;
    let g_hat = forward(grid, &g.samples);
    let mu2 = mu * mu;
    let mut v_hat = Vec::with_capacity(grid.len());
    let (mut roots, mut boundary) = (0.0f64, 0.0f64);
    for (i, gh) in g_hat.iter().enumerate() {
        let xi = grid.frequency(i);
        let v = b.raw(xi, Some(mu)) / mu2 * gh;
        let xi2: f64 = xi.iter().map(|x| x * x).sum();
        let (t1, t2) = ch_roots(xi2, mu);
        let i_mu = Complex64::new(0.0, 1.0) * mu;
        roots = roots.max(relative(&[t1 * t1, -xi2 - i_mu * 1.0])).max(relative(&[t2 * t2, -xi2 + i_mu]));
        // boundary line with the Neumann map of A e^{-t1 x} + B e^{-t2 x}, A t1 = B t2
        let neumann = 2.0 * t1 * t2 / (t1 + t2);
        boundary = boundary.max(relative(&[mu2 * v, neumann * v, xi2 * v, -gh]));
        v_hat.push(v);
    }
    let mut diagnostics = Diagnostics::default();
    diagnostics.push("characteristic-roots", roots, false);
    diagnostics.push("boundary", boundary, false);
    Ok(ResolventOutput { u: None, v: BoundaryField { grid: grid.clone(), samples: inverse(grid, &v_hat) }, diagnostics })
}

/// Road–field system with `f = 0`: `mu^2 gamma_0 u = m_1(D', mu) g`,
/// `mu^2 v = m_2(D', mu) g`, and `u = K_mu(gamma_0 u)` with the field kernel.
pub fn kpp_resolvent(g: &BoundaryField, mu: Complex64, params: KppParams, theta: f64, normal: &Arc<NormalGrid>) -> Result<ResolventOutput> {
    params.validate()?;
    let sector = Sector::symmetric(theta)?;
    check_mu(&sector, mu)?;
    check_normal(normal)?;
    let (m1, m2) = (kpp_m1(params, theta), kpp_m2(params, theta));
    let k = kpp_kernel(params.d, theta);
    let grid = &g.grid;
    let nodes = normal.nodes();
    let g_hat = forward(grid, &g.samples);
    let mu2 = mu * mu;

    struct Mode {
        col: Vec<Complex64>,
        v: Complex64,
        res: [f64; 5],
    }
    let modes: Vec<Mode> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let xi = grid.frequency(i);
            let xi2: f64 = xi.iter().map(|x| x * x).sum();
            let trace = m1.raw(xi, Some(mu)) / mu2 * g_hat[i];
            let v = m2.raw(xi, Some(mu)) / mu2 * g_hat[i];
            let col: Vec<Complex64> = nodes.iter().map(|&x| trace * k.raw(xi, Some(mu), x)).collect();
            let s = params.robin_root(Complex64::new(xi2.sqrt(), 0.0), mu);
            let p = mu2 + params.k + params.d_prime * xi2;
            let road = relative(&[-trace, p * v, -g_hat[i]]);
            let coupling = relative(&[(s + 1.0) * trace, -params.k * v]);
            // field decay rate of the kernel, independent of the Robin root
            let rate = (mu2 / params.d + xi2).sqrt();
            let robin = relative(&[params.d * rate * trace, trace, -params.k * v]);
            let dnu_fd = -normal_derivative_1d(nodes, &col)[0];
            let robin_fd = relative(&[params.d * dnu_fd, trace, -params.k * v]);
            let trace_line = relative(&[col[0], -trace]);
            Mode { col, v, res: [road, coupling, robin, trace_line, robin_fd] }
        })
        .collect();

    let mut diagnostics = Diagnostics::default();
    for (n, name) in ["road", "coupling", "robin", "trace", "robin-fd"].iter().enumerate() {
        diagnostics.push(name, modes.iter().map(|m| m.res[n]).fold(0.0, f64::max), n == 4);
    }
    let v_hat: Vec<Complex64> = modes.iter().map(|m| m.v).collect();
    let cols: Vec<Vec<Complex64>> = modes.into_iter().map(|m| m.col).collect();
    let u = from_columns(grid, normal, &cols)?;
    Ok(ResolventOutput { u: Some(u), v: BoundaryField { grid: grid.clone(), samples: inverse(grid, &v_hat) }, diagnostics })
}

/// Which dynamic boundary problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "problem", rename_all = "kebab-case")]
pub enum Variant {
    HeatDynbc,
    Ch,
    Kpp(KppParams),
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::HeatDynbc => "heat-dynbc",
            Variant::Ch => "ch",
            Variant::Kpp(_) => "kpp",
        }
    }
}

/// A problem on fixed grids with its parameter sector `|arg mu| < theta`.
#[derive(Debug, Clone)]
pub struct DynBCProblem {
    pub variant: Variant,
    pub theta: f64,
    pub tangential: Arc<TangentialGrid>,
    pub normal: Arc<NormalGrid>,
}

impl DynBCProblem {
    pub fn new(variant: Variant, theta: f64, tangential: Arc<TangentialGrid>, normal: Arc<NormalGrid>) -> Result<Self> {
        if !(theta > 0.0 && theta < std::f64::consts::FRAC_PI_2) {
            return param(format!("sector half-angle must lie in (0, pi/2), got {theta}"));
        }
        if let Variant::Kpp(params) = variant {
            params.validate()?;
        }
        check_normal(&normal)?;
        Ok(Self { variant, theta, tangential, normal })
    }

    /// `R(mu)(f, g)`; the interior datum must vanish except for the heat problem.
    pub fn resolvent(&self, f: Option<&HalfSpaceField>, g: &BoundaryField, mu: Complex64) -> Result<ResolventOutput> {
        match self.variant {
            Variant::HeatDynbc => {
                let zero;
                let f = match f {
                    Some(f) => f,
                    None => {
                        zero = HalfSpaceField::zeros(self.tangential.clone(), self.normal.clone());
                        &zero
                    }
                };
                heat_dynbc_resolvent(f, g, mu, self.theta)
            }
            Variant::Ch | Variant::Kpp(_) if f.is_some_and(|f| f.samples.iter().any(|z| *z != ZERO)) => Err(Error::Unsupported(
                format!("{}: only boundary data (f = 0) are supported", self.variant.name()),
            )),
            Variant::Ch => ch_boundary_resolvent(g, mu, self.theta),
            Variant::Kpp(params) => kpp_resolvent(g, mu, params, self.theta, &self.normal),
        }
    }
}

/// Summary of one implicit Euler step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub boundary_norm: f64,
    pub interior_norm: f64,
    /// `||w_m - w_{m-1}||` (interior and boundary L^2 norms added).
    pub increment: f64,
    pub residual: f64,
    pub residual_fd: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub records: Vec<StepRecord>,
    pub u: HalfSpaceField,
    pub v: BoundaryField,
}

pub type InteriorForcing<'a> = &'a (dyn Fn(f64) -> HalfSpaceField + Sync);
pub type BoundaryForcing<'a> = &'a (dyn Fn(f64) -> BoundaryField + Sync);

fn l2(f: Field) -> f64 {
    lp_norm(&f, 2.0).unwrap_or(f64::NAN)
}

fn diff_norm_h(a: &HalfSpaceField, b: &HalfSpaceField) -> f64 {
    l2(Field::HalfSpace(HalfSpaceField { samples: a.samples.iter().zip(&b.samples).map(|(x, y)| x - y).collect(), ..a.clone() }))
}

fn diff_norm_b(a: &BoundaryField, b: &BoundaryField) -> f64 {
    l2(Field::Boundary(BoundaryField { samples: a.samples.iter().zip(&b.samples).map(|(x, y)| x - y).collect(), ..a.clone() }))
}

/// Implicit Euler `w_{m+1} = (1/dt - A)^{-1}(w_m/dt + F(t_{m+1}))` with
/// `lambda = mu^2 = 1/dt`, starting from `(u0, v0)`.
pub fn implicit_euler_evolve(
    problem: &DynBCProblem,
    f_of_t: Option<InteriorForcing>,
    g_of_t: Option<BoundaryForcing>,
    u0: &HalfSpaceField,
    v0: &BoundaryField,
    dt: f64,
    t_end: f64,
) -> Result<Trajectory> {
    if !(dt > 0.0) || !dt.is_finite() {
        return param(format!("time step must be positive, got {dt}"));
    }
    if !(t_end > 0.0) || !t_end.is_finite() {
        return param(format!("final time must be positive, got {t_end}"));
    }
    let steps_f = t_end / dt;
    let steps = steps_f.round();
    if (steps_f - steps).abs() > 1e-9 * steps_f.max(1.0) || steps < 1.0 {
        return param(format!("dt = {dt} does not divide T = {t_end}"));
    }
    if !matches!(problem.variant, Variant::HeatDynbc) {
        return Err(Error::Unsupported(format!(
            "{}: time stepping needs the interior resolvent, available for heat-dynbc only",
            problem.variant.name()
        )));
    }
    let mu = Complex64::new(dt.powf(-0.5), 0.0);
    let inv_dt = Complex64::new(1.0 / dt, 0.0);
    let (mut u, mut v) = (u0.clone(), v0.clone());
    let mut records = Vec::with_capacity(steps as usize);
    for m in 1..=steps as usize {
        let t = m as f64 * dt;
        let mut f = u.scaled(inv_dt);
        if let Some(ff) = f_of_t {
            let extra = ff(t);
            f.samples.iter_mut().zip(&extra.samples).for_each(|(a, b)| *a += b);
        }
        let mut g = v.scaled(inv_dt);
        if let Some(gg) = g_of_t {
            let extra = gg(t);
            g.samples.iter_mut().zip(&extra.samples).for_each(|(a, b)| *a += b);
        }
        let out = problem.resolvent(Some(&f), &g, mu)?;
        let un = out.u.expect("heat resolvent reconstructs the interior");
        let increment = diff_norm_h(&un, &u) + diff_norm_b(&out.v, &v);
        records.push(StepRecord {
            t,
            boundary_norm: l2(Field::Boundary(out.v.clone())),
            interior_norm: l2(Field::HalfSpace(un.clone())),
            increment,
            residual: out.diagnostics.max_analytic(),
            residual_fd: out.diagnostics.max_grid(),
        });
        u = un;
        v = out.v;
    }
    Ok(Trajectory { records, u, v })
}
