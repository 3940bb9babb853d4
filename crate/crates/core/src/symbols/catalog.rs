//! Concrete symbol-kernels and multiplier symbols.

use std::f64::consts::FRAC_PI_4;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{bracket, Sector};

/// Default half-opening of the parameter sector `|arg mu| < theta`.
pub const DEFAULT_THETA: f64 = FRAC_PI_4;

type KernelFn = dyn Fn(&[f64], Option<Complex64>, f64) -> Complex64 + Send + Sync;
type MultiplierFn = dyn Fn(&[f64], Option<Complex64>) -> Complex64 + Send + Sync;

/// Membership claim of a symbol-kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    /// Rescaled kernel rapidly decreasing in `t`.
    Strong,
    /// Rescaled kernel with bounded `(t D_t)` derivatives only.
    Weak,
}

/// A symbol-kernel `k(xi', mu; x_n)` of order `d`.
#[derive(Clone)]
pub struct SymbolKernel {
    pub name: String,
    pub order: f64,
    pub kind: KernelKind,
    pub sector: Sector,
    eval: Arc<KernelFn>,
}

impl fmt::Debug for SymbolKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymbolKernel")
            .field("name", &self.name)
            .field("order", &self.order)
            .field("kind", &self.kind)
            .field("sector", &self.sector)
            .finish()
    }
}

impl SymbolKernel {
    pub fn new<F>(name: impl Into<String>, order: f64, kind: KernelKind, sector: Sector, eval: F) -> Self
    where
        F: Fn(&[f64], Option<Complex64>, f64) -> Complex64 + Send + Sync + 'static,
    {
        Self { name: name.into(), order, kind, sector, eval: Arc::new(eval) }
    }

    /// Unchecked evaluation; finite-difference stencils use this to step
    /// slightly past sector boundaries.
    pub fn raw(&self, xi: &[f64], mu: Option<Complex64>, xn: f64) -> Complex64 {
        (self.eval)(xi, mu, xn)
    }

    pub fn eval(&self, xi: &[f64], mu: Option<Complex64>, xn: f64) -> Result<Complex64> {
        eval_kernel(self, xi, mu, xn)
    }

    /// The parameter-free kernel `k_mu(xi', x_n) = k(xi', mu; x_n)`.
    pub fn freeze(&self, mu: Complex64) -> Result<SymbolKernel> {
        self.sector.check(Some(mu))?;
        let inner = self.eval.clone();
        Ok(SymbolKernel {
            name: format!("{}@mu={mu}", self.name),
            order: self.order,
            kind: self.kind,
            sector: Sector::Empty,
            eval: Arc::new(move |xi, _, xn| inner(xi, Some(mu), xn)),
        })
    }
}

/// Checked kernel evaluation.
pub fn eval_kernel(k: &SymbolKernel, xi: &[f64], mu: Option<Complex64>, xn: f64) -> Result<Complex64> {
    k.sector.check(mu)?;
    if !(xn >= 0.0) {
        return Err(Error::Domain(format!("x_n = {xn} is negative")));
    }
    let v = k.raw(xi, mu, xn);
    if v.re.is_finite() && v.im.is_finite() {
        Ok(v)
    } else {
        Err(Error::Domain(format!("{} not finite at xi={xi:?}, mu={mu:?}, x_n={xn}", k.name)))
    }
}

/// `k~(xi', mu; t) = k(xi', mu; t / <xi', mu>)`.
pub fn eval_scaled(k: &SymbolKernel, xi: &[f64], mu: Option<Complex64>, t: f64) -> Result<Complex64> {
    eval_kernel(k, xi, mu, t / bracket(xi, mu))
}

/// A tangential Fourier multiplier `a(xi', mu)`.
#[derive(Clone)]
pub struct MultiplierSymbol {
    pub name: String,
    pub sector: Sector,
    eval: Arc<MultiplierFn>,
}

impl fmt::Debug for MultiplierSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MultiplierSymbol")
            .field("name", &self.name)
            .field("sector", &self.sector)
            .finish()
    }
}

impl MultiplierSymbol {
    pub fn new<F>(name: impl Into<String>, sector: Sector, eval: F) -> Self
    where
        F: Fn(&[f64], Option<Complex64>) -> Complex64 + Send + Sync + 'static,
    {
        Self { name: name.into(), sector, eval: Arc::new(eval) }
    }

    pub fn raw(&self, xi: &[f64], mu: Option<Complex64>) -> Complex64 {
        (self.eval)(xi, mu)
    }

    pub fn eval(&self, xi: &[f64], mu: Option<Complex64>) -> Result<Complex64> {
        self.sector.check(mu)?;
        let v = self.raw(xi, mu);
        if v.re.is_finite() && v.im.is_finite() {
            Ok(v)
        } else {
            Err(Error::Domain(format!("{} not finite at xi={xi:?}, mu={mu:?}", self.name)))
        }
    }

    /// Pointwise product of two symbols on a common sector.
    pub fn product(&self, other: &MultiplierSymbol) -> MultiplierSymbol {
        let (a, b) = (self.eval.clone(), other.eval.clone());
        MultiplierSymbol {
            name: format!("{}*{}", self.name, other.name),
            sector: self.sector,
            eval: Arc::new(move |xi, mu| a(xi, mu) * b(xi, mu)),
        }
    }
}

fn norm2(xi: &[f64]) -> f64 {
    xi.iter().map(|x| x * x).sum()
}

fn mu_or_zero(mu: Option<Complex64>) -> Complex64 {
    mu.unwrap_or_default()
}

/// `tau(xi', mu) = sqrt(1 + |xi'|^2 + mu^2)`, principal branch.
pub fn tau(xi: &[f64], mu: Complex64) -> Complex64 {
    (Complex64::new(1.0 + norm2(xi), 0.0) + mu * mu).sqrt()
}

fn symmetric_sector(theta: f64) -> Sector {
    Sector::symmetric(theta).expect("0 < theta <= pi")
}

/// Dirichlet heat kernel `exp(-tau(xi', mu) x_n)`, strong, order 0.
pub fn heat_kernel(theta: f64) -> SymbolKernel {
    SymbolKernel::new("heat", 0.0, KernelKind::Strong, symmetric_sector(theta), |xi, mu, xn| {
        (-tau(xi, mu_or_zero(mu)) * xn).exp()
    })
}

/// KPP interior kernel `exp(-sqrt(mu^2/d + |xi'|^2) x_n)`.
pub fn kpp_kernel(d: f64, theta: f64) -> SymbolKernel {
    SymbolKernel::new("kpp", 0.0, KernelKind::Strong, symmetric_sector(theta), move |xi, mu, xn| {
        let m = mu_or_zero(mu);
        (-(m * m / d + norm2(xi)).sqrt() * xn).exp()
    })
}

/// `k = value`, claimed as the given kind. Without `t`-decay it fails the strong seminorms.
pub fn constant_kernel(name: &str, value: f64, kind: KernelKind, sector: Sector) -> SymbolKernel {
    SymbolKernel::new(name, 0.0, kind, sector, move |_, _, _| Complex64::new(value, 0.0))
}

pub fn zero_kernel(sector: Sector) -> SymbolKernel {
    constant_kernel("zero", 0.0, KernelKind::Strong, sector)
}

/// Parameter-dependent Dirichlet-to-Neumann symbol `sqrt(1 + |xi'|^2 + mu^2)`.
pub fn dtn_symbol(theta: f64) -> MultiplierSymbol {
    MultiplierSymbol::new("dtn", symmetric_sector(theta), |xi, mu| tau(xi, mu_or_zero(mu)))
}

/// Boundary symbol of the heat problem with dynamic boundary condition,
/// `mu^2 / (mu^2 + sqrt(1 + |xi'|^2 + mu^2))`.
pub fn heat_dynbc_b(theta: f64) -> MultiplierSymbol {
    MultiplierSymbol::new("heat-dynbc-b", symmetric_sector(theta), |xi, mu| {
        let m = mu_or_zero(mu);
        let m2 = m * m;
        m2 / (m2 + tau(xi, m))
    })
}

/// The two roots `sqrt(|xi'|^2 + i mu)`, `sqrt(|xi'|^2 - i mu)`.
pub fn ch_roots(xi2: f64, mu: Complex64) -> (Complex64, Complex64) {
    let i_mu = Complex64::i() * mu;
    ((xi2 + i_mu).sqrt(), (xi2 - i_mu).sqrt())
}

/// Cahn-Hilliard boundary symbol
/// `mu^2 (t1 + t2) / ((mu^2 + |xi'|^2)(t1 + t2) + 2 t1 t2)`.
pub fn ch_b(theta: f64) -> MultiplierSymbol {
    MultiplierSymbol::new("ch-b", symmetric_sector(theta), |xi, mu| {
        let m = mu_or_zero(mu);
        let xi2 = norm2(xi);
        let (t1, t2) = ch_roots(xi2, m);
        let m2 = m * m;
        m2 * (t1 + t2) / ((m2 + xi2) * (t1 + t2) + 2.0 * t1 * t2)
    })
}

/// Positive parameters of the KPP road-field model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KppParams {
    pub d: f64,
    pub d_prime: f64,
    pub k: f64,
}

impl Default for KppParams {
    fn default() -> Self {
        Self { d: 1.0, d_prime: 1.0, k: 1.0 }
    }
}

impl KppParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("d", self.d), ("d'", self.d_prime), ("k", self.k)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Parameter(format!("KPP parameter {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// `sqrt(d mu^2 + d^2 z^2)`, the Robin factor `d * sqrt(mu^2/d + z^2)`.
    pub fn robin_root(&self, z: Complex64, mu: Complex64) -> Complex64 {
        (self.d * mu * mu + self.d * self.d * z * z).sqrt()
    }

    /// `f(z, mu) = (mu^2 + k + d' z^2)(sqrt(d mu^2 + d^2 z^2) + 1)`.
    pub fn f(&self, z: Complex64, mu: Complex64) -> Complex64 {
        (mu * mu + self.k + self.d_prime * z * z) * (self.robin_root(z, mu) + 1.0)
    }

    /// `m1(z, mu) = mu^2 k / (f(z, mu) - k)`.
    pub fn m1(&self, z: Complex64, mu: Complex64) -> Complex64 {
        mu * mu * self.k / (self.f(z, mu) - self.k)
    }

    /// `m2(z, mu) = mu^2 (sqrt(d mu^2 + d^2 z^2) + 1) / (f(z, mu) - k)`.
    pub fn m2(&self, z: Complex64, mu: Complex64) -> Complex64 {
        mu * mu * (self.robin_root(z, mu) + 1.0) / (self.f(z, mu) - self.k)
    }
}

pub fn kpp_m1(params: KppParams, theta: f64) -> MultiplierSymbol {
    MultiplierSymbol::new("kpp-m1", symmetric_sector(theta), move |xi, mu| {
        params.m1(Complex64::new(norm2(xi).sqrt(), 0.0), mu_or_zero(mu))
    })
}

pub fn kpp_m2(params: KppParams, theta: f64) -> MultiplierSymbol {
    MultiplierSymbol::new("kpp-m2", symmetric_sector(theta), move |xi, mu| {
        params.m2(Complex64::new(norm2(xi).sqrt(), 0.0), mu_or_zero(mu))
    })
}

/// Bessel potential symbol `<xi'>^s` (parameter-free).
pub fn bessel_symbol(s: f64) -> MultiplierSymbol {
    MultiplierSymbol::new(format!("bessel({s})"), Sector::Empty, move |xi, _| {
        Complex64::new(bracket(xi, None).powf(s), 0.0)
    })
}

pub fn constant_symbol(value: Complex64) -> MultiplierSymbol {
    MultiplierSymbol::new("constant", Sector::Empty, move |_, _| value)
}

/// `exp(i h . xi')`, the symbol of translation by `-h`.
pub fn shift_symbol(h: Vec<f64>) -> MultiplierSymbol {
    MultiplierSymbol::new("shift", Sector::Empty, move |xi, _| {
        let phase: f64 = xi.iter().zip(&h).map(|(a, b)| a * b).sum();
        Complex64::from_polar(1.0, phase)
    })
}

/// Kernel catalog by name.
pub fn kernel_by_name(name: &str, kpp: KppParams, theta: f64) -> Option<SymbolKernel> {
    let sector = symmetric_sector(theta);
    Some(match name {
        "heat" => heat_kernel(theta),
        "kpp" => kpp_kernel(kpp.d, theta),
        "constant-one" => constant_kernel("constant-one", 1.0, KernelKind::Strong, sector),
        "zero" => zero_kernel(sector),
        _ => return None,
    })
}

/// Multiplier catalog by name.
pub fn multiplier_by_name(name: &str, kpp: KppParams, theta: f64) -> Option<MultiplierSymbol> {
    Some(match name {
        "dtn" => dtn_symbol(theta),
        "heat-dynbc-b" => heat_dynbc_b(theta),
        "ch-b" => ch_b(theta),
        "kpp-m1" => kpp_m1(kpp, theta),
        "kpp-m2" => kpp_m2(kpp, theta),
        "one" => constant_symbol(Complex64::new(1.0, 0.0)),
        _ => return None,
    })
}

pub const KERNEL_NAMES: &[&str] = &["heat", "kpp", "constant-one", "zero"];

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn heat_kernel_values() {
        let k = heat_kernel(DEFAULT_THETA);
        let one = Some(c(1.0, 0.0));
        assert_abs_diff_eq!(eval_kernel(&k, &[0.0], one, 0.0).unwrap().re, 1.0, epsilon = 1e-15);
        let v = eval_kernel(&k, &[0.0], one, 1.0).unwrap();
        assert_abs_diff_eq!(v.re, (-2f64.sqrt()).exp(), epsilon = 1e-14);
        assert_abs_diff_eq!(v.re, 0.24312, epsilon = 1e-5);
    }

    #[test]
    fn kpp_kernel_value() {
        let k = kpp_kernel(1.0, DEFAULT_THETA);
        let v = eval_kernel(&k, &[0.0], Some(c(1.0, 0.0)), 2.0).unwrap();
        assert_abs_diff_eq!(v.re, (-2.0f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn scaled_heat_values() {
        let k = heat_kernel(DEFAULT_THETA);
        let one = Some(c(1.0, 0.0));
        for (t, want) in [(0.0, 1.0), (1.0, (-1.0f64).exp()), (2.0, (-2.0f64).exp())] {
            let v = eval_scaled(&k, &[0.0], one, t).unwrap();
            assert_abs_diff_eq!(v.re, want, epsilon = 1e-14);
        }
    }

    #[test]
    fn out_of_sector_is_domain_error() {
        let k = heat_kernel(DEFAULT_THETA);
        assert!(matches!(eval_kernel(&k, &[0.0], Some(c(0.0, 1.0)), 0.0), Err(Error::Domain(_))));
        assert!(matches!(eval_kernel(&k, &[0.0], None, 0.0), Err(Error::Domain(_))));
        assert!(matches!(eval_kernel(&k, &[0.0], Some(c(1.0, 0.0)), -1.0), Err(Error::Domain(_))));
        let frozen = k.freeze(c(2.0, 0.5)).unwrap();
        assert!(eval_kernel(&frozen, &[1.0], None, 0.3).is_ok());
        assert!(eval_kernel(&frozen, &[1.0], Some(c(1.0, 0.0)), 0.3).is_err());
    }

    #[test]
    fn boundary_symbols_at_origin() {
        let one = Some(c(1.0, 0.0));
        let want = 1.0 / (1.0 + 2f64.sqrt());
        let hb = heat_dynbc_b(DEFAULT_THETA).eval(&[0.0], one).unwrap();
        assert_abs_diff_eq!(hb.re, want, epsilon = 1e-14);
        let cb = ch_b(DEFAULT_THETA).eval(&[0.0], one).unwrap();
        assert_abs_diff_eq!(cb.re, want, epsilon = 1e-14);
        assert_abs_diff_eq!(cb.im, 0.0, epsilon = 1e-14);
        let p = KppParams::default();
        assert_abs_diff_eq!(kpp_m1(p, DEFAULT_THETA).eval(&[0.0], one).unwrap().re, 1.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(kpp_m2(p, DEFAULT_THETA).eval(&[0.0], one).unwrap().re, 2.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(dtn_symbol(DEFAULT_THETA).eval(&[0.0], one).unwrap().re, 2f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn kpp_param_validation() {
        assert!(KppParams { d: 0.0, ..KppParams::default() }.validate().is_err());
        assert!(KppParams::default().validate().is_ok());
    }

    #[test]
    fn catalog_lookup() {
        for name in KERNEL_NAMES {
            assert!(kernel_by_name(name, KppParams::default(), DEFAULT_THETA).is_some());
        }
        assert!(kernel_by_name("nosuch", KppParams::default(), DEFAULT_THETA).is_none());
    }

    proptest! {
        #[test]
        fn conjugate_symmetry(xi in -50.0f64..50.0, r in 0.01f64..100.0, arg in -0.7f64..0.7, xn in 0.0f64..5.0) {
            let mu = Complex64::from_polar(r, arg);
            let p = KppParams { d: 1.3, d_prime: 0.7, k: 2.0 };
            let kernels = [heat_kernel(DEFAULT_THETA), kpp_kernel(1.3, DEFAULT_THETA)];
            for k in &kernels {
                let a = eval_kernel(k, &[xi], Some(mu), xn).unwrap();
                let b = eval_kernel(k, &[xi], Some(mu.conj()), xn).unwrap();
                prop_assert!((a - b.conj()).norm() <= 1e-12 * (1.0 + a.norm()));
            }
            let symbols = [dtn_symbol(DEFAULT_THETA), heat_dynbc_b(DEFAULT_THETA), ch_b(DEFAULT_THETA), kpp_m1(p, DEFAULT_THETA), kpp_m2(p, DEFAULT_THETA)];
            for s in &symbols {
                let a = s.eval(&[xi], Some(mu)).unwrap();
                let b = s.eval(&[xi], Some(mu.conj())).unwrap();
                prop_assert!((a - b.conj()).norm() <= 1e-12 * (1.0 + a.norm()));
            }
        }

        #[test]
        fn scaled_matches_unscaled(xi in -50.0f64..50.0, r in 0.01f64..100.0, arg in -0.7f64..0.7, t in 0.0f64..20.0) {
            let mu = Some(Complex64::from_polar(r, arg));
            let k = heat_kernel(DEFAULT_THETA);
            let a = eval_scaled(&k, &[xi], mu, t).unwrap();
            let b = eval_kernel(&k, &[xi], mu, t / bracket(&[xi], mu)).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
