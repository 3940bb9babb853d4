//! Rademacher sums, empirical R-bound lower estimates and decay-rate fits.

use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::grid::{bracket2, BoundaryField, Field, NormalGrid, TangentialGrid};
use crate::norms::NormSpec;
use crate::symbols::{MultiplierSymbol, SymbolKernel};
use crate::transforms::{apply_multiplier, apply_poisson};

pub const SCHEMA_VERSION: u32 = 1;
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Deterministic source of complex Rademacher variables (uniform on the unit circle).
///
/// Stream `s` of seed `k` is the ChaCha20 keystream for `(k, s)`, so draws are
/// reproducible bit-for-bit and independent streams can be handed to workers.
#[derive(Debug, Clone)]
pub struct RademacherSampler {
    seed: u64,
    stream: u64,
    rng: ChaCha20Rng,
}

impl RademacherSampler {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent sampler for sub-task `index` (same seed, derived stream).
    pub fn split(&self, index: u64) -> Self {
        let stream = self.stream.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17) ^ index.wrapping_add(1);
        Self::with_stream(self.seed, stream)
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn below(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }

    pub fn next_eps(&mut self) -> Complex64 {
        Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * self.uniform())
    }
}

pub fn sample_rademacher(sampler: &mut RademacherSampler, count: usize) -> Vec<Complex64> {
    (0..count).map(|_| sampler.next_eps()).collect()
}

/// A Monte-Carlo (or exact) value with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub trials: usize,
    pub exact: bool,
}

fn check_grids(fields: &[Field]) -> Result<()> {
    let first = fields.first().ok_or_else(|| Error::Parameter("empty field sequence".into()))?;
    if fields.iter().any(|f| !first.same_grid(f)) {
        return Err(Error::GridMismatch("fields of a Rademacher sum must share a grid".into()));
    }
    Ok(())
}

/// `(E || sum_n eps_n f_n ||_X^p)^{1/p}`.
///
/// A single field, or `p = 2` with an L^2 norm, is evaluated exactly.
pub fn eps_p_norm(fields: &[Field], p: f64, norm: &NormSpec, trials: usize, sampler: &RademacherSampler) -> Result<Estimate> {
    check_grids(fields)?;
    if !(p >= 1.0) || !p.is_finite() {
        return param(format!("moment exponent must lie in [1, inf), got {p}"));
    }
    norm.validate()?;
    if fields.len() == 1 {
        return Ok(Estimate { value: norm.eval(&fields[0])?, stderr: 0.0, trials: 0, exact: true });
    }
    if p == 2.0 && norm.is_l2() {
        let mut s = 0.0;
        for f in fields {
            s += norm.eval(f)?.powi(2);
        }
        return Ok(Estimate { value: s.sqrt(), stderr: 0.0, trials: 0, exact: true });
    }
    eps_p_norm_sampled(fields, p, norm, trials, sampler)
}

/// Always the Monte-Carlo path.
pub fn eps_p_norm_sampled(fields: &[Field], p: f64, norm: &NormSpec, trials: usize, sampler: &RademacherSampler) -> Result<Estimate> {
    check_grids(fields)?;
    if trials == 0 {
        return param("at least one trial is required");
    }
    let refs: Vec<&Field> = fields.iter().collect();
    let draws: Vec<Result<f64>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut s = sampler.split(i as u64);
            let eps = sample_rademacher(&mut s, fields.len());
            Ok(norm.eval(&Field::linear_combination(&eps, &refs)?)?.powf(p))
        })
        .collect();
    let mut xs = Vec::with_capacity(trials);
    for d in draws {
        xs.push(d?);
    }
    Ok(moment_estimate(&xs, p))
}

fn moment_estimate(xs: &[f64], p: f64) -> Estimate {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    let value = mean.powf(1.0 / p);
    // delta method for m -> m^{1/p}
    let stderr = if mean > 0.0 { (var / n).sqrt() * value / (p * mean) } else { 0.0 };
    Estimate { value, stderr, trials: xs.len(), exact: false }
}

/// A bounded linear operator acting on grid fields.
pub trait LinearOp: Send + Sync {
    fn apply(&self, x: &Field) -> Result<Field>;
    fn label(&self) -> String;
}

pub type OpHandle = Arc<dyn LinearOp>;

fn boundary_input<'a>(x: &'a Field, who: &str) -> Result<&'a BoundaryField> {
    match x {
        Field::Boundary(b) => Ok(b),
        Field::HalfSpace(_) => Err(Error::GridMismatch(format!("{who} acts on boundary fields"))),
    }
}

/// `c * x`.
pub struct ScalarOp(pub Complex64);

impl LinearOp for ScalarOp {
    fn apply(&self, x: &Field) -> Result<Field> {
        Ok(x.with_samples(x.samples().iter().map(|z| z * self.0).collect()))
    }

    fn label(&self) -> String {
        format!("scalar({})", self.0)
    }
}

/// `factor * a(D)` at a fixed parameter.
pub struct MultiplierOp {
    pub symbol: MultiplierSymbol,
    pub mu: Option<Complex64>,
    pub factor: f64,
}

impl LinearOp for MultiplierOp {
    fn apply(&self, x: &Field) -> Result<Field> {
        let out = apply_multiplier(&self.symbol, self.mu, boundary_input(x, "a multiplier")?)?;
        Ok(Field::Boundary(out.scaled(Complex64::new(self.factor, 0.0))))
    }

    fn label(&self) -> String {
        format!("{}(mu={:?})", self.symbol.name, self.mu)
    }
}

/// `factor * K_mu`, boundary data to half-space field.
pub struct PoissonOp {
    pub kernel: SymbolKernel,
    pub mu: Option<Complex64>,
    pub normal: Arc<NormalGrid>,
    pub factor: f64,
}

impl LinearOp for PoissonOp {
    fn apply(&self, x: &Field) -> Result<Field> {
        let out = apply_poisson(&self.kernel, self.mu, boundary_input(x, "a Poisson operator")?, &self.normal)?;
        Ok(Field::HalfSpace(out.scaled(Complex64::new(self.factor, 0.0))))
    }

    fn label(&self) -> String {
        format!("K[{}](mu={:?})", self.kernel.name, self.mu)
    }
}

/// Probe inputs: single lattice modes, Gaussian bumps at 3 widths and
/// modulated Gaussians at 8 lattice modulations.
pub fn probe_dictionary(grid: &Arc<TangentialGrid>) -> Vec<BoundaryField> {
    let n = grid.points_per_dim() as i64;
    let dim = grid.dim();
    let len = grid.length();
    let mut out = Vec::new();
    for k in -n / 2..n / 2 {
        let mut m = vec![0i64; dim];
        m[0] = k;
        out.push(BoundaryField::mode(grid.clone(), &m).expect("mode on grid"));
        if dim == 2 && k != 0 {
            out.push(BoundaryField::mode(grid.clone(), &[0, k]).expect("mode on grid"));
            out.push(BoundaryField::mode(grid.clone(), &[k, k]).expect("mode on grid"));
        }
    }
    let center = 0.5 * len;
    let gaussian = move |width: f64, x: &[f64]| -> f64 {
        let r2: f64 = x.iter().map(|xi| (xi - center).powi(2)).sum();
        (-0.5 * r2 / (width * width)).exp()
    };
    for width in [len / 4.0, len / 16.0, len / 64.0] {
        out.push(BoundaryField::from_fn(grid.clone(), |x| Complex64::new(gaussian(width, x), 0.0)));
    }
    let mut modulations: Vec<i64> = (0..8).map(|j| 1i64 << j).filter(|&m| m < n / 2).collect();
    let mut extra = 3;
    while modulations.len() < 8 && extra < n / 2 {
        if !modulations.contains(&extra) {
            modulations.push(extra);
        }
        extra += 2;
    }
    let w = len / 16.0;
    for m in modulations {
        let freq = 2.0 * std::f64::consts::PI * m as f64 / len;
        out.push(BoundaryField::from_fn(grid.clone(), |x| Complex64::from_polar(gaussian(w, x), freq * x[0])));
    }
    out
}

/// Empirical lower bound for the R-bound of a family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RBoundEstimate {
    pub value: f64,
    pub stderr: f64,
    pub trials: usize,
    pub restarts: usize,
    pub p: f64,
    pub in_norm: NormSpec,
    pub out_norm: NormSpec,
    pub seed: u64,
    /// Best ratio over single operators and single inputs (exact, no sampling).
    pub singleton: f64,
}

/// Search parameters of [`rbound_lower`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RBoundSearch {
    pub p: f64,
    pub trials: usize,
    pub restarts: usize,
    /// Largest number of terms in a random Rademacher sum.
    pub max_terms: usize,
}

impl Default for RBoundSearch {
    fn default() -> Self {
        Self { p: 2.0, trials: 200, restarts: 16, max_terms: 8 }
    }
}

/// `max ||sum eps_j T_j x_j||_{L^p(Y)} / ||sum eps_j x_j||_{L^p(X)}` over singletons
/// and `restarts` random selections of operators (with repetition) and inputs.
pub fn rbound_lower(
    ops: &[OpHandle],
    inputs: &[Field],
    search: &RBoundSearch,
    in_norm: &NormSpec,
    out_norm: &NormSpec,
    sampler: &RademacherSampler,
) -> Result<RBoundEstimate> {
    if ops.is_empty() {
        return param("operator family is empty");
    }
    if inputs.is_empty() {
        return param("input dictionary is empty");
    }
    check_grids(inputs)?;
    in_norm.validate()?;
    out_norm.validate()?;
    let in_norms: Vec<f64> = inputs.iter().map(|x| in_norm.eval(x)).collect::<Result<_>>()?;
    // every T_j x_i, computed once
    let images: Vec<Vec<Field>> = ops
        .par_iter()
        .map(|op| inputs.iter().map(|x| op.apply(x)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let mut singleton = 0.0f64;
    for row in &images {
        for (y, nx) in row.iter().zip(&in_norms) {
            if *nx > 0.0 {
                singleton = singleton.max(out_norm.eval(y)? / nx);
            }
        }
    }
    let mut best = Estimate { value: singleton, stderr: 0.0, trials: 0, exact: true };
    let restarts: Vec<Result<Option<Estimate>>> = (0..search.restarts)
        .into_par_iter()
        .map(|r| {
            let mut s = sampler.split(1_000_000 + r as u64);
            let terms = 2 + s.below(search.max_terms.max(2) - 1);
            let mut xs = Vec::with_capacity(terms);
            let mut ys = Vec::with_capacity(terms);
            for _ in 0..terms {
                let (j, i) = (s.below(ops.len()), s.below(inputs.len()));
                let c = Complex64::from_polar(0.1 + 0.9 * s.uniform(), 0.0);
                xs.push(inputs[i].with_samples(inputs[i].samples().iter().map(|z| z * c).collect()));
                let y = &images[j][i];
                ys.push(y.with_samples(y.samples().iter().map(|z| z * c).collect()));
            }
            let stream = s.split(r as u64);
            let den = eps_p_norm(&xs, search.p, in_norm, search.trials, &stream)?;
            let num = eps_p_norm(&ys, search.p, out_norm, search.trials, &stream)?;
            if den.value <= 0.0 {
                return Ok(None);
            }
            let value = num.value / den.value;
            let stderr = value * ((num.stderr / num.value.max(f64::MIN_POSITIVE)).powi(2) + (den.stderr / den.value).powi(2)).sqrt();
            Ok(Some(Estimate { value, stderr, trials: search.trials, exact: num.exact && den.exact }))
        })
        .collect();
    for r in restarts {
        if let Some(e) = r? {
            if e.value > best.value {
                best = e;
            }
        }
    }
    Ok(RBoundEstimate {
        value: best.value,
        stderr: best.stderr,
        trials: search.trials,
        restarts: search.restarts,
        p: search.p,
        in_norm: *in_norm,
        out_norm: *out_norm,
        seed: sampler.seed(),
        singleton,
    })
}

/// Abscissa of a log-log fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Abscissa {
    /// `log <mu> = log (1 + |mu|^2)^{1/2}`.
    #[default]
    Bracket,
    /// `log |mu|`.
    Modulus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub abs_mu: f64,
    pub arg_mu: f64,
    pub norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub residual: f64,
}

/// Least-squares slope of `log norm` against the chosen abscissa, with the RMS fit error.
pub fn decay_fit(rows: &[ScanRow], abscissa: Abscissa) -> Result<DecayFit> {
    if rows.len() < 5 {
        return param(format!("a decay fit needs at least 5 rows, got {}", rows.len()));
    }
    if rows.iter().any(|r| !(r.norm > 0.0) || !r.norm.is_finite()) {
        return param("decay fit requires positive finite norms");
    }
    let xs: Vec<f64> = rows
        .iter()
        .map(|r| match abscissa {
            Abscissa::Bracket => bracket2(0.0, r.abs_mu).ln(),
            Abscissa::Modulus => r.abs_mu.ln(),
        })
        .collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.norm.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return param("decay fit needs at least two distinct |mu|");
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let residual = (xs.iter().zip(&ys).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum::<f64>() / n).sqrt();
    Ok(DecayFit { slope, residual })
}

/// A `|mu|`-scan with its fitted decay rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub rows: Vec<ScanRow>,
    pub slope: f64,
    pub residual: f64,
    pub abscissa: Abscissa,
    pub seed: u64,
    pub metadata: serde_json::Value,
}

impl ScanResult {
    /// Validates ray ordering and fits the slope.
    pub fn new(rows: Vec<ScanRow>, abscissa: Abscissa, seed: u64, metadata: serde_json::Value) -> Result<Self> {
        for w in rows.windows(2) {
            if w[0].arg_mu == w[1].arg_mu && !(w[1].abs_mu > w[0].abs_mu) {
                return param("|mu| must increase strictly along each ray");
            }
        }
        let fit = decay_fit(&rows, abscissa)?;
        Ok(Self { rows, slope: fit.slope, residual: fit.residual, abscissa, seed, metadata })
    }

    /// CSV with the metadata as `#` header lines and the fit as a footer.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# version: {VERSION}");
        let _ = writeln!(s, "# schema_version: {SCHEMA_VERSION}");
        let _ = writeln!(s, "# config: {}", self.metadata);
        let _ = writeln!(s, "abs_mu,arg_mu,norm,slope,residual,seed");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{},{},{}", r.abs_mu, r.arg_mu, r.norm, self.slope, self.residual, self.seed);
        }
        let _ = writeln!(s, "# slope: {}", self.slope);
        let _ = writeln!(s, "# residual: {}", self.residual);
        s
    }

    /// One JSON object per row.
    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            let rec = serde_json::json!({
                "schema_version": SCHEMA_VERSION,
                "version": VERSION,
                "abs_mu": r.abs_mu,
                "arg_mu": r.arg_mu,
                "norm": r.norm,
                "slope": self.slope,
                "residual": self.residual,
                "seed": self.seed,
                "config": self.metadata,
            });
            let _ = writeln!(s, "{rec}");
        }
        s
    }
}
