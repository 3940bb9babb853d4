//! Run configurations. Flags build a config, a `--config` file is merged over
//! it, and the merged object is deserialized strictly (unknown keys rejected).

use std::path::Path;

use halfspace::dynbc::Variant;
use halfspace::experiments::{KppLatticeSpec, MuScan, NormalNorm};
use halfspace::rbound::RBoundSearch;
use halfspace::symbols::{KernelKind, KppParams, ProbeSpec, DEFAULT_THETA};
use halfspace::GridConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub kernel: String,
    /// Overrides the catalog kind of the kernel.
    pub class: Option<KernelKind>,
    pub max_order: usize,
    pub theta: f64,
    pub kpp: KppParams,
    pub probe: ProbeSpec,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            kernel: "heat".into(),
            class: None,
            max_order: 2,
            theta: DEFAULT_THETA,
            kpp: KppParams::default(),
            probe: ProbeSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanKind {
    Opnorm,
    Rbound,
    Resolvent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    pub kind: ScanKind,
    pub kernel: String,
    pub problem: String,
    pub theta: f64,
    pub kpp: KppParams,
    pub mu: MuScan,
    pub grid: GridConfig,
    /// Sobolev indices of `opnorm_hilbert`.
    pub s: f64,
    pub t: f64,
    /// R-bound scan: target exponent, normal norm, loss in the prefactor `<mu>^{1/p - loss}`.
    pub p: f64,
    pub normal_norm: NormalNorm,
    pub loss: f64,
    pub spread: Vec<f64>,
    pub batch_rays: Vec<f64>,
    pub search: RBoundSearch,
    pub seed: u64,
    /// Repeat on the refined grid and require no upward trend.
    pub refine: bool,
    pub expect_slope: Option<f64>,
    pub slope_tolerance: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            kind: ScanKind::Opnorm,
            kernel: "heat".into(),
            problem: "heat-dynbc".into(),
            theta: DEFAULT_THETA,
            kpp: KppParams::default(),
            mu: MuScan::default(),
            grid: GridConfig::default(),
            s: 0.0,
            t: 0.0,
            p: 2.0,
            normal_norm: NormalNorm::Weak,
            loss: 0.0,
            spread: vec![1.0, 1.5, 2.25],
            batch_rays: vec![0.0, -0.35, 0.35],
            search: RBoundSearch::default(),
            seed: 1,
            refine: false,
            expect_slope: None,
            slope_tolerance: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveConfig {
    pub problem: String,
    pub mu: f64,
    pub mu_arg: f64,
    pub theta: f64,
    pub kpp: KppParams,
    /// `const`, `zero`, `gauss` or `mode:<k>`.
    pub g: String,
    pub grid: GridConfig,
    pub evolve: bool,
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            problem: "heat-dynbc".into(),
            mu: 1.0,
            mu_arg: 0.0,
            theta: DEFAULT_THETA,
            kpp: KppParams::default(),
            g: "const".into(),
            grid: GridConfig::default(),
            evolve: false,
            dt: 0.01,
            t_end: 1.0,
        }
    }
}

impl SolveConfig {
    pub fn variant(&self) -> Result<Variant, CliError> {
        match self.problem.as_str() {
            "heat-dynbc" => Ok(Variant::HeatDynbc),
            "ch" => Ok(Variant::Ch),
            "kpp" => Ok(Variant::Kpp(self.kpp)),
            other => Err(CliError::Usage(format!("unknown problem '{other}' (heat-dynbc, ch, kpp)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LemmaConfig {
    /// A single evaluation when all three are given, the full lattice otherwise.
    pub a: Option<f64>,
    pub rho: Option<f64>,
    pub t: Option<f64>,
    pub s_max: f64,
    pub search_points: usize,
    pub kpp_lattice: KppLatticeSpec,
}

impl Default for LemmaConfig {
    fn default() -> Self {
        Self { a: None, rho: None, t: None, s_max: 1e4, search_points: 100_000, kpp_lattice: KppLatticeSpec::default() }
    }
}

/// Fully resolved configuration, echoed into every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum RunConfig {
    VerifySymbol(VerifyConfig),
    Scan(ScanConfig),
    Solve(SolveConfig),
    Lemma(LemmaConfig),
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

/// Merges the JSON file at `path` over `from_flags`.
pub fn resolve(from_flags: RunConfig, path: Option<&Path>) -> Result<RunConfig, CliError> {
    let Some(path) = path else {
        return Ok(from_flags);
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let file: Value = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    if !file.is_object() {
        return Err(CliError::Usage(format!("{}: expected a JSON object", path.display())));
    }
    let mut base = serde_json::to_value(&from_flags).expect("configs serialize");
    let command = base["command"].clone();
    if let Some(c) = file.get("command") {
        if *c != command {
            return Err(CliError::Usage(format!("config file is for command {c}, not {command}")));
        }
    }
    merge(&mut base, file);
    serde_json::from_value(base).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}
