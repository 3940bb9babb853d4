use std::fs;
use std::path::{Path, PathBuf};

use halfspace::dynbc::{implicit_euler_evolve, DynBCProblem, ResolventOutput, StepRecord};
use halfspace::experiments::{kpp_lattice, lemma_max_lattice, lemma_max_scan, opnorm_scan, rbound_scan, resolvent_scan, RBoundScan};
use halfspace::rbound::{ScanResult, SCHEMA_VERSION, VERSION};
use halfspace::symbols::{certify_seminorms, char_lp_bound, default_char_quadrature, kernel_by_name, lemma_max_eval, KernelKind, REFINEMENT_TOLERANCE, KERNEL_NAMES};
use halfspace::{make_grids, BoundaryField, HalfSpaceField};
use num_complex::Complex64;
use serde_json::{json, Value};

use crate::config::{LemmaConfig, RunConfig, ScanConfig, ScanKind, SolveConfig, VerifyConfig};
use crate::CliError;

/// Smallest accepted `|mu|`.
pub const MU_FLOOR: f64 = 1e-6;
const RESIDUAL_ANALYTIC: f64 = 1e-8;
const RESIDUAL_GRID: f64 = 1e-3;
const LEMMA_REL_ERR: f64 = 1e-6;

/// Result of a command: whether the numerical claims held.
pub type Outcome = Result<bool, CliError>;

fn write(out: &Path, name: &str, text: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    let path = out.join(name);
    fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}

fn header(config: &RunConfig) -> Value {
    json!({ "schema_version": SCHEMA_VERSION, "version": VERSION, "config": config })
}

pub fn run(config: &RunConfig, out: Option<&Path>) -> Outcome {
    match config {
        RunConfig::VerifySymbol(c) => verify_symbol(c, config, out),
        RunConfig::Scan(c) => scan(c, config, out),
        RunConfig::Solve(c) => solve(c, config, out),
        RunConfig::Lemma(c) => lemma(c, config, out),
    }
}

fn verify_symbol(c: &VerifyConfig, config: &RunConfig, out: Option<&Path>) -> Outcome {
    let mut k = kernel_by_name(&c.kernel, c.kpp, c.theta)
        .ok_or_else(|| CliError::Usage(format!("unknown kernel '{}' (known: {})", c.kernel, KERNEL_NAMES.join(", "))))?;
    if let Some(class) = c.class {
        k.kind = class;
    }
    let certs = certify_seminorms(&k, c.max_order, &c.probe)?;
    println!("kernel {} ({:?}, order {})", k.name, k.kind, k.order);
    println!("{:>3} {:>14} {:>14} {:>10}  status", "N", "coarse", "refined", "ratio");
    for cert in &certs {
        let status = if cert.is_stable() { "stable" } else { "DIVERGENT" };
        println!("{:>3} {:>14.6e} {:>14.6e} {:>10.4}  {status}", cert.n, cert.coarse, cert.refined, cert.ratio);
    }
    let pass = certs.iter().all(|cert| cert.is_stable());
    let char_bound = if k.kind == KernelKind::Strong {
        let b = char_lp_bound(&k, 2.0, 0, 0, &[0], &c.probe, &default_char_quadrature())?;
        println!("L^2 characterization bound (l = l' = 0): {b:.6e}");
        Some(b)
    } else {
        None
    };
    println!("{} (refinement tolerance {REFINEMENT_TOLERANCE})", if pass { "PASS" } else { "FAIL" });
    if let Some(out) = out {
        let mut rec = header(config);
        rec["seminorms"] = json!(certs);
        rec["char_l2_bound"] = json!(char_bound);
        rec["pass"] = json!(pass);
        write(out, "verify.json", &format!("{rec}\n"))?;
    }
    Ok(pass)
}

fn scan_once(c: &ScanConfig, grid: halfspace::GridConfig) -> Result<ScanResult, CliError> {
    Ok(match c.kind {
        ScanKind::Opnorm => {
            let k = kernel_by_name(&c.kernel, c.kpp, c.theta).ok_or_else(|| CliError::Usage(format!("unknown kernel '{}'", c.kernel)))?;
            opnorm_scan(&k, &c.mu, &grid, c.s, c.t)?
        }
        ScanKind::Rbound => {
            let k = kernel_by_name(&c.kernel, c.kpp, c.theta).ok_or_else(|| CliError::Usage(format!("unknown kernel '{}'", c.kernel)))?;
            let cfg = RBoundScan {
                p: c.p,
                normal_norm: c.normal_norm,
                loss: c.loss,
                centres: c.mu.clone(),
                spread: c.spread.clone(),
                batch_rays: c.batch_rays.clone(),
                grid,
                search: c.search,
                seed: c.seed,
            };
            rbound_scan(&k, &cfg)?
        }
        ScanKind::Resolvent => {
            let solve = SolveConfig { problem: c.problem.clone(), kpp: c.kpp, ..SolveConfig::default() };
            resolvent_scan(solve.variant()?, c.theta, &c.mu, &grid)?
        }
    })
}

fn with_config(mut r: ScanResult, config: &RunConfig) -> ScanResult {
    r.metadata = json!({ "run": config, "scan": r.metadata });
    r
}

fn scan(c: &ScanConfig, config: &RunConfig, out: Option<&Path>) -> Outcome {
    let result = with_config(scan_once(c, c.grid)?, config);
    println!("slope {:.6} (residual {:.3e}, {} rows)", result.slope, result.residual, result.rows.len());
    let mut pass = true;
    if let Some(target) = c.expect_slope {
        let ok = (result.slope - target).abs() <= c.slope_tolerance;
        println!("expected slope {target} +- {}: {}", c.slope_tolerance, if ok { "PASS" } else { "FAIL" });
        pass &= ok;
    }
    let out = out.unwrap_or(Path::new("."));
    write(out, "scan.csv", &result.to_csv())?;
    write(out, "scan.jsonl", &result.to_jsonl())?;
    if c.refine {
        let fine = with_config(scan_once(c, c.grid.refined())?, config);
        let worst = result.rows.iter().zip(&fine.rows).map(|(a, b)| b.norm / a.norm).fold(0.0, f64::max);
        let ok = worst < 1.0 + REFINEMENT_TOLERANCE;
        println!("refined slope {:.6}, largest refined/coarse ratio {worst:.4}: {}", fine.slope, if ok { "PASS" } else { "FAIL" });
        pass &= ok;
        write(out, "scan_refined.csv", &fine.to_csv())?;
        write(out, "scan_refined.jsonl", &fine.to_jsonl())?;
    }
    Ok(pass)
}

fn boundary_datum(spec: &str, grid: &std::sync::Arc<halfspace::TangentialGrid>) -> Result<BoundaryField, CliError> {
    let len = grid.length();
    Ok(match spec {
        "const" => BoundaryField::from_fn(grid.clone(), |_| Complex64::new(1.0, 0.0)),
        "zero" => BoundaryField::zeros(grid.clone()),
        "gauss" => BoundaryField::from_fn(grid.clone(), |x| {
            let r2: f64 = x.iter().map(|xi| (xi - 0.5 * len).powi(2)).sum();
            Complex64::new((-r2 * 8.0 / (len * len)).exp(), 0.0)
        }),
        other => {
            let k = other
                .strip_prefix("mode:")
                .and_then(|k| k.parse::<i64>().ok())
                .ok_or_else(|| CliError::Usage(format!("unknown boundary datum '{other}' (const, zero, gauss, mode:<k>)")))?;
            let mut modes = vec![0; grid.dim()];
            modes[0] = k;
            BoundaryField::mode(grid.clone(), &modes)?
        }
    })
}

fn parts(samples: &[Complex64]) -> Value {
    json!({ "re": samples.iter().map(|z| z.re).collect::<Vec<_>>(), "im": samples.iter().map(|z| z.im).collect::<Vec<_>>() })
}

fn solve(c: &SolveConfig, config: &RunConfig, out: Option<&Path>) -> Outcome {
    let variant = c.variant()?;
    let (tg, ng) = make_grids(&c.grid)?;
    let problem = DynBCProblem::new(variant, c.theta, tg.clone(), ng.clone())?;
    let g = boundary_datum(&c.g, &tg)?;
    let out = out.unwrap_or(Path::new("."));
    if c.evolve {
        let u0 = HalfSpaceField::zeros(tg.clone(), ng);
        let v0 = BoundaryField::zeros(tg);
        let forcing = move |_: f64| g.clone();
        let tr = implicit_euler_evolve(&problem, None, Some(&forcing), &u0, &v0, c.dt, c.t_end)?;
        let mut text = format!("{}\n", {
            let mut h = header(config);
            h["record"] = json!("config");
            h
        });
        for r in &tr.records {
            text.push_str(&format!("{}\n", step_record(r)));
        }
        write(out, "trajectory.jsonl", &text)?;
        let pass = tr.records.iter().all(|r| r.residual <= RESIDUAL_ANALYTIC && r.residual_fd <= RESIDUAL_GRID);
        if let Some(last) = tr.records.last() {
            println!(
                "{} steps to t = {}: boundary norm {:.6e}, interior norm {:.6e}, last increment {:.3e}",
                tr.records.len(),
                last.t,
                last.boundary_norm,
                last.interior_norm,
                last.increment
            );
        }
        println!("residuals {}", if pass { "PASS" } else { "FAIL" });
        return Ok(pass);
    }
    let mu = Complex64::from_polar(c.mu, c.mu_arg);
    if !(mu.norm() >= MU_FLOOR) {
        return Err(CliError::Usage(format!("|mu| = {} is below {MU_FLOOR}; the resolvent divides by mu^2", mu.norm())));
    }
    let sol = problem.resolvent(None, &g, mu)?;
    report_resolvent(&sol);
    let pass = sol.diagnostics.max_analytic() <= RESIDUAL_ANALYTIC && sol.diagnostics.max_grid() <= RESIDUAL_GRID;
    let mut rec = header(config);
    rec["diagnostics"] = json!(sol.diagnostics);
    rec["v"] = parts(&sol.v.samples);
    rec["u"] = sol.u.as_ref().map_or(Value::Null, |u| parts(&u.samples));
    rec["pass"] = json!(pass);
    write(out, "resolvent.json", &format!("{rec}\n"))?;
    println!("residuals {}", if pass { "PASS" } else { "FAIL" });
    Ok(pass)
}

fn step_record(r: &StepRecord) -> Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "record": "step",
        "t": r.t,
        "boundary_norm": r.boundary_norm,
        "interior_norm": r.interior_norm,
        "increment": r.increment,
        "residual": r.residual,
        "residual_fd": r.residual_fd,
    })
}

fn report_resolvent(sol: &ResolventOutput) {
    let (lo, hi) = sol.v.samples.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), z| (lo.min(z.norm()), hi.max(z.norm())));
    let mean = sol.v.samples.iter().sum::<Complex64>() / sol.v.samples.len() as f64;
    println!("v: mean {:.12} {:+.12}i, |v| in [{lo:.6e}, {hi:.6e}]", mean.re, mean.im);
    if let Some(u) = &sol.u {
        let trace = u.trace();
        let mean = trace.samples.iter().sum::<Complex64>() / trace.samples.len() as f64;
        println!("trace of u: mean {:.12} {:+.12}i", mean.re, mean.im);
    }
    for r in &sol.diagnostics.residuals {
        println!("residual {:<22} {:.3e}{}", r.line, r.max, if r.grid { " (grid)" } else { "" });
    }
}

fn lemma(c: &LemmaConfig, config: &RunConfig, out: Option<&Path>) -> Outcome {
    if let (Some(a), Some(rho), Some(t)) = (c.a, c.rho, c.t) {
        let closed = lemma_max_eval(a, rho, t)?;
        let rows = lemma_max_scan(&[(a, rho, t)], c.s_max, c.search_points)?;
        let pass = rows[0].rel_err <= LEMMA_REL_ERR;
        println!("closed form {closed:.15e}, search {:.15e}, relative error {:.3e}", rows[0].brute, rows[0].rel_err);
        if let Some(out) = out {
            let mut rec = header(config);
            rec["rows"] = json!(rows);
            write(out, "lemma.json", &format!("{rec}\n"))?;
        }
        return Ok(pass);
    }
    if c.a.is_some() || c.rho.is_some() || c.t.is_some() {
        return Err(CliError::Usage("give all of a, rho, t for a single evaluation, or none for the lattice".into()));
    }
    let rows = lemma_max_scan(&lemma_max_lattice(), c.s_max, c.search_points)?;
    let worst = rows.iter().map(|r| r.rel_err).fold(0.0, f64::max);
    let max_ok = worst <= LEMMA_REL_ERR;
    println!("max lemma: {} tuples, largest relative error {worst:.3e}: {}", rows.len(), if max_ok { "PASS" } else { "FAIL" });
    let coarse = kpp_lattice(&c.kpp_lattice)?;
    let fine = kpp_lattice(&c.kpp_lattice.refined())?;
    let change = |a: f64, b: f64| (b / a - 1.0).abs();
    let stable = change(coarse.sup_m1, fine.sup_m1) < REFINEMENT_TOLERANCE && change(coarse.sup_m2, fine.sup_m2) < REFINEMENT_TOLERANCE;
    let gap = fine.min_gap > 0.0 && coarse.min_gap > 0.0;
    let ends = fine.m1_small <= 0.01 * fine.sup_m1 && fine.m1_large <= 0.01 * fine.sup_m1;
    println!(
        "road-field multipliers: sup|m1| {:.6} -> {:.6}, sup|m2| {:.6} -> {:.6}, min|f-k| {:.3e}, |m1| at 1e-3 {:.3e}, at 1e3 {:.3e}",
        coarse.sup_m1, fine.sup_m1, coarse.sup_m2, fine.sup_m2, fine.min_gap, fine.m1_small, fine.m1_large
    );
    let kpp_ok = stable && gap && ends;
    println!("road-field lattice: {}", if kpp_ok { "PASS" } else { "FAIL" });
    if let Some(out) = out {
        let mut rec = header(config);
        rec["rows"] = json!(rows);
        rec["kpp"] = json!({ "coarse": coarse, "refined": fine });
        write(out, "lemma.json", &format!("{rec}\n"))?;
    }
    Ok(max_ok && kpp_ok)
}
