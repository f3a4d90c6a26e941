//! `ncpt`: build models from JSON, run single computations or the full
//! property suite, and write machine-readable reports.
//!
//! Exit codes: 0 when every checked property holds, 1 when one fails (the
//! failing properties are named on stderr), 2 on bad input.

mod output;

/// `println!` that ignores a closed stdout.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use ncpt_core::carre_du_champ::{gamma, gamma_via_derivation, CdCFunctional};
use ncpt_core::deny::{deny_embedding_check, deny_inequality_check, deny_samples, saturation_gap, DEFAULT_DELTA_GRID};
use ncpt_core::io::{element_json, element_matrix_json, load_functional, parse_element, ModelBundle};
use ncpt_core::models::CND_TS;
use ncpt_core::multipliers::{check_multiplier_bound, multiplier_norm};
use ncpt_core::potential::{energy_content, is_potential, potential_of, FiniteEnergyFunctional};
use ncpt_core::report::trial_rng;
use ncpt_core::sampling;
use ncpt_core::suite::{run_suite, SuiteConfig};
use ncpt_core::derive_seed;

use output::{write_atomic, write_json};

#[derive(Parser)]
#[command(name = "ncpt", version, about = "Potential theory checks for Dirichlet forms on finite tracial algebras")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print dimension, trace weights, the length table and the CND test.
    ModelInfo { model: PathBuf },
    /// Potential, energy content and norm of a functional.
    Potential(FunctionalArgs),
    /// Deny embedding and regularized inequality for a functional.
    Deny {
        #[command(flatten)]
        f: FunctionalArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Decreasing δ grid.
        #[arg(long, value_delimiter = ',')]
        grid_delta: Option<Vec<f64>>,
    },
    /// Carré du champ density of an element, by both routes when a cocycle is available.
    Gamma {
        model: PathBuf,
        /// Element as a JSON list of `[re, im]` basis coefficients; random when omitted.
        #[arg(long)]
        element: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact multiplier norm of the potential of a functional against its bound.
    MultNorm {
        #[command(flatten)]
        f: FunctionalArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run every property check described by a config file.
    Suite {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        /// Tolerance override, `property=value`; repeatable.
        #[arg(long, value_parser = parse_tol)]
        tol: Vec<(String, f64)>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        grid_t: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        grid_eps: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        grid_delta: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        grid_lambda: Option<Vec<f64>>,
    },
}

#[derive(Args)]
struct FunctionalArgs {
    model: PathBuf,
    /// Functional file (`{"density": …}` or `{"pd_coeffs": …}`).
    #[arg(long, conflicts_with_all = ["trivial_character", "zero"])]
    functional: Option<PathBuf>,
    /// Use the state `λ_s ↦ 1` of an untwisted group algebra.
    #[arg(long, conflicts_with = "zero")]
    trivial_character: bool,
    #[arg(long)]
    zero: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
}

fn parse_tol(s: &str) -> std::result::Result<(String, f64), String> {
    let (name, value) = s.split_once('=').ok_or_else(|| format!("expected property=value, got {s:?}"))?;
    let v: f64 = value.parse().map_err(|e| format!("bad tolerance {value:?}: {e}"))?;
    Ok((name.to_string(), v))
}

/// Names of failed properties; empty means success.
type Failures = Vec<String>;

fn load_model(path: &Path) -> Result<ModelBundle> {
    ModelBundle::load(path).with_context(|| format!("loading model {}", path.display()))
}

fn functional(bundle: &ModelBundle, f: &FunctionalArgs) -> Result<FiniteEnergyFunctional> {
    if let Some(p) = &f.functional {
        return load_functional(p, &bundle.model).with_context(|| format!("loading functional {}", p.display()));
    }
    if f.trivial_character {
        return Ok(FiniteEnergyFunctional::trivial_character(&bundle.model)?);
    }
    if f.zero {
        return Ok(FiniteEnergyFunctional::zero(&bundle.model));
    }
    Ok(FiniteEnergyFunctional::trace(&bundle.model))
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    say!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn model_info(path: &Path) -> Result<Failures> {
    let b = load_model(path)?;
    let model = &b.model;
    say!("dimension: {}", model.dim());
    say!("representation dimension: {}", model.rep_dim());
    let trace: Vec<f64> = model.trace_vector().iter().map(|c| c.re).collect();
    say!("trace weights: {trace:?}");
    let mut failures = Vec::new();
    if let Some(group) = model.group() {
        say!("orders: {:?}", group.orders());
        match group.spec().twist {
            Some((p, q)) => say!("twist: ({p}, {q})"),
            None => say!("twist: none"),
        }
    }
    if let (Some(ell), Some(group)) = (&b.length, model.group()) {
        say!("ℓ = {:?}", ell.values.iter().map(|v| round(*v)).collect::<Vec<_>>());
        let cnd = ell.cnd_test(group, &CND_TS);
        for (t, m) in cnd.ts.iter().zip(&cnd.min_fourier) {
            say!("cnd t = {t}: min Fourier coefficient {m:.3e}");
        }
        say!("cnd: {}", if cnd.pass { "pass" } else { "FAIL" });
        if !cnd.pass {
            failures.push("cnd".into());
        }
    } else {
        say!("generator eigenvalues: {:?}", b.generator.eigenvalues().iter().map(|v| round(*v)).collect::<Vec<_>>());
    }
    say!("derivation: {}", if b.has_derivation() { "available" } else { "unavailable" });
    Ok(failures)
}

/// Rounds away last-bit noise for display only.
fn round(v: f64) -> f64 {
    let r = (v * 1e12).round() / 1e12;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn potential_cmd(f: &FunctionalArgs) -> Result<Failures> {
    let b = load_model(&f.model)?;
    let omega = functional(&b, f)?;
    let gen = &b.generator;
    let g = potential_of(gen, &omega);
    let cert = is_potential(gen, g.vector());
    let report = json!({
        "potential": element_json(g.vector()),
        "energy_content": energy_content(gen, &omega),
        "operator_norm": g.operator_norm(),
        "is_potential": cert.is_potential,
        "min_eigenvalue": cert.min_eigenvalue,
    });
    print_json(&report)?;
    if let Some(dir) = &f.out {
        write_json(&dir.join("potential.json"), &report)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["label", "re", "im"])?;
        for (label, c) in b.model.labels().iter().zip(g.vector().coeffs().iter()) {
            w.write_record([label.clone(), c.re.to_string(), c.im.to_string()])?;
        }
        write_atomic(&dir.join("potential.csv"), &w.into_inner()?)?;
    }
    Ok(if cert.is_potential { vec![] } else { vec!["potential_positivity".into()] })
}

fn deny_cmd(f: &FunctionalArgs, run: &RunArgs, grid: &Option<Vec<f64>>) -> Result<Failures> {
    let b = load_model(&f.model)?;
    let omega = functional(&b, f)?;
    let gen = &b.generator;
    let mut deltas = grid.clone().unwrap_or_else(|| DEFAULT_DELTA_GRID.to_vec());
    deltas.sort_by(|a, x| x.total_cmp(a));
    let emb = deny_embedding_check(gen, &omega, run.trials, run.seed);
    let g = potential_of(gen, &omega);
    let ineq = deny_inequality_check(gen, &omega, g.vector(), &deltas)?;
    let (gap, raw_gap) = saturation_gap(gen, &omega, &deltas)?;
    let report = json!({
        "embedding": emb,
        "inequality_at_potential": ineq,
        "saturation_gap": gap,
        "saturation_gap_smallest_delta": raw_gap,
    });
    print_json(&report)?;
    if let Some(dir) = &f.out {
        write_json(&dir.join("deny.json"), &report)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in deny_samples(gen, &omega, run.trials, run.seed) {
            w.serialize(row)?;
        }
        write_atomic(&dir.join("deny_samples.csv"), &w.into_inner()?)?;
    }
    let mut failures = Vec::new();
    if !emb.pass {
        failures.push("deny_embedding".into());
    }
    if !ineq.pass || (omega.mass() > 0.0 && gap > 1e-6) {
        failures.push("deny_inequality".into());
    }
    Ok(failures)
}

fn gamma_cmd(model: &Path, element: &Option<String>, seed: u64, out: &Option<PathBuf>) -> Result<Failures> {
    let b = load_model(model)?;
    let a = match element {
        Some(text) => parse_element(&b.model, text).context("parsing --element")?,
        None => sampling::random_element(&b.model, &mut trial_rng(derive_seed(seed, "gamma"), 0)),
    };
    let g1 = gamma(&b.generator, &a)?;
    let density = |c: &CdCFunctional| element_json(c.density());
    let mut report = json!({
        "element": element_json(&a),
        "density": density(&g1),
        "density_matrix": element_matrix_json(g1.density()),
        "mass": g1.mass(),
        "energy": b.generator.energy(&a),
    });
    let mut failures = Vec::new();
    if let Ok(der) = b.derivation() {
        let g2 = gamma_via_derivation(der, &a)?;
        let residual = (g1.density() - g2.density()).norm2();
        report["derivation_density"] = json!(density(&g2));
        report["cross_route_residual"] = json!(residual);
        if residual > 1e-9 {
            failures.push("gamma_cross_route".into());
        }
    }
    if g1.density().real_part().min_eigenvalue()? < -1e-9 {
        failures.push("gamma_positivity".into());
    }
    print_json(&report)?;
    if let Some(dir) = out {
        write_json(&dir.join("gamma.json"), &report)?;
    }
    Ok(failures)
}

fn mult_norm_cmd(f: &FunctionalArgs, run: &RunArgs) -> Result<Failures> {
    let b = load_model(&f.model)?;
    let omega = functional(&b, f)?;
    let g = potential_of(&b.generator, &omega);
    let report = if run.trials > 0 {
        check_multiplier_bound(&b.generator, &g, run.trials, run.seed)?
    } else {
        multiplier_norm(&b.generator, g.vector())?
    };
    print_json(&report)?;
    if let Some(dir) = &f.out {
        write_json(&dir.join("mult_norm.json"), &report)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["left_norm", "right_norm", "norm_bound", "margin"])?;
        w.write_record([report.left_norm, report.right_norm, report.norm_bound, report.margin()].map(|v| v.to_string()))?;
        write_atomic(&dir.join("mult_norm.csv"), &w.into_inner()?)?;
    }
    Ok(if report.pass { vec![] } else { vec!["multiplier_bound".into()] })
}

#[allow(clippy::too_many_arguments)]
fn suite_cmd(
    config: &Path,
    seed: Option<u64>,
    trials: Option<usize>,
    tol: &[(String, f64)],
    out: &Option<PathBuf>,
    grids: [&Option<Vec<f64>>; 4],
) -> Result<Failures> {
    let mut cfg = SuiteConfig::load(config).with_context(|| format!("loading config {}", config.display()))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(t) = trials {
        cfg.trials = t;
    }
    for (name, v) in tol {
        cfg.tolerances.insert(name.clone(), *v);
    }
    let [t, e, d, l] = grids;
    for (slot, value) in [(&mut cfg.grid_t, t), (&mut cfg.grid_eps, e), (&mut cfg.grid_delta, d), (&mut cfg.grid_lambda, l)] {
        if value.is_some() {
            *slot = value.clone();
        }
    }
    if let Some(o) = out {
        cfg.out = Some(o.clone());
    }
    cfg.validate()?;
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("ncpt-report"));

    let bundle = load_model(&cfg.model_path)?;
    let extra = cfg
        .functionals
        .iter()
        .map(|p| load_functional(p, &bundle.model).with_context(|| format!("loading functional {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let started = Instant::now();
    let outcome = run_suite(&bundle, extra, &cfg)?;
    let elapsed = started.elapsed().as_secs_f64();

    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut summary = csv::Writer::from_writer(Vec::new());
    summary.write_record(["property", "samples", "max_violation", "seed", "pass"])?;
    for r in &outcome.reports {
        write_json(&dir.join(format!("{}.json", r.property)), r)?;
        summary.write_record([r.property.clone(), r.samples.to_string(), r.max_violation.to_string(), r.seed.to_string(), r.pass.to_string()])?;
        say!("{:<30} {}  max violation {:.3e}", r.property, if r.pass { "pass" } else { "FAIL" }, r.max_violation);
    }
    write_atomic(&dir.join("summary.csv"), &summary.into_inner()?)?;
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    write_json(
        &dir.join("metadata.json"),
        &json!({
            "config": cfg,
            "version": env!("CARGO_PKG_VERSION"),
            "unix_time": stamp,
            "elapsed_seconds": elapsed,
            "threads": rayon::current_num_threads(),
            "errors": outcome.errors,
        }),
    )?;
    for (p, e) in &outcome.errors {
        eprintln!("{p}: {e}");
    }
    say!("reports written to {}", dir.display());
    Ok(outcome.failed().into_iter().map(String::from).collect())
}

fn run(cli: Cli) -> Result<Failures> {
    match &cli.command {
        Command::ModelInfo { model } => model_info(model),
        Command::Potential(f) => potential_cmd(f),
        Command::Deny { f, run, grid_delta } => {
            if run.trials == 0 {
                bail!("trials must be at least 1");
            }
            deny_cmd(f, run, grid_delta)
        }
        Command::Gamma { model, element, seed, out } => gamma_cmd(model, element, *seed, out),
        Command::MultNorm { f, run } => mult_norm_cmd(f, run),
        Command::Suite { config, seed, trials, tol, out, grid_t, grid_eps, grid_delta, grid_lambda } => {
            suite_cmd(config, *seed, *trials, tol, out, [grid_t, grid_eps, grid_delta, grid_lambda])
        }
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("NCPT_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| anyhow!("NCPT_THREADS must be a positive integer, got {v:?}"))?;
        if n == 0 {
            bail!("NCPT_THREADS must be a positive integer");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {}", describe(&e));
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(failures) if failures.is_empty() => ExitCode::SUCCESS,
        Ok(failures) => {
            eprintln!("failed properties: {}", failures.join(", "));
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(2)
        }
    }
}

/// The error chain, skipping causes already quoted by the message above them.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !out.ends_with(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
    }
    out
}
