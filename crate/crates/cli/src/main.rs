//! `oqrw`: command-line front end for open quantum random walk models.
//!
//! Exit codes: 0 on success, 1 when the model or computation is rejected,
//! 2 on malformed command lines.

mod args;
mod report;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use oqrw_core::commuting::{self, BirthDeathSpec};
use oqrw_core::ergodicity::{self, WeakErgodicity};
use oqrw_core::hitting::{hitting_probabilities, mean_hitting_times};
use oqrw_core::linalg::{self, CMat};
use oqrw_core::model::{self, BirthDeathDocument, Model, PairDocument};
use oqrw_core::potential::{self, CostSpec};
use oqrw_core::trajectory::{self, TrajectoryState};
use oqrw_core::{channel, Execution, SolveOptions, Walk};
use serde_json::{json, Value};

use args::{parse_labels, parse_site_map, UsageError};
use report::{matrix_json, Table};

#[derive(Parser)]
#[command(name = "oqrw", version, about = "Open quantum random walks: channels, ergodicity, trajectories and hitting problems")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Result format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    output: Format,
    /// Write the result to `<dir>/<subcommand>.<ext>` instead of standard output.
    #[arg(long, global = true, env = "OQRW_OUTPUT_DIR")]
    out_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a model file, then print a summary.
    Validate {
        #[arg(long)]
        model: PathBuf,
        /// Also print the model re-emitted in canonical form.
        #[arg(long)]
        emit: bool,
    },
    /// Matrix representation of the induced channel.
    Rep {
        #[arg(long)]
        model: PathBuf,
        /// Representation of the adjoint channel instead.
        #[arg(long)]
        adjoint: bool,
    },
    /// Singular spectrum and ergodicity decision for one or more unital models.
    Ergodicity {
        /// Repeat to test a family of QTMs sharing their shape.
        #[arg(long, required = true)]
        model: Vec<PathBuf>,
        /// Also search `n0 <= N` for a contracting power (Dobrushin estimate).
        #[arg(long, value_name = "N")]
        weak: Option<usize>,
        /// Random pure states added to the basis pairs in the Dobrushin estimate.
        #[arg(long, default_value_t = 64)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Monte Carlo first-visit histogram from quantum trajectories.
    Simulate {
        #[command(flatten)]
        start: Start,
        #[arg(long, allow_hyphen_values = true)]
        targets: String,
        #[arg(long)]
        horizon: usize,
        #[arg(long, default_value_t = 10_000)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Add the exact first-visit masses from the monitored evolution.
        #[arg(long)]
        exact: bool,
        /// Run on one thread.
        #[arg(long)]
        sequential: bool,
    },
    /// Hitting probabilities (or mean hitting times) of a target set.
    Hit {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        targets: String,
        /// Density used to evaluate every site; defaults to I/k.
        #[arg(long)]
        density: Option<String>,
        /// Expected hitting times instead of probabilities.
        #[arg(long)]
        mean: bool,
        #[command(flatten)]
        solver: Solver,
    },
    /// Closed-form ruin probability for a homogeneous commuting pair.
    Gambler {
        #[arg(long)]
        pair: PathBuf,
        #[arg(long)]
        start: u64,
        #[arg(long)]
        density: Option<String>,
    },
    /// Ruin probability for a site-dependent commuting birth-and-death walk.
    Birthdeath {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        start: u64,
        #[arg(long)]
        density: Option<String>,
    },
    /// Site distribution (or first-visit probability) of a commuting walk at time n.
    WalkProb {
        #[arg(long)]
        pair: PathBuf,
        #[arg(long)]
        time: u64,
        #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
        start: i64,
        #[arg(long)]
        density: Option<String>,
        /// First visit to this site at time n, for a walk started at 0.
        #[arg(long, allow_hyphen_values = true)]
        first_visit: Option<i64>,
    },
    /// Minimal potential with running cost on D and boundary values on ∂D.
    Potential {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        interior: String,
        #[arg(long, allow_hyphen_values = true)]
        boundary: String,
        /// Cost per interior site: a number for all sites or a JSON map {"site": c}.
        #[arg(long, default_value = "0")]
        cost: String,
        /// Boundary values: a number for all sites or a JSON map {"site": f}.
        #[arg(long, default_value = "1")]
        boundary_values: String,
        #[arg(long)]
        density: Option<String>,
        #[command(flatten)]
        solver: Solver,
    },
}

#[derive(Args)]
struct Start {
    #[arg(long)]
    model: PathBuf,
    /// Starting site label.
    #[arg(long, allow_hyphen_values = true)]
    start: i64,
    /// Starting density; defaults to I/k.
    #[arg(long)]
    density: Option<String>,
}

#[derive(Args)]
struct Solver {
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long, default_value_t = 1_000_000)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e12)]
    cap: f64,
}

impl Solver {
    fn options(&self) -> SolveOptions {
        SolveOptions { tol: self.tol, max_iter: self.max_iter, cap: self.cap }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_model(path: &Path) -> Result<Model> {
    model::parse_model(&read(path)?).with_context(|| format!("invalid model {}", path.display()))
}

/// Inline JSON matrix, or `@path` to read one from a file.
fn density(spec: Option<&str>, k: usize) -> Result<CMat> {
    let Some(text) = spec else {
        return Ok(linalg::identity(k) / linalg::re(k as f64));
    };
    let text = match text.strip_prefix('@') {
        Some(path) => read(Path::new(path))?,
        None => text.to_string(),
    };
    let rho = model::parse_matrix("density", &text).context("invalid density")?;
    if rho.nrows() != k || rho.ncols() != k {
        bail!("density must be {k}x{k}, got {}x{}", rho.nrows(), rho.ncols());
    }
    Ok(rho)
}

fn load_pair(path: &Path) -> Result<commuting::CommutingPair> {
    let doc: PairDocument = serde_json::from_str(&read(path)?).with_context(|| format!("invalid pair {}", path.display()))?;
    let (l, r) = doc.matrices()?;
    Ok(commuting::diagonalize_pair(&l, &r)?)
}

fn model_kind(m: &Model) -> &'static str {
    match m {
        Model::Qtm(_) => "qtm",
        Model::Window(_) => "window",
    }
}

fn run(cli: &Cli) -> Result<(String, Table)> {
    let name = match &cli.command {
        Command::Validate { .. } => "validate",
        Command::Rep { .. } => "rep",
        Command::Ergodicity { .. } => "ergodicity",
        Command::Simulate { .. } => "simulate",
        Command::Hit { .. } => "hit",
        Command::Gambler { .. } => "gambler",
        Command::Birthdeath { .. } => "birthdeath",
        Command::WalkProb { .. } => "walk-prob",
        Command::Potential { .. } => "potential",
    };
    let table = match &cli.command {
        Command::Validate { model, emit } => validate(model, *emit)?,
        Command::Rep { model, adjoint } => rep(model, *adjoint)?,
        Command::Ergodicity { model, weak, samples, seed } => ergodicity_cmd(model, *weak, *samples, *seed)?,
        Command::Simulate { start, targets, horizon, count, seed, exact, sequential } => {
            let exec = if *sequential { Execution::Sequential } else { Execution::Parallel };
            simulate(start, targets, *horizon, *count, *seed, *exact, exec)?
        }
        Command::Hit { model, targets, density, mean, solver } => hit(model, targets, density.as_deref(), *mean, solver)?,
        Command::Gambler { pair, start, density: d } => {
            let pair = load_pair(pair)?;
            if *start == 0 {
                return Err(UsageError("--start must be at least 1".into()).into());
            }
            let rho = density(d.as_deref(), pair.dim())?;
            let w = pair.weights(&rho)?;
            let modes = commuting::gambler_mode_probabilities(&pair, *start);
            let value = commuting::gambler_ruin(&pair, &rho, *start)?;
            modes_table(value, &w.weights, &w.lambda, &w.mu, &modes)
        }
        Command::Birthdeath { spec, start, density: d } => {
            let doc: BirthDeathDocument =
                serde_json::from_str(&read(spec)?).with_context(|| format!("invalid spec {}", spec.display()))?;
            let spec = BirthDeathSpec::from_matrices(&doc.matrices()?)?;
            if *start == 0 {
                return Err(UsageError("--start must be at least 1".into()).into());
            }
            let rho = density(d.as_deref(), spec.dim())?;
            let weights = spec.weights(&rho)?;
            let modes: Vec<f64> =
                (0..spec.dim()).map(|u| spec.mode_probability(u, *start)).collect::<oqrw_core::Result<_>>()?;
            let value = commuting::birth_death(&spec, &rho, *start)?;
            let mut t = Table::new(&["mode", "weight", "probability"]);
            for (u, (w, p)) in weights.iter().zip(&modes).enumerate() {
                t.push(vec![json!(u + 1), json!(w), json!(p)]);
            }
            t.summary = json!({ "probability": value, "start": start });
            t
        }
        Command::WalkProb { pair, time, start, density: d, first_visit } => {
            let pair = load_pair(pair)?;
            let rho = density(d.as_deref(), pair.dim())?;
            let mut t = Table::new(&["site", "probability"]);
            match first_visit {
                Some(x) => {
                    let p = commuting::first_visit_probability(&pair, &rho, *start, *x, *time)?;
                    t.push(vec![json!(x), json!(p)]);
                    t.summary = json!({ "time": time, "first_visit": x, "probability": p });
                }
                None => {
                    let n = *time as i64;
                    let mut total = 0.0;
                    for x in (start - n..=start + n).step_by(2) {
                        let p = commuting::site_probability(&pair, &rho, *start, x, *time)?;
                        total += p;
                        t.push(vec![json!(x), json!(p)]);
                    }
                    t.summary = json!({ "time": time, "start": start, "total": total });
                }
            }
            t
        }
        Command::Potential { model, interior, boundary, cost, boundary_values, density: d, solver } => {
            potential_cmd(model, interior, boundary, cost, boundary_values, d.as_deref(), solver)?
        }
    };
    Ok((name.to_string(), table))
}

fn modes_table(value: f64, weights: &[f64], lambda: &[f64], mu: &[f64], modes: &[f64]) -> Table {
    let mut t = Table::new(&["mode", "weight", "lambda", "mu", "probability"]);
    for u in 0..weights.len() {
        t.push(vec![json!(u + 1), json!(weights[u]), json!(lambda[u]), json!(mu[u]), json!(modes[u])]);
    }
    t.summary = json!({ "probability": value });
    t
}

fn validate(path: &Path, emit: bool) -> Result<Table> {
    let m = load_model(path)?;
    let q = m.qtm();
    let labels = m.labels();
    let mut t = Table::new(&["field", "value"]);
    let mut summary = json!({
        "kind": model_kind(&m),
        "sites": q.sites(),
        "internal_dim": q.dim(),
        "blocks": q.block_count(),
        "unital": q.is_unital(),
        "first_label": labels.first(),
        "last_label": labels.last(),
    });
    for key in ["kind", "sites", "internal_dim", "blocks", "unital", "first_label", "last_label"] {
        t.push(vec![json!(key), summary[key].clone()]);
    }
    if emit {
        let doc: Value = serde_json::from_str(&model::emit_qtm(q))?;
        summary["model"] = doc;
    }
    t.summary = summary;
    Ok(t)
}

fn rep(path: &Path, adjoint: bool) -> Result<Table> {
    let m = load_model(path)?;
    let kraus = channel::site_kraus(m.qtm());
    let rep = if adjoint { channel::adjoint_representation(&kraus) } else { channel::matrix_representation(&kraus) };
    let mat = rep.matrix();
    let mut t = Table::new(&["row", "col", "re", "im"]);
    for r in 0..mat.nrows() {
        for col in 0..mat.ncols() {
            let z = mat[(r, col)];
            if z.norm() > 0.0 {
                t.push(vec![json!(r + 1), json!(col + 1), json!(z.re), json!(z.im)]);
            }
        }
    }
    t.summary = json!({
        "order": rep.order(),
        "sites": rep.sites(),
        "internal_dim": rep.dim(),
        "adjoint": adjoint,
        "matrix": matrix_json(mat),
    });
    Ok(t)
}

fn ergodicity_cmd(paths: &[PathBuf], weak: Option<usize>, samples: usize, seed: u64) -> Result<Table> {
    let mut family = Vec::with_capacity(paths.len());
    for p in paths {
        family.push(load_model(p)?.qtm().clone());
    }
    let mut t = Table::new(&["model", "sigma", "multiplicity"]);
    let mut spectra = Vec::new();
    for (j, q) in family.iter().enumerate() {
        let spec = ergodicity::singular_values(&q.channel_matrix())?;
        let groups = spec.multiplicities(1e-9);
        for (v, m) in &groups {
            t.push(vec![json!(j + 1), json!(v), json!(m)]);
        }
        spectra.push(json!({
            "sigma1": spec.sigma1(),
            "sigma2": spec.sigma2(),
            "groups": groups.iter().map(|(v, m)| json!({ "sigma": v, "multiplicity": m })).collect::<Vec<_>>(),
        }));
    }
    let mut summary = json!({ "spectra": spectra });
    if family.iter().all(|q| q.is_unital()) {
        summary["report"] = serde_json::to_value(ergodicity::is_ergodic(&family)?)?;
    } else {
        summary["report"] = json!({ "decision": "not_unital" });
    }
    if let Some(n_max) = weak {
        let checks: Vec<WeakErgodicity> = family
            .iter()
            .map(|q| ergodicity::weak_ergodicity_check(q, n_max, samples, seed, Execution::Parallel))
            .collect();
        summary["weak"] = serde_json::to_value(checks)?;
    }
    t.summary = summary;
    Ok(t)
}

fn simulate(
    start: &Start,
    targets: &str,
    horizon: usize,
    count: usize,
    seed: u64,
    exact: bool,
    exec: Execution,
) -> Result<Table> {
    let m = load_model(&start.model)?;
    let targets = parse_labels(targets)?;
    let rho = density(start.density.as_deref(), m.dim())?;
    let init = TrajectoryState::new(start.start, rho.clone())?;
    let hist = trajectory::run_trajectories(&m, &init, &targets, horizon, count, seed, exec)?;
    let exact_masses = if exact {
        let mut b = vec![0.0; horizon + 1];
        if targets.contains(&start.start) {
            b[0] = 1.0;
        } else {
            let mon = trajectory::monitored_from_site(&m, start.start, rho, &targets, horizon)?;
            b[1..].copy_from_slice(&mon.first_visit);
        }
        Some(b)
    } else {
        None
    };
    let mut cols = vec!["step", "count", "frequency", "wilson_lo", "wilson_hi"];
    if exact {
        cols.push("exact");
    }
    let mut t = Table::new(&cols);
    let freqs = hist.frequencies();
    for (r, iv) in hist.intervals(1.96).iter().enumerate() {
        let mut row = vec![json!(r), json!(hist.counts[r]), json!(freqs[r]), json!(iv.lo), json!(iv.hi)];
        if let Some(b) = &exact_masses {
            row.push(json!(b[r]));
        }
        t.push(row);
    }
    t.summary = json!({
        "trajectories": hist.trajectories,
        "censored": hist.censored,
        "seed": seed,
        "targets": targets,
        "start": start.start,
    });
    Ok(t)
}

fn hit(path: &Path, targets: &str, d: Option<&str>, mean: bool, solver: &Solver) -> Result<Table> {
    let m = load_model(path)?;
    let targets = parse_labels(targets)?;
    let rho = density(d, m.dim())?;
    let opts = solver.options();
    let mut t;
    if mean {
        let k = mean_hitting_times(&m, &targets, &opts)?;
        t = Table::new(&["site", "divergent", "value"]);
        for &x in &k.labels {
            let div = k.is_divergent(x)?;
            let v = if div { Value::Null } else { json!(k.evaluate(x, &rho)?) };
            t.push(vec![json!(x), json!(div), v]);
        }
        t.summary = json!({ "quantity": "mean_hitting_time", "iterations": k.iterations, "residual": k.residual });
    } else {
        let h = hitting_probabilities(&m, &targets, &opts)?;
        t = Table::new(&["site", "value", "min_probability"]);
        for &x in &h.labels {
            t.push(vec![json!(x), json!(h.evaluate(x, &rho)?), json!(h.min_probability(x)?)]);
        }
        t.summary = json!({ "quantity": "hitting_probability", "iterations": h.iterations, "residual": h.residual });
    }
    t.summary["targets"] = json!(targets);
    Ok(t)
}

fn potential_cmd(
    path: &Path,
    interior: &str,
    boundary: &str,
    cost: &str,
    boundary_values: &str,
    d: Option<&str>,
    solver: &Solver,
) -> Result<Table> {
    let m = load_model(path)?;
    let interior = parse_labels(interior)?;
    let boundary = parse_labels(boundary)?;
    let cost: BTreeMap<i64, f64> = parse_site_map("--cost", cost, &interior)?;
    let values: BTreeMap<i64, f64> = parse_site_map("--boundary-values", boundary_values, &boundary)?;
    let spec = CostSpec::new(interior, boundary, cost, values)?;
    let rho = density(d, m.dim())?;
    let opts = solver.options();
    let g = potential::solve_potential(&m, &spec, &opts)?;
    let unique = potential::uniqueness_report(&m, &spec, &opts)?;
    let norms = g.norms();
    let mut t = Table::new(&["site", "divergent", "value", "norm"]);
    for (i, &x) in g.labels.iter().enumerate() {
        let v = if g.divergent[i] { Value::Null } else { json!(g.evaluate(x, &rho)?) };
        let n = if norms[i].is_finite() { json!(norms[i]) } else { Value::Null };
        t.push(vec![json!(x), json!(g.divergent[i]), v, n]);
    }
    t.summary = json!({
        "iterations": g.iterations,
        "residual": g.residual,
        "laplacian_residual": potential::laplacian_residual(&m, &spec, &g)?,
        "uniqueness": unique,
    });
    Ok(t)
}

fn emit(cli: &Cli, name: &str, table: &Table) -> Result<()> {
    let text = match cli.common.output {
        Format::Json => table.to_json()?,
        Format::Csv => table.to_csv()?,
    };
    match &cli.common.out_dir {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
            let ext = if cli.common.output == Format::Json { "json" } else { "csv" };
            let path = dir.join(format!("{name}.{ext}"));
            fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli).and_then(|(name, table)| emit(&cli, &name, &table)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
