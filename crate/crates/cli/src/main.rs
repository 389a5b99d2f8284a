use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{ArgGroup, Args, Parser, Subcommand};
use estc_core::engine::verify_projectors;
use estc_core::lattice::{index_of, point_of, LatticePoint};
use estc_core::observables::Quadratures;
use estc_core::schedule::{
    model_spec, points_in_region, verify_separation, CycleData, Region, Schedule, EMBEDDED_CHECKSUM,
};
use estc_core::solution_file;
use estc_cli::config::{ModelChoice, RunConfig};
use estc_cli::pipeline::{self, ResumeOutcome};
use estc_cli::report::{self, csv_float, round_sig};
use estc_cli::{exit_code, ConfigError, VerificationFailed};
use serde_json::json;

#[derive(Parser)]
#[command(name = "estc", version, about = "Exact fundamental solutions of truncated plane-wave Dirac systems")]
struct Cli {
    /// Worker threads for parallel stages (defaults to the config value, then all cores).
    #[arg(long, global = true, env = "ESTC_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert between lattice points and global indices.
    Index(IndexArgs),
    /// Inspect the fractal lattice schedule and the p-models.
    Schedule(ScheduleArgs),
    /// Solve a model and write the solution table.
    Solve(SolveArgs),
    /// Check a solution table (or a fresh solve) against the tolerances.
    Verify(VerifyArgs),
    /// Evaluate U_E, U_D, R and mean values of a stored solution.
    Observe(ObserveArgs),
    /// Best-amplitude R_min over a range of q4.
    Scan(ScanArgs),
    /// Run the full pipeline into an output directory.
    Run(RunArgs),
    /// Redo the observe stage of a previous run, or everything if the config changed.
    Resume(ResumeArgs),
}

#[derive(Args)]
#[command(group(ArgGroup::new("mode").required(true).args(["point", "index", "dump"])))]
struct IndexArgs {
    /// Point as n1,n2,n3,n4.
    #[arg(long, allow_hyphen_values = true)]
    point: Option<String>,
    /// Global index.
    #[arg(long)]
    index: Option<i64>,
    /// Print `i,n1,n2,n3,n4` for every i below N.
    #[arg(long, value_name = "N")]
    dump: Option<i64>,
}

#[derive(Args)]
#[command(group(ArgGroup::new("mode").required(true).args(["dump_lattices", "model", "verify"])))]
struct ScheduleArgs {
    /// CSV of every first-cycle lattice: u, k, stage, phase, center, periods.
    #[arg(long)]
    dump_lattices: bool,
    /// CSV of the sites of the p-model with family and global index.
    #[arg(long, value_name = "P")]
    model: Option<u8>,
    /// Check the embedded tables and the separation rules.
    #[arg(long)]
    verify: bool,
}

#[derive(Args)]
struct ModelArgs {
    /// p-model level 0..=3 (overrides the config).
    #[arg(long, value_name = "P")]
    model: Option<u8>,
    /// Explicit family list, e.g. 0,1,2,3 (overrides the config).
    #[arg(long, value_name = "K,...")]
    k_list: Option<String>,
}

#[derive(Args)]
struct SolveArgs {
    /// Run configuration (JSON), or a bare field configuration.
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    /// Solution file to write.
    #[arg(long)]
    out: PathBuf,
    /// Drop projector vectors after solving; skips the projector check.
    #[arg(long)]
    compact: bool,
    /// Keep equations whose rank drops below 4 instead of failing.
    #[arg(long)]
    allow_rank_deficient: bool,
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["solution", "config"])))]
struct VerifyArgs {
    /// Stored solution: residual exactness and dual-path U_D.
    #[arg(long)]
    solution: Option<PathBuf>,
    /// Re-solve from this config and also check the projector algebra.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args)]
struct AmplitudeArgs {
    /// Amplitude as re,im,re,im,re,im,re,im.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "best")]
    a0: Option<String>,
    /// Use the amplitude minimizing R.
    #[arg(long)]
    best: bool,
    /// Grid points per axis for the quadrature cross-check of U_E.
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Args)]
struct ObserveArgs {
    /// Solution file written by `solve` or `run`.
    #[arg(long)]
    solution: PathBuf,
    #[command(flatten)]
    amplitude: AmplitudeArgs,
    /// Random amplitudes probed against the best-amplitude bound.
    #[arg(long)]
    probes: Option<usize>,
    /// Seed for the random probes.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct ScanArgs {
    /// Run configuration (JSON), or a bare field configuration.
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    /// Range as from:to:step (inclusive).
    #[arg(long, allow_hyphen_values = true)]
    q4: String,
    /// Keep equations whose rank drops below 4 instead of failing.
    #[arg(long)]
    allow_rank_deficient: bool,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration (JSON), or a bare field configuration.
    #[arg(long)]
    config: PathBuf,
    /// Directory for the solution, reports and manifest (overrides the config).
    #[arg(long, env = "ESTC_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ResumeArgs {
    /// Directory of a previous `run`.
    #[arg(long, env = "ESTC_OUTPUT_DIR")]
    output_dir: PathBuf,
    /// New configuration; defaults to the one recorded in the manifest.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    amplitude: AmplitudeArgs,
    /// New seed for the random probes.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(estc_cli::EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let threads = cli.threads;
    match cli.command {
        Command::Index(a) => index(a),
        Command::Schedule(a) => schedule(a),
        Command::Solve(a) => {
            let cfg = load_config(&a.config, &a.model, a.allow_rank_deficient)?;
            with_threads(threads.or(cfg.threads), || solve(&cfg, &a))
        }
        Command::Verify(a) => verify(a, threads),
        Command::Observe(a) => with_threads(threads, || observe(a)),
        Command::Scan(a) => {
            let cfg = load_config(&a.config, &a.model, a.allow_rank_deficient)?;
            with_threads(threads.or(cfg.threads), || scan(&cfg, &a))
        }
        Command::Run(a) => {
            let cfg = RunConfig::load(&a.config)?;
            let dir = a
                .output_dir
                .or_else(|| cfg.output_dir.clone())
                .ok_or_else(|| ConfigError("no output directory (use --output-dir)".into()))?;
            with_threads(threads.or(cfg.threads), || {
                let manifest = pipeline::run_pipeline(&cfg, &dir)?;
                report::print_json(&serde_json::to_value(&manifest)?)
            })
        }
        Command::Resume(a) => resume(a, threads),
    }
}

fn with_threads<T>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T>
where
    T: Send,
{
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            bail!(ConfigError("threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    builder.build()?.install(f)
}

fn load_config(path: &Path, model: &ModelArgs, allow_rank_deficient: bool) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(m) = ModelChoice::from_args(model.model, model.k_list.as_deref())? {
        cfg.model = m;
    }
    cfg.allow_rank_deficient |= allow_rank_deficient;
    cfg.validate()?;
    Ok(cfg)
}

fn parse_point(text: &str) -> Result<LatticePoint> {
    let v = text
        .split(',')
        .map(|s| s.trim().parse::<i64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| ConfigError(format!("bad point `{text}`: {e}")))?;
    let [a, b, c, d] = v[..] else {
        bail!(ConfigError(format!("point `{text}` needs four components")));
    };
    LatticePoint::new(a, b, c, d).map_err(|e| ConfigError(e.to_string()).into())
}

fn parse_amplitude(text: &str) -> Result<[[f64; 2]; 4]> {
    let v = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| ConfigError(format!("bad --a0 `{text}`: {e}")))?;
    if v.len() != 8 || v.iter().any(|x| !x.is_finite()) {
        bail!(ConfigError("--a0 needs eight finite numbers re,im x 4".into()));
    }
    Ok(std::array::from_fn(|i| [v[2 * i], v[2 * i + 1]]))
}

fn index(a: IndexArgs) -> Result<()> {
    let mut out = std::io::stdout().lock();
    if let Some(p) = a.point {
        writeln!(out, "{}", index_of(parse_point(&p)?)?)?;
    } else if let Some(i) = a.index {
        let p = point_of(i).map_err(|e| ConfigError(e.to_string()))?;
        let [n1, n2, n3, n4] = p.0;
        writeln!(out, "{n1},{n2},{n3},{n4}")?;
    } else if let Some(n) = a.dump {
        writeln!(out, "i,n1,n2,n3,n4")?;
        for i in 0..n.max(0) {
            let [n1, n2, n3, n4] = point_of(i)?.0;
            writeln!(out, "{i},{n1},{n2},{n3},{n4}")?;
        }
    }
    Ok(())
}

fn schedule(a: ScheduleArgs) -> Result<()> {
    let mut out = std::io::stdout().lock();
    if a.verify {
        let data = CycleData::embedded();
        let checksum = data.checksum();
        let tables_ok = data.validate().is_ok();
        let s = Schedule::build_cycle1()?;
        let limit = Region::new([-9; 4], [10; 4])?;
        let sep = verify_separation(&s.lattices()[..14], &limit);
        let f0: Vec<LatticePoint> =
            s.family(0).iter().flat_map(|l| points_in_region(l, &limit)).collect();
        let f0_close = f0
            .iter()
            .enumerate()
            .flat_map(|(i, a)| f0[i + 1..].iter().map(move |b| (*a - *b).g4d()))
            .filter(|&d| d <= 2)
            .count();
        let counts: Vec<usize> = s.stage_counts().iter().map(|(_, n)| *n).collect();
        let value = json!({
            "checksum": format!("{checksum:#018x}"),
            "expected_checksum": format!("{EMBEDDED_CHECKSUM:#018x}"),
            "tables_ok": tables_ok,
            "lattices": s.lattices().len(),
            "stage_counts": counts,
            "separation": {
                "limit": [limit.lower, limit.upper],
                "lattices_checked": 14,
                "points_checked": sep.points_checked,
                "pairs_within_2": sep.pairs_within_2,
                "violations": sep.violations.len(),
                "f0_pairs_within_2": f0_close,
            },
        });
        report::print_json(&value)?;
        if !tables_ok || !sep.is_clean() || f0_close > 0 {
            bail!(VerificationFailed("schedule checks reported violations".into()));
        }
        return Ok(());
    }
    let s = Schedule::build_cycle1()?;
    if a.dump_lattices {
        writeln!(out, "u,k,stage,phase,c1,c2,c3,c4,p1,p2,p3,p4")?;
        for l in s.lattices() {
            let [c1, c2, c3, c4] = l.center.0;
            let [p1, p2, p3, p4] = l.periods;
            writeln!(
                out,
                "{},{},{},{},{c1},{c2},{c3},{c4},{p1},{p2},{p3},{p4}",
                l.u,
                l.family(),
                l.stage,
                l.phase
            )?;
        }
    } else if let Some(p) = a.model {
        let m = model_spec(&s, p).map_err(|e| ConfigError(e.to_string()))?;
        writeln!(out, "k,i,n1,n2,n3,n4")?;
        for (k, n) in m.equations() {
            let [n1, n2, n3, n4] = n.0;
            writeln!(out, "{k},{},{n1},{n2},{n3},{n4}", index_of(n)?)?;
        }
    }
    Ok(())
}

fn solve(cfg: &RunConfig, a: &SolveArgs) -> Result<()> {
    let (_, model) = pipeline::build_model(cfg)?;
    let solution = pipeline::solve(cfg, &model)?;
    solution_file::save(&a.out, &solution.table)?;
    let mut summary = json!({
        "model": model.name,
        "out": a.out,
        "table_entries": solution.table.len(),
        "clusters": pipeline::cluster_summary(&solution.stats, model.equation_count()),
        "projector": null,
    });
    let mut failed = None;
    if !a.compact {
        let p = verify_projectors(&solution)?;
        if !(p.max_defect() <= cfg.tolerances.projector) {
            failed = Some(format!("projector defect {:e}", p.max_defect()));
        }
        summary["projector"] = report::rounded(&p)?;
    }
    report::print_json(&summary)?;
    match failed {
        Some(msg) => Err(VerificationFailed(msg).into()),
        None => Ok(()),
    }
}

fn verify(a: VerifyArgs, threads: Option<usize>) -> Result<()> {
    let choice = ModelChoice::from_args(a.model.model, a.model.k_list.as_deref())?;
    if let Some(path) = &a.config {
        let cfg = load_config(path, &a.model, false)?;
        return with_threads(threads.or(cfg.threads), || {
            let (_, model) = pipeline::build_model(&cfg)?;
            let solution = pipeline::solve(&cfg, &model)?;
            let p = verify_projectors(&solution)?;
            let v = pipeline::verify(&solution.table, Some(&model), Some(&p), &cfg.tolerances)?;
            report::print_json(&v.report)?;
            v.into_result().map(|_| ())
        });
    }
    let path = a.solution.expect("clap requires one source");
    with_threads(threads, || {
        let table = solution_file::load(&path)?;
        let schedule = Schedule::build_cycle1()?;
        let choice = match choice {
            Some(c) => Some(c),
            None => infer_model(&table.model_name),
        };
        let model = choice.map(|c| c.build(&schedule)).transpose()?;
        let v = pipeline::verify(&table, model.as_ref(), None, &Default::default())?;
        report::print_json(&v.report)?;
        v.into_result().map(|_| ())
    })
}

/// Recognizes the names given to the standard p-models.
fn infer_model(name: &str) -> Option<ModelChoice> {
    let p = name.strip_suffix("-model")?.parse::<u8>().ok()?;
    Some(ModelChoice::Level { p })
}

fn observe(a: ObserveArgs) -> Result<()> {
    let table = solution_file::load(&a.solution)?;
    let opts = estc_cli::ObserveConfig {
        a0: a.amplitude.a0.as_deref().map(parse_amplitude).transpose()?,
        grid: a.amplitude.grid,
        probes: a.probes,
    };
    report::print_json(&pipeline::observe(&table, &opts, a.seed)?)
}

fn parse_range(text: &str) -> Result<Vec<f64>> {
    let v = text
        .split(':')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| ConfigError(format!("bad range `{text}`: {e}")))?;
    let [from, to, step] = v[..] else {
        bail!(ConfigError(format!("range `{text}` must be from:to:step")));
    };
    if !(step > 0.0) || !from.is_finite() || !to.is_finite() || to < from {
        bail!(ConfigError(format!("range `{text}` needs from <= to and step > 0")));
    }
    let n = ((to - from) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| from + i as f64 * step).collect())
}

fn scan(cfg: &RunConfig, a: &ScanArgs) -> Result<()> {
    let q4s = parse_range(&a.q4)?;
    let (_, model) = pipeline::build_model(cfg)?;
    let mut csv = String::from("q4,R_min\n");
    for q4 in q4s {
        let field = cfg.field.with_q4(q4);
        let solution = estc_core::run_model(&field, &model, &cfg.engine_options())
            .with_context(|| format!("q4 = {q4}"))?;
        let r_min = match Quadratures::of(&solution.table).best_amplitude() {
            Ok(b) => b.r_min,
            Err(_) => f64::NAN,
        };
        csv.push_str(&format!("{},{}\n", csv_float(round_sig(q4)), csv_float(r_min)));
    }
    match &a.out {
        Some(path) => std::fs::write(path, csv).with_context(|| format!("writing {}", path.display())),
        None => Ok(std::io::stdout().lock().write_all(csv.as_bytes())?),
    }
}

fn resume(a: ResumeArgs, threads: Option<usize>) -> Result<()> {
    let mut cfg = match &a.config {
        Some(path) => RunConfig::load(path)?,
        None => pipeline::Manifest::load(&a.output_dir)?.config,
    };
    if let Some(text) = &a.amplitude.a0 {
        cfg.observe.a0 = Some(parse_amplitude(text)?);
    }
    if a.amplitude.best {
        cfg.observe.a0 = None;
    }
    if a.amplitude.grid.is_some() {
        cfg.observe.grid = a.amplitude.grid;
    }
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    with_threads(threads.or(cfg.threads), || {
        let (manifest, outcome) = pipeline::resume(&a.output_dir, &cfg)?;
        let mut value = serde_json::to_value(&manifest)?;
        value["resume"] = json!(match outcome {
            ResumeOutcome::ObserveOnly => "observe-only",
            ResumeOutcome::FullRecompute => "full-recompute",
        });
        report::print_json(&value)
    })
}
