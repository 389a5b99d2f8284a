//! The run pipeline: schedule, solve, verify, observe, with a manifest of
//! digests that lets later invocations redo only the observe stage.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use estc_core::engine::{residual_map, verify_projectors, ClusterStats, ProjectorReport};
use estc_core::observables::{
    a_mean, energy_operator, grid_u_e, momentum_operator, BestAmplitude, Quadratures,
};
use estc_core::schedule::{ModelSpec, Schedule};
use estc_core::{solution_file, Bispinor, Solution, SolutionTable, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{ObserveConfig, RunConfig, Tolerances};
use crate::report::{self, round_sig};
use crate::{DigestMismatch, VerificationFailed};

pub const SOLUTION_FILE: &str = "solution.estc";
pub const CLUSTERS_FILE: &str = "clusters.csv";
pub const VERIFICATION_FILE: &str = "verification.json";
pub const OBSERVABLES_FILE: &str = "observables.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Files produced before the observe stage; resume requires them intact.
const UPSTREAM_FILES: [&str; 3] = [SOLUTION_FILE, CLUSTERS_FILE, VERIFICATION_FILE];

const DEFAULT_PROBES: usize = 8;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub core_version: String,
    pub config: RunConfig,
    pub threads: usize,
    /// Stages executed by the invocation that wrote this manifest.
    pub stages_run: Vec<String>,
    /// Wall-clock seconds per stage; kept from earlier runs for stages not redone.
    pub timings: BTreeMap<String, f64>,
    pub clusters: Value,
    pub verification: BTreeMap<String, f64>,
    pub verification_passed: bool,
    /// SHA-256 of every emitted file.
    pub files: BTreeMap<String, String>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    fn write(&self, dir: &Path) -> Result<()> {
        report::write_json(&dir.join(MANIFEST_FILE), &serde_json::to_value(self)?)
    }

    /// Checks the recorded digests of `names` against the files on disk.
    pub fn check_digests(&self, dir: &Path, names: &[&str]) -> Result<()> {
        for name in names {
            let expected = self
                .files
                .get(*name)
                .with_context(|| format!("manifest has no digest for {name}"))?;
            let path = dir.join(name);
            let actual = if path.exists() { report::sha256_file(&path)? } else { "missing".into() };
            if &actual != expected {
                return Err(DigestMismatch {
                    file: (*name).into(),
                    expected: expected.clone(),
                    actual,
                }
                .into());
            }
        }
        Ok(())
    }
}

/// Outcome of the verification stage.
#[derive(Clone, Debug)]
pub struct Verification {
    pub report: Value,
    pub maxima: BTreeMap<String, f64>,
    pub failures: Vec<String>,
}

impl Verification {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn into_result(self) -> Result<Self> {
        if self.passed() {
            Ok(self)
        } else {
            Err(VerificationFailed(self.failures.join("; ")).into())
        }
    }
}

fn relative_difference(a: &estc_core::SpinorBlock, b: &estc_core::SpinorBlock) -> f64 {
    let scale = a.frobenius_norm().max(b.frobenius_norm());
    if scale == 0.0 {
        0.0
    } else {
        (*a - *b).frobenius_norm() / scale
    }
}

/// Residual exactness on the model sites, the dual-path `U_D` check and,
/// when the projector vectors are available, the projector algebra.
pub fn verify(
    table: &SolutionTable,
    model: Option<&ModelSpec>,
    projectors: Option<&ProjectorReport>,
    tol: &Tolerances,
) -> Result<Verification> {
    let mut maxima = BTreeMap::new();
    let mut failures = Vec::new();
    let mut check = |name: &str, value: f64, limit: f64, failures: &mut Vec<String>| {
        maxima.insert(name.to_string(), round_sig(value));
        if !(value <= limit) {
            failures.push(format!("{name} = {value:e} exceeds {limit:e}"));
        }
    };

    let projector_json = match projectors {
        Some(p) => {
            check("projector_trace", p.max_trace_deviation, tol.projector, &mut failures);
            check("projector_idempotency", p.max_idempotency_defect, tol.projector, &mut failures);
            check("projector_overlap", p.max_pair_overlap, tol.projector, &mut failures);
            report::rounded(p)?
        }
        None => Value::Null,
    };

    let map = residual_map(&table.field, table)?;
    let residual_json = match model {
        Some(m) => {
            let on = map.max_relative(|n| m.contains_site(n));
            let off = map.max_relative(|n| !m.contains_site(n));
            check("residual_on_model", on, tol.residual, &mut failures);
            json!({
                "sites": map.len(),
                "max_relative_on_model": round_sig(on),
                "max_relative_off_model": round_sig(off),
            })
        }
        None => json!({ "sites": map.len(), "max_relative_on_model": null }),
    };

    // R^2 compares U_D against U_E, so a U_D lost in round-off is measured on U_E's scale.
    let closed = estc_core::observables::u_d(table);
    let gram = map.gram();
    let dual_relative = relative_difference(&closed, &gram);
    let ue_norm = estc_core::observables::u_e(table).frobenius_norm();
    let dual_vs_ue = if ue_norm > 0.0 {
        (closed - gram).frobenius_norm() / ue_norm
    } else {
        dual_relative
    };
    check("dual_path_u_d", dual_relative.min(dual_vs_ue), tol.dual_path, &mut failures);

    let report = json!({
        "model": table.model_name,
        "equations": model.map(|m| m.equation_count()),
        "table_entries": table.len(),
        "projector": projector_json,
        "residual": residual_json,
        "dual_path": {
            "relative_difference": round_sig(dual_relative),
            "difference_over_u_e": round_sig(dual_vs_ue),
        },
        "tolerances": report::rounded(tol)?,
        "failures": failures,
        "passed": failures.is_empty(),
    });
    Ok(Verification { report, maxima, failures })
}

pub fn cluster_summary(stats: &ClusterStats, equations: usize) -> Value {
    let count = |f: fn(usize) -> bool| stats.history.iter().filter(|e| f(e.clusters_joined)).count();
    json!({
        "equations": equations,
        "final_clusters": stats.final_clusters,
        "max_clusters": stats.max_clusters,
        "largest_clusters": stats.sizes.iter().take(10).collect::<Vec<_>>(),
        "opened": count(|j| j == 0),
        "extended": count(|j| j == 1),
        "bridged": count(|j| j >= 2),
        "stored_vectors": stats.stored_vectors,
        "stored_entries": stats.stored_entries,
    })
}

/// One CSV row per equation: how it changed the cluster structure.
pub fn cluster_csv(stats: &ClusterStats) -> String {
    let mut s = String::from("equation,k,clusters_joined,clusters_after\n");
    for e in &stats.history {
        writeln!(s, "{},{},{},{}", e.equation, e.k, e.clusters_joined, e.clusters_after).unwrap();
    }
    s
}

fn amplitude_from_pairs(pairs: &[[f64; 2]; 4]) -> Bispinor {
    pairs.map(|[re, im]| C64::new(re, im))
}

/// `U_E`, `U_D`, `R` and mean values for one amplitude, plus property probes.
pub fn observe(table: &SolutionTable, opts: &ObserveConfig, seed: u64) -> Result<Value> {
    let quad = Quadratures::of(table);
    let best: std::result::Result<BestAmplitude, estc_core::Error> = quad.best_amplitude();
    let (a0, source) = match (&opts.a0, &best) {
        (Some(pairs), _) => (amplitude_from_pairs(pairs), "given"),
        (None, Ok(b)) => (b.a0, "best"),
        (None, Err(e)) => return Err(anyhow::anyhow!("no amplitude given and {e}")),
    };
    let r = quad.accuracy(&a0)?;
    let cfg = &table.field;
    let energy = a_mean(table, energy_operator(cfg), &a0)?;
    let momentum = (0..3)
        .map(|k| a_mean(table, momentum_operator(cfg, k), &a0).map(report::complex))
        .collect::<estc_core::Result<Vec<_>>>()?;

    let best_json = match &best {
        Ok(b) => json!({
            "a0": report::bispinor(&b.a0),
            "r_min": round_sig(b.r_min),
            "u_e_rank": b.u_e_rank,
        }),
        Err(e) => json!({ "error": e.to_string() }),
    };

    let grid_json = match opts.grid {
        Some(n) => {
            let g = grid_u_e(table, n)?;
            json!({ "n": n, "u_e_relative_error": round_sig(relative_difference(&g, &quad.u_e)) })
        }
        None => Value::Null,
    };

    let probes_json = match &best {
        Ok(b) => probe(&quad, b, opts.probes.unwrap_or(DEFAULT_PROBES), seed),
        Err(_) => Value::Null,
    };

    Ok(json!({
        "model": table.model_name,
        "table_entries": table.len(),
        "u_e": report::block(&quad.u_e),
        "u_d": report::block(&quad.u_d),
        "a0": report::bispinor(&a0),
        "a0_source": source,
        "r": round_sig(r),
        "means": {
            "energy": report::complex(energy),
            "momentum": momentum,
        },
        "best": best_json,
        "grid": grid_json,
        "probes": probes_json,
    }))
}

/// Random amplitudes must not beat the best one, and `R` must be scale invariant.
fn probe(quad: &Quadratures, best: &BestAmplitude, count: usize, seed: u64) -> Value {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_r = f64::INFINITY;
    let mut max_scale_defect: f64 = 0.0;
    let mut evaluated = 0;
    for _ in 0..count {
        let a: Bispinor =
            std::array::from_fn(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let lambda = C64::new(rng.random_range(0.1..10.0), rng.random_range(-10.0..10.0));
        let (Ok(r), Ok(rs)) = (quad.accuracy(&a), quad.accuracy(&a.map(|z| z * lambda))) else {
            continue;
        };
        evaluated += 1;
        min_r = min_r.min(r);
        max_scale_defect = max_scale_defect.max((r - rs).abs());
    }
    let bound_holds = evaluated == 0 || min_r >= best.r_min * (1.0 - 1e-9) - 1e-12;
    json!({
        "seed": seed,
        "requested": count,
        "evaluated": evaluated,
        "min_r": if evaluated > 0 { json!(round_sig(min_r)) } else { Value::Null },
        "bound_holds": bound_holds,
        "max_scale_defect": round_sig(max_scale_defect),
    })
}

/// Builds the schedule and the configured model.
pub fn build_model(cfg: &RunConfig) -> Result<(Schedule, ModelSpec)> {
    let schedule = Schedule::build_cycle1()?;
    let model = cfg.model.build(&schedule)?;
    Ok((schedule, model))
}

pub fn solve(cfg: &RunConfig, model: &ModelSpec) -> Result<Solution> {
    Ok(estc_core::run_model(&cfg.field, model, &cfg.engine_options())?)
}

/// Runs every stage, writes all artifacts into `dir` and returns the manifest.
///
/// Reports and the manifest are written even when verification fails; the
/// failure is returned afterwards.
pub fn run_pipeline(cfg: &RunConfig, dir: &Path) -> Result<Manifest> {
    cfg.validate()?;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut timings = BTreeMap::new();
    let mut timed = |name: &str, start: Instant| {
        timings.insert(name.to_string(), round_sig(start.elapsed().as_secs_f64()));
    };

    let t = Instant::now();
    let (_, model) = build_model(cfg)?;
    timed("schedule", t);

    let t = Instant::now();
    let solution = solve(cfg, &model)?;
    timed("solve", t);

    let t = Instant::now();
    let projectors = verify_projectors(&solution)?;
    timed("verify_projectors", t);

    let t = Instant::now();
    let verification = verify(&solution.table, Some(&model), Some(&projectors), &cfg.tolerances)?;
    timed("residual", t);

    solution_file::save(dir.join(SOLUTION_FILE), &solution.table)?;
    std::fs::write(dir.join(CLUSTERS_FILE), cluster_csv(&solution.stats))?;
    report::write_json(&dir.join(VERIFICATION_FILE), &verification.report)?;

    let t = Instant::now();
    let observables = observe(&solution.table, &cfg.observe, cfg.seed)?;
    timed("observe", t);
    report::write_json(&dir.join(OBSERVABLES_FILE), &observables)?;

    let mut files = BTreeMap::new();
    for name in [SOLUTION_FILE, CLUSTERS_FILE, VERIFICATION_FILE, OBSERVABLES_FILE] {
        files.insert(name.to_string(), report::sha256_file(&dir.join(name))?);
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        core_version: estc_core::VERSION.into(),
        config: cfg.clone(),
        threads: rayon::current_num_threads(),
        stages_run: ["schedule", "solve", "verify", "observe"].map(String::from).to_vec(),
        timings,
        clusters: cluster_summary(&solution.stats, model.equation_count()),
        verification: verification.maxima.clone(),
        verification_passed: verification.passed(),
        files,
    };
    manifest.write(dir)?;
    verification.into_result()?;
    Ok(manifest)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResumeOutcome {
    /// Upstream artifacts were reused; only observables were recomputed.
    ObserveOnly,
    /// The configuration changed upstream of observe; everything was rerun.
    FullRecompute,
}

/// The part of a configuration that determines the solution and its verification.
fn upstream_key(cfg: &RunConfig) -> RunConfig {
    RunConfig {
        observe: ObserveConfig::default(),
        seed: 0,
        threads: None,
        output_dir: None,
        ..cfg.clone()
    }
}

/// Re-runs the observe stage on the artifacts in `dir`, or everything when
/// `cfg` differs from the manifest upstream of observe.
pub fn resume(dir: &Path, cfg: &RunConfig) -> Result<(Manifest, ResumeOutcome)> {
    cfg.validate()?;
    let previous = Manifest::load(dir)?;
    if upstream_key(cfg) != upstream_key(&previous.config) {
        return Ok((run_pipeline(cfg, dir)?, ResumeOutcome::FullRecompute));
    }
    previous.check_digests(dir, &UPSTREAM_FILES)?;
    let table = solution_file::load(dir.join(SOLUTION_FILE))?;
    if table.field != cfg.field {
        anyhow::bail!("solution file field does not match the manifest configuration");
    }

    let t = Instant::now();
    let observables = observe(&table, &cfg.observe, cfg.seed)?;
    let elapsed = t.elapsed().as_secs_f64();
    report::write_json(&dir.join(OBSERVABLES_FILE), &observables)?;

    let mut manifest = previous;
    manifest.config = cfg.clone();
    manifest.threads = rayon::current_num_threads();
    manifest.stages_run = vec!["observe".into()];
    manifest.timings.insert("observe".into(), round_sig(elapsed));
    manifest
        .files
        .insert(OBSERVABLES_FILE.into(), report::sha256_file(&dir.join(OBSERVABLES_FILE))?);
    manifest.write(dir)?;
    Ok((manifest, ResumeOutcome::ObserveOnly))
}

