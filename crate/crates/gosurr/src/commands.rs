//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use gosurr_core::driver::{run_reference, run_uniform, AdaptiveRun, AdaptiveState, ReferenceEstimate, ReferenceQoi};
use gosurr_core::exec::Executor;
use gosurr_core::Level;
use serde::Serialize;

use crate::checkpoint::Checkpoint;
use crate::config::{LevelChoice, RunConfig, Setup};
use crate::error::{CliError, CliResult};
use crate::format::{f17, write_atomic, write_json};
use crate::output::{self, Summary};

/// Overrides shared by several subcommands.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub runs: Option<usize>,
    pub samples: Option<usize>,
    pub level: Option<LevelChoice>,
    /// Leave the run unfinished after this many iterations (for testing
    /// interruption and resumption).
    pub stop_after: Option<usize>,
}

fn load_config(path: &Path, o: &Overrides) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = o.seed {
        cfg.adaptive.seed = s;
    }
    Ok(cfg)
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn default_out(cfg: &RunConfig) -> PathBuf {
    let name = if cfg.problem.is_empty() { &cfg.model.name } else { &cfg.problem };
    PathBuf::from("runs").join(format!("{name}-seed{}", cfg.adaptive.seed))
}

/// `gosurr run`: a fresh adaptive run. Returns the run directory.
pub fn run<E: Executor>(config: &Path, o: &Overrides, exec: &E) -> CliResult<PathBuf> {
    let mut cfg = load_config(config, o)?;
    let setup = cfg.problem_setup()?;
    let dir = o.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| default_out(&cfg));
    cfg.out = None;
    ensure_dir(&dir)?;
    write_json(&dir.join(output::CONFIG), &cfg)?;
    let _ = fs::remove_file(dir.join(output::TIMING));
    let run = AdaptiveRun::new(setup.model.as_ref(), &setup.problem, &setup.target, &cfg.adaptive, exec)?;
    let state = run.initialize()?;
    drive(&dir, &cfg, &setup, &run, state, o.stop_after)?;
    Ok(dir)
}

/// `gosurr resume`: continues from a checkpoint file or run directory.
pub fn resume<E: Executor>(path: &Path, o: &Overrides, exec: &E) -> CliResult<PathBuf> {
    let file = if path.is_dir() { path.join(output::CHECKPOINT) } else { path.to_path_buf() };
    let cp = Checkpoint::load(&file)?;
    let cfg = cp.config;
    let setup = cfg.problem_setup()?;
    let dir = match &o.out {
        Some(d) => d.clone(),
        None => file.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    ensure_dir(&dir)?;
    let run = AdaptiveRun::new(setup.model.as_ref(), &setup.problem, &setup.target, &cfg.adaptive, exec)?;
    if cp.state.stopped.is_some() {
        eprintln!("run already finished ({:?}); nothing to do", cp.state.stopped.unwrap());
    }
    drive(&dir, &cfg, &setup, &run, cp.state, o.stop_after)?;
    Ok(dir)
}

fn persist(dir: &Path, cfg: &RunConfig, setup: &Setup, state: &AdaptiveState) -> CliResult<()> {
    let levels = setup.model.levels().len();
    output::write_convergence(dir, &state.records, levels, cfg.reference.value)?;
    Checkpoint {
        config: cfg.clone(),
        state: state.clone(),
    }
    .save(&dir.join(output::CHECKPOINT))
}

fn drive<E: Executor>(
    dir: &Path,
    cfg: &RunConfig,
    setup: &Setup,
    run: &AdaptiveRun<'_, E>,
    mut state: AdaptiveState,
    stop_after: Option<usize>,
) -> CliResult<()> {
    persist(dir, cfg, setup, &state)?;
    let mut steps = 0;
    while state.stopped.is_none() && stop_after.is_none_or(|n| steps < n) {
        let t0 = Instant::now();
        let k = state.k;
        run.step(&mut state)?;
        output::append_timing(dir, k, t0.elapsed().as_secs_f64())?;
        persist(dir, cfg, setup, &state)?;
        if let Some(r) = state.last() {
            eprintln!(
                "iteration {:>3}  cells {:>5}  evals {:?}  I_N {}  Î_N {}  I_E {:.3e}",
                r.k, r.cells, r.evaluations, f17(r.integral_plain), f17(r.integral_enhanced), r.error_estimate
            );
        }
        steps += 1;
    }
    if let Some(s) = Summary::of(
        &state,
        &cfg.problem,
        &cfg.model.name,
        &cfg.target.name,
        cfg.adaptive.seed,
        cfg.reference.value,
    ) {
        write_json(&dir.join(output::SUMMARY), &s)?;
        if state.stopped.is_some() {
            println!("{}", f17(s.integral_enhanced));
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct ReferenceReport<'a> {
    problem: &'a str,
    qoi: String,
    seed: u64,
    #[serde(flatten)]
    estimate: ReferenceEstimate,
}

fn reference_estimate(cfg: &RunConfig, setup: &Setup, o: &Overrides) -> CliResult<(ReferenceEstimate, ReferenceQoi)> {
    let qoi = cfg.reference_qoi(setup.model.as_ref(), o.level);
    let samples = o.samples.unwrap_or(cfg.reference.samples);
    let est = run_reference(
        setup.model.as_ref(),
        &setup.problem,
        &setup.target,
        qoi,
        samples,
        cfg.reference.proposal_scale,
        cfg.adaptive.seed,
    )
    .map_err(|e| match e {
        gosurr_core::Error::Unsupported(m) => CliError::config(format!("reference: {m}")),
        other => other.into(),
    })?;
    Ok((est, qoi))
}

/// `gosurr reference`: long chain against the exact or finest-level QoI.
pub fn reference(config: &Path, o: &Overrides) -> CliResult<ReferenceEstimate> {
    let cfg = load_config(config, o)?;
    let setup = cfg.problem_setup()?;
    if let Some(LevelChoice::Level(l)) = o.level {
        if l > setup.model.max_level().get() {
            return Err(CliError::config(format!("--level {l} exceeds the finest model level")));
        }
    }
    let (est, qoi) = reference_estimate(&cfg, &setup, o)?;
    println!(
        "{} ± {} ({} states, acceptance {:.3})",
        f17(est.mean),
        f17(est.standard_error),
        est.samples,
        est.acceptance
    );
    if let Some(dir) = &o.out {
        ensure_dir(dir)?;
        let report = ReferenceReport {
            problem: &cfg.problem,
            qoi: match qoi {
                ReferenceQoi::Exact => "exact".into(),
                ReferenceQoi::Level(l) => format!("level {l}"),
            },
            seed: cfg.adaptive.seed,
            estimate: est,
        };
        write_json(&dir.join("reference.json"), &report)?;
    }
    Ok(est)
}

/// Mean absolute errors of uniform surrogates, one row per sample count.
pub struct UniformTable {
    pub n: Vec<usize>,
    pub levels: Vec<Level>,
    /// `errors[row][col]` is the mean over runs.
    pub errors: Vec<Vec<f64>>,
    pub runs: usize,
    pub reference: f64,
    /// `(n, level, run, integral)`.
    pub integrals: Vec<(usize, Level, usize, f64)>,
}

impl UniformTable {
    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["n".to_string(), "statistic".to_string()];
        header.extend(self.levels.iter().map(|l| format!("level_{l}")));
        w.write_record(&header).expect("in-memory write");
        let stat = if self.runs == 1 {
            "single_run_abs_error".to_string()
        } else {
            format!("mean_abs_error_over_{}_runs", self.runs)
        };
        for (n, row) in self.n.iter().zip(&self.errors) {
            let mut rec = vec![n.to_string(), stat.clone()];
            rec.extend(row.iter().map(|e| f17(*e)));
            w.write_record(&rec).expect("in-memory write");
        }
        w.into_inner().expect("in-memory write")
    }

    pub fn runs_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["n", "level", "run", "integral", "abs_error"]).expect("in-memory write");
        for (n, l, r, v) in &self.integrals {
            w.write_record([
                n.to_string(),
                l.to_string(),
                r.to_string(),
                f17(*v),
                f17((v - self.reference).abs()),
            ])
            .expect("in-memory write");
        }
        w.into_inner().expect("in-memory write")
    }
}

/// `gosurr uniform`: the N × level error matrix of non-adaptive surrogates.
pub fn uniform<E: Executor>(config: &Path, o: &Overrides, exec: &E) -> CliResult<UniformTable> {
    let mut cfg = load_config(config, o)?;
    if let Some(r) = o.runs {
        cfg.uniform.runs = r;
    }
    if let Some(s) = o.samples {
        cfg.uniform.n = vec![s];
    }
    let setup = cfg.problem_setup()?;
    let levels = match o.level {
        Some(LevelChoice::Level(l)) if l <= setup.model.max_level().get() => vec![Level::new(l)],
        Some(other) => return Err(CliError::config(format!("--level {other} is not a model level"))),
        None => cfg.uniform_levels(setup.model.as_ref()),
    };
    let reference = match cfg.reference.value {
        Some(v) => v,
        None => {
            eprintln!("no reference.value in the config; computing one");
            reference_estimate(&cfg, &setup, &Overrides::default())?.0.mean
        }
    };
    let chain = cfg.uniform.chain();
    let mut errors = Vec::new();
    let mut integrals = Vec::new();
    for &n in &cfg.uniform.n {
        let mut row = Vec::new();
        for &l in &levels {
            let vals = run_uniform(
                setup.model.as_ref(),
                &setup.problem,
                &setup.target,
                n,
                l,
                cfg.uniform.order,
                cfg.uniform.runs,
                &chain,
                cfg.adaptive.seed,
                exec,
            )?;
            let mean = vals.iter().map(|v| (v - reference).abs()).sum::<f64>() / vals.len() as f64;
            eprintln!("n {n:>6}  level {l}  mean |error| {mean:.3e}");
            integrals.extend(vals.iter().enumerate().map(|(r, v)| (n, l, r, *v)));
            row.push(mean);
        }
        errors.push(row);
    }
    let table = UniformTable {
        n: cfg.uniform.n.clone(),
        levels,
        errors,
        runs: cfg.uniform.runs,
        reference,
        integrals,
    };
    let csv = table.to_csv();
    print!("{}", String::from_utf8_lossy(&csv));
    if let Some(dir) = &o.out {
        ensure_dir(dir)?;
        write_atomic(&dir.join("uniform.csv"), &csv)?;
        write_atomic(&dir.join("uniform_runs.csv"), &table.runs_csv())?;
    }
    Ok(table)
}

/// `gosurr report`: human-readable summary of a run directory.
pub fn report(dir: &Path) -> CliResult<String> {
    let path = dir.join(output::SUMMARY);
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let s: Summary = serde_json::from_str(&text).map_err(|e| CliError::Integrity {
        path: path.clone(),
        msg: e.to_string(),
    })?;
    let conv = dir.join(output::CONVERGENCE);
    let mut rd = csv::Reader::from_path(&conv).map_err(|e| CliError::io(&conv, std::io::Error::other(e)))?;
    let header = rd
        .headers()
        .map_err(|e| CliError::io(&conv, std::io::Error::other(e)))?
        .clone();
    let col = |name: &str| header.iter().position(|h| h == name);
    let level_cols: Vec<usize> = (0..header.len()).filter(|&i| header[i].starts_with("evals_level_")).collect();
    let (ihat, ie, err) = (col("integral_enhanced"), col("error_estimate"), col("abs_error"));

    let mut out = String::new();
    let label = if s.problem.is_empty() { s.model.clone() } else { format!("{} ({})", s.problem, s.model) };
    out.push_str(&format!("{label}, target {}, seed {}\n", s.target, s.seed));
    let status = match s.stop_reason {
        Some(r) => format!("stopped after {} iterations: {r:?}", s.iterations),
        None => format!("unfinished at iteration {}", s.iterations),
    };
    out.push_str(&format!("{status}\n"));
    out.push_str(&format!("final integral {:.6}  (plain {:.6}, I_E {:.3e})\n", s.integral_enhanced, s.integral_plain, s.error_estimate));
    if let (Some(r), Some(e)) = (s.reference, s.abs_error) {
        out.push_str(&format!("reference {r:.6}, |error| {e:.3e}\n"));
    }
    out.push_str(&format!("{} cells, model solves per level {:?}\n\n", s.cells, s.evaluations));
    let mut head = format!("{:>4}", "k");
    for c in &level_cols {
        head.push_str(&format!(" {:>8}", header[*c].replace("evals_level_", "L")));
    }
    head.push_str(&format!(" {:>12} {:>11}", "I_hat", "I_E"));
    if err.is_some() {
        head.push_str(&format!(" {:>10}", "|error|"));
    }
    out.push_str(&head);
    out.push('\n');
    for row in rd.records() {
        let row = row.map_err(|e| CliError::io(&conv, std::io::Error::other(e)))?;
        let num = |i: Option<usize>| i.and_then(|i| row.get(i)).and_then(|v| v.parse::<f64>().ok()).unwrap_or(f64::NAN);
        let mut line = format!("{:>4}", &row[0]);
        for c in &level_cols {
            line.push_str(&format!(" {:>8}", &row[*c]));
        }
        line.push_str(&format!(" {:>12.6} {:>11.3e}", num(ihat), num(ie)));
        if err.is_some() {
            line.push_str(&format!(" {:>10.3e}", num(err)));
        }
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}
