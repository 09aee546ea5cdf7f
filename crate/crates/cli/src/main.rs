//! `blowup`: experiment runner over the core pipeline.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use blowup_core::reconstruction::{
    final_profile, geometric_samples, is_non_increasing, resolvable_annulus, theorem_residual, trend_slope,
};
use blowup_core::terms::sweeps::{all_sweeps, SweepReport};
use blowup_core::{
    h_expansion, search, shoot_with_record, ExitReport, Geometry, ProblemParams, ScalingMap, SearchOptions,
    SearchOutcome, ShotConfig, ShotSettings, ShotSetup, TermContext, TrajectoryRecord,
};

#[derive(Parser)]
#[command(name = "blowup", version, about = "Log-perturbed semilinear heat blowup: scaling, terms, shooting, profiles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the scaling map (s, ell, h, h_expansion, ratio_to_kappa).
    Scaling(ScalingArgs),
    /// Sample V, R, D and B on a (y, s) grid, optionally with the bound sweeps.
    Terms(TermsArgs),
    /// Shoot a single datum or search the bracket for a surviving one.
    Shoot(ShootArgs),
    /// Search, then read the final profile off the surviving trajectory.
    Profile(ProfileArgs),
    /// Run every stage into one directory with a manifest.
    Report(ReportArgs),
}

#[derive(Args, Clone, Copy)]
struct ParamArgs {
    #[arg(long, default_value_t = 3.0)]
    p: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    alpha: f64,
    /// Space dimension.
    #[arg(long, default_value_t = 1)]
    n: usize,
    /// Shrinking set size.
    #[arg(long, default_value_t = 20.0)]
    a: f64,
    /// Cutoff radius in units of sqrt(s).
    #[arg(long, default_value_t = 10.0)]
    k: f64,
    #[arg(long, default_value_t = 20.0)]
    s0: f64,
}

impl ParamArgs {
    fn params(&self) -> Result<ProblemParams> {
        Ok(ProblemParams::new(self.p, self.alpha, self.n, self.a, self.k, self.s0)?)
    }
}

#[derive(Args, Clone, Copy)]
struct GridArgs {
    /// Grid spacing in y.
    #[arg(long, default_value_t = 0.05)]
    dy: f64,
    /// Time step; capped at the stability limit of the grid.
    #[arg(long, default_value_t = 1e-3)]
    ds: f64,
    /// Observation spacing in s.
    #[arg(long, default_value_t = 0.1)]
    observe_every: f64,
}

impl GridArgs {
    fn settings(&self, params: &ProblemParams, s_horizon: f64) -> ShotSettings {
        ShotSettings {
            geometry: Geometry::Radial { n: params.n },
            dy: self.dy,
            ds: self.ds,
            observe_every: self.observe_every,
            s_horizon,
        }
    }
}

#[derive(Args)]
struct ScalingArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, default_value_t = 60.0)]
    s_max: f64,
    /// Output spacing in s.
    #[arg(long, default_value_t = 1.0)]
    every: f64,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the raw {s, ell, h} table as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct TermsArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Similarity times to sample.
    #[arg(long, value_delimiter = ',', default_values_t = vec![20.0, 30.0, 40.0])]
    s: Vec<f64>,
    #[arg(long, default_value_t = 0.5)]
    dy: f64,
    /// Largest y in units of sqrt(s).
    #[arg(long, default_value_t = 12.0)]
    z_max: f64,
    /// Perturbation value at which D and B are evaluated.
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    q: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the bound sweeps as JSON.
    #[arg(long)]
    sweeps: Option<PathBuf>,
}

#[derive(Args)]
struct ShootArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 35.0)]
    s_target: f64,
    /// Shoot this single datum instead of searching.
    #[arg(long, allow_negative_numbers = true)]
    d0: Option<f64>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    d1: f64,
    /// Concurrent probes per bisection level.
    #[arg(long, default_value_t = 1)]
    probes: usize,
    #[arg(long, default_value = "run")]
    out: PathBuf,
}

#[derive(Args)]
struct ProfileArgs {
    #[command(flatten)]
    shoot: ShootArgs,
    /// Inner edge of the sampled annulus in units of sqrt(s).
    #[arg(long, default_value_t = 10.0)]
    z_min: f64,
    #[arg(long, default_value_t = 12)]
    samples: usize,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    profile: ProfileArgs,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Scaling(a) => run_scaling(&a),
        Command::Terms(a) => run_terms(&a),
        Command::Shoot(a) => {
            let run = run_shoot(&a)?;
            print_outcome(&run);
            Ok(())
        }
        Command::Profile(a) => {
            let run = run_shoot(&a.shoot)?;
            print_outcome(&run);
            let summary = run_profile(&a, &run)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(())
        }
        Command::Report(a) => run_report(&a),
    }
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_scaling(map: &ScalingMap, every: f64, out: impl Write) -> Result<()> {
    let prm = *map.params();
    let (lo, hi) = map.s_range();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["s", "ell", "h", "h_expansion", "ratio_to_kappa"])?;
    let count = ((hi - lo) / every).floor() as usize;
    for k in 0..=count {
        let s = lo + every * k as f64;
        w.serialize((s, map.ell_at(s)?, map.h_at(s)?, h_expansion(s, &prm), map.ratio_to_kappa(s)?))?;
    }
    w.flush()?;
    Ok(())
}

fn run_scaling(a: &ScalingArgs) -> Result<()> {
    let map = ScalingMap::build(&a.params.params()?, a.s_max)?;
    write_scaling(&map, a.every, sink(a.out.as_deref())?)?;
    if let Some(path) = &a.json {
        fs::write(path, map.to_json())?;
    }
    Ok(())
}

fn write_terms(ctx: &TermContext, a: &TermsArgs, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["y", "s", "V", "R", "D", "B"])?;
    for &s in &a.s {
        let at = ctx.at(s)?;
        let count = (a.z_max * s.sqrt() / a.dy).floor() as usize;
        for j in 0..=count {
            let y = a.dy * j as f64;
            w.serialize((y, s, at.v(y), at.r(y), at.d(a.q, y)?, at.b(a.q, y)))?;
        }
    }
    w.flush()?;
    Ok(())
}

fn run_terms(a: &TermsArgs) -> Result<()> {
    let prm = a.params.params()?;
    let s_max = a.s.iter().copied().fold(prm.s0, f64::max) + 1.0;
    let ctx = TermContext::new(Arc::new(ScalingMap::build(&prm, s_max)?));
    write_terms(&ctx, a, sink(a.out.as_deref())?)?;
    if let Some(path) = &a.sweeps {
        let sweeps = all_sweeps(&prm)?;
        report_sweeps(&sweeps);
        fs::write(path, serde_json::to_string_pretty(&sweeps)?)?;
    }
    Ok(())
}

fn report_sweeps(sweeps: &[SweepReport]) {
    for s in sweeps {
        eprintln!("{:<28} {} (constant {:.3e})", s.name, if s.bounded { "bounded" } else { "GROWING" }, s.constant());
    }
}

struct ShotRun {
    params: ProblemParams,
    setup: ShotSetup,
    s_target: f64,
    report: ExitReport,
    record: TrajectoryRecord,
    search: Option<SearchOutcome>,
}

fn run_shoot(a: &ShootArgs) -> Result<ShotRun> {
    let params = a.params.params()?;
    if a.s_target <= params.s0 {
        bail!("s_target must exceed s0 = {}", params.s0);
    }
    let setup = ShotSetup::new(&params, a.grid.settings(&params, a.s_target))?;
    let (report, record, search) = match a.d0 {
        Some(d0) => {
            let (report, record) = shoot_with_record(&ShotConfig::new(&params, d0, a.d1)?, &setup, a.s_target)?;
            (report, record, None)
        }
        None => {
            let options = SearchOptions {
                probes_per_level: a.probes.max(1),
                ..SearchOptions::default()
            };
            let mut outcome = search(&setup, a.s_target, &options)?;
            let record = outcome.record.take().context("search kept no trajectory")?;
            (outcome.report.clone(), record, Some(outcome))
        }
    };
    fs::create_dir_all(&a.out)?;
    let run = ShotRun {
        params,
        setup,
        s_target: a.s_target,
        report,
        record,
        search,
    };
    write_shot(&run, &a.out)?;
    Ok(run)
}

fn write_shot(run: &ShotRun, dir: &Path) -> Result<()> {
    if let Some(search) = &run.search {
        search.write_history_csv(BufWriter::new(File::create(dir.join("history.csv"))?))?;
    }
    run.record.write_csv(BufWriter::new(File::create(dir.join("trajectory.csv"))?))?;
    fs::write(dir.join("trajectory.json"), run.record.summary_json())?;
    fs::write(dir.join("exit.json"), serde_json::to_string_pretty(&run.report)?)?;
    fs::write(dir.join("checkpoint.json"), run.record.final_state.to_json())?;
    Ok(())
}

fn print_outcome(run: &ShotRun) {
    let r = &run.report;
    let probes = run.search.as_ref().map(|s| s.history.len()).unwrap_or(1);
    if r.survived() {
        println!("d0 = {:.15} survived to s = {} ({probes} shots)", r.d0, run.s_target);
    } else {
        println!(
            "d0 = {:.15} exited at s = {:.3} via {} ({probes} shots)",
            r.d0,
            r.exit_s(),
            r.sign_label()
        );
    }
}

#[derive(Serialize)]
struct ProfileSummary {
    s_last: f64,
    t_last: f64,
    annulus: (f64, f64),
    slope: Option<f64>,
    expected_slope: f64,
    dyadic: Vec<(f64, f64, f64)>,
    residual_trend: Option<f64>,
    residual_non_increasing: bool,
    residual_first: Option<f64>,
    residual_last: Option<f64>,
}

fn run_profile(a: &ProfileArgs, run: &ShotRun) -> Result<ProfileSummary> {
    let rec = &run.record;
    let ann = resolvable_annulus(rec, a.z_min);
    let xs = geometric_samples(ann.0, ann.1, a.samples.max(2));
    let fp = final_profile(rec, run.setup.ctx.scaling(), &xs, a.z_min)?;
    let mut w = csv::Writer::from_path(a.shoot.out.join("profile.csv"))?;
    w.write_record(["x", "u_star", "formula_ratio"])?;
    for s in &fp.samples {
        if let (Some(u), Some(r)) = (s.u_star, s.formula_ratio) {
            w.serialize((s.x, u, r))?;
        }
    }
    w.flush()?;

    let residual = theorem_residual(rec)?;
    let summary = ProfileSummary {
        s_last: fp.s_last,
        t_last: fp.t_last,
        annulus: fp.annulus,
        slope: fp.slope,
        expected_slope: fp.expected_slope,
        dyadic: fp.dyadic.clone(),
        residual_trend: trend_slope(&residual),
        residual_non_increasing: is_non_increasing(&residual, 1e-3),
        residual_first: residual.first().map(|e| e.1),
        residual_last: residual.last().map(|e| e.1),
    };
    fs::write(a.shoot.out.join("profile.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

#[derive(Serialize)]
struct Manifest {
    params: ProblemParams,
    settings: ShotSettings,
    s_target: f64,
    reached_target: bool,
    d0: f64,
    files: Vec<String>,
    sweeps_bounded: bool,
}

fn run_report(a: &ReportArgs) -> Result<()> {
    let dir = a.profile.shoot.out.clone();
    let run = run_shoot(&a.profile.shoot)?;
    print_outcome(&run);

    let map = ScalingMap::build(&run.params, a.profile.shoot.s_target)?;
    write_scaling(&map, 0.5, BufWriter::new(File::create(dir.join("scaling.csv"))?))?;
    fs::write(dir.join("scaling.json"), map.to_json())?;

    let terms = TermsArgs {
        params: a.profile.shoot.params,
        s: vec![run.params.s0, 0.5 * (run.params.s0 + run.s_target), run.s_target],
        dy: 0.5,
        z_max: run.params.k + 2.0,
        q: 0.1,
        out: None,
        sweeps: None,
    };
    let ctx = TermContext::new(Arc::new(ScalingMap::build(&run.params, run.s_target + 1.0)?));
    write_terms(&ctx, &terms, BufWriter::new(File::create(dir.join("terms.csv"))?))?;
    let sweeps = all_sweeps(&run.params)?;
    fs::write(dir.join("sweeps.json"), serde_json::to_string_pretty(&sweeps)?)?;

    let mut files = vec!["scaling.csv", "scaling.json", "terms.csv", "sweeps.json"];
    if run.search.is_some() {
        files.push("history.csv");
    }
    files.extend(["trajectory.csv", "trajectory.json", "exit.json", "checkpoint.json"]);
    match run_profile(&a.profile, &run) {
        Ok(summary) => {
            println!("final profile slope {:?} (expected {:.4})", summary.slope, summary.expected_slope);
            files.extend(["profile.csv", "profile.json"]);
        }
        Err(e) => eprintln!("skipping the final profile: {e}"),
    }
    let manifest = Manifest {
        params: run.params,
        settings: run.setup.settings,
        s_target: run.s_target,
        reached_target: run.report.survived() || run.report.exit_s() >= run.s_target - 1e-9,
        d0: run.report.d0,
        files: files.into_iter().map(String::from).collect(),
        sweeps_bounded: sweeps.iter().all(|s| s.bounded),
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    println!("wrote {}", dir.display());
    Ok(())
}
