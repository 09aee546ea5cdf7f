//! Initial data, exit classification and the sign-driven parameter search.

use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Geometry, Grid, GridState, DEFAULT_DY};
use crate::integrator::{Dynamics, ExitInfo, ExitSign, Integrator, TrajectoryRecord};
use crate::params::ProblemParams;
use crate::scaling::ScalingMap;
use crate::spectral::{cutoff_chi, Component, ShrinkingSetSpec};
use crate::terms::TermContext;

/// Exits by components other than `q0`/`q1` after this many units past
/// `s0` are flagged as anomalies.
pub const TRANSIENT_WINDOW: f64 = 1.0;

/// Bracket of the shooting parameters.
pub const D_RANGE: (f64, f64) = (-2.0, 2.0);

/// Discretisation shared by every shot of a search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShotSettings {
    pub geometry: Geometry,
    pub dy: f64,
    pub ds: f64,
    pub observe_every: f64,
    /// Latest similarity time the grid and scaling table must support.
    pub s_horizon: f64,
}

impl ShotSettings {
    /// Production settings: `dy = 0.05`, `ds = 1e-3`, observations every `0.1`.
    pub fn production(params: &ProblemParams, s_horizon: f64) -> Self {
        Self {
            geometry: Geometry::Radial { n: params.n },
            dy: DEFAULT_DY,
            ds: 1e-3,
            observe_every: 0.1,
            s_horizon,
        }
    }

    /// Same settings with the spacing scaled by `factor` and the step kept at
    /// the same fraction of the stability limit.
    pub fn refined(&self, factor: f64) -> Self {
        Self {
            dy: self.dy * factor,
            ds: self.ds * factor * factor,
            ..*self
        }
    }
}

/// Scaling map, term context and grid for a family of shots.
#[derive(Clone)]
pub struct ShotSetup {
    pub params: ProblemParams,
    pub settings: ShotSettings,
    pub ctx: Arc<TermContext>,
    pub grid: Arc<Grid>,
}

impl ShotSetup {
    /// The step is capped at the stability limit of the grid built for the horizon.
    pub fn new(params: &ProblemParams, mut settings: ShotSettings) -> Result<Self> {
        params.validate()?;
        if let Geometry::Line = settings.geometry {
            if params.n != 1 {
                return Err(Error::InvalidParameter("full-line shooting requires n = 1".into()));
            }
        }
        let map = ScalingMap::build(params, settings.s_horizon + 1.0)?;
        let ctx = Arc::new(TermContext::new(Arc::new(map)));
        let grid = Arc::new(Grid::for_run(params, settings.geometry, settings.s_horizon, settings.dy)?);
        settings.ds = settings.ds.min(grid.step_limit());
        Ok(Self {
            params: *params,
            settings,
            ctx,
            grid,
        })
    }

    pub fn integrator(&self, dynamics: Dynamics) -> Result<Integrator> {
        Integrator::new(self.ctx.clone(), self.grid.clone(), dynamics, self.settings.ds)
    }

    pub fn spec(&self) -> ShrinkingSetSpec {
        ShrinkingSetSpec::new(self.params.a)
    }
}

/// One choice of `(d0, d1)`. In radial geometry `d1` is ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShotConfig {
    pub d0: f64,
    pub d1: f64,
    pub params: ProblemParams,
}

impl ShotConfig {
    pub fn new(params: &ProblemParams, d0: f64, d1: f64) -> Result<Self> {
        let (lo, hi) = D_RANGE;
        if !(lo..=hi).contains(&d0) || !(lo..=hi).contains(&d1) {
            return Err(Error::InvalidParameter(format!(
                "(d0, d1) = ({d0}, {d1}) outside [{lo}, {hi}]^2"
            )));
        }
        Ok(Self {
            d0,
            d1,
            params: *params,
        })
    }

    /// `q(y, s0) = (A/s0^2)(d0 + d1 y) chi(2y, s0)`.
    pub fn perturbation(&self, y: f64, geometry: Geometry) -> f64 {
        let prm = &self.params;
        let d1 = match geometry {
            Geometry::Line => self.d1,
            Geometry::Radial { .. } => 0.0,
        };
        prm.a / (prm.s0 * prm.s0) * (self.d0 + d1 * y) * cutoff_chi(2.0 * y, prm.s0, prm.k)
    }
}

/// `w(y, s0) = phi(y, s0) + q(y, s0)`.
pub fn initial_data(shot: &ShotConfig, setup: &ShotSetup) -> GridState {
    let profile = setup.ctx.profile();
    let s0 = shot.params.s0;
    let geometry = setup.grid.geometry();
    GridState::from_fn(s0, setup.grid.clone(), |y| {
        profile.varphi(y, s0) + shot.perturbation(y, geometry)
    })
}

/// Outcome of one shot.
#[derive(Debug, Clone, Serialize)]
pub struct ExitReport {
    pub d0: f64,
    pub d1: f64,
    pub exit: Option<ExitInfo>,
    pub s_end: f64,
    pub q0_at_end: f64,
    pub q1_at_end: f64,
    /// `(s, ratios)` for every observation.
    pub saturation: Vec<(f64, [f64; 5])>,
    /// Late exit through a component other than `q0`/`q1`.
    pub anomaly: bool,
}

impl ExitReport {
    pub fn from_record(shot: &ShotConfig, record: &TrajectoryRecord) -> Self {
        let s0 = shot.params.s0;
        let last = record.observations.last();
        let anomaly = record
            .exit
            .map(|e| !e.violator.is_unstable() && e.exit_s > s0 + TRANSIENT_WINDOW)
            .unwrap_or(false);
        Self {
            d0: shot.d0,
            d1: shot.d1,
            exit: record.exit,
            s_end: record.s_end(),
            q0_at_end: last.map(|o| o.modes.q0).unwrap_or(0.0),
            q1_at_end: last.map(|o| o.modes.q1).unwrap_or(0.0),
            saturation: record
                .observations
                .iter()
                .map(|o| (o.s(), o.membership.ratios))
                .collect(),
            anomaly,
        }
    }

    pub fn survived(&self) -> bool {
        self.exit.is_none()
    }

    /// Exit time, or the end of the run for survivors.
    pub fn exit_s(&self) -> f64 {
        self.exit.map(|e| e.exit_s).unwrap_or(self.s_end)
    }

    pub fn violator(&self) -> Option<Component> {
        self.exit.map(|e| e.violator)
    }

    /// Sign driving the `d0` bisection: the exit sign for `q0` exits,
    /// otherwise the sign of `q0` at the exit time.
    pub fn q0_sign(&self) -> Option<ExitSign> {
        let e = self.exit?;
        Some(match e.violator {
            Component::Q0 => e.sign,
            _ => ExitSign::of(self.q0_at_end),
        })
    }

    pub fn q1_sign(&self) -> Option<ExitSign> {
        let e = self.exit?;
        Some(match e.violator {
            Component::Q1 => e.sign,
            _ => ExitSign::of(self.q1_at_end),
        })
    }

    pub fn sign_label(&self) -> &'static str {
        match &self.exit {
            None => "survived",
            Some(e) => e.sign.label(),
        }
    }
}

/// Runs one shot to `s_max` (stopping at the first exit).
pub fn shoot_with_record(shot: &ShotConfig, setup: &ShotSetup, s_max: f64) -> Result<(ExitReport, TrajectoryRecord)> {
    if s_max > setup.settings.s_horizon + 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "s_max = {s_max} beyond the prepared horizon {}",
            setup.settings.s_horizon
        )));
    }
    let mut integ = setup.integrator(Dynamics::W)?;
    let record = integ.run(
        initial_data(shot, setup),
        s_max,
        &setup.spec(),
        setup.settings.observe_every,
        true,
    )?;
    Ok((ExitReport::from_record(shot, &record), record))
}

pub fn shoot(shot: &ShotConfig, setup: &ShotSetup, s_max: f64) -> Result<ExitReport> {
    Ok(shoot_with_record(shot, setup, s_max)?.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchOptions {
    /// Interior probes per refinement level (run concurrently).
    pub probes_per_level: usize,
    pub max_levels: usize,
    pub width_tol: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            probes_per_level: 1,
            max_levels: 80,
            width_tol: 1e-12,
        }
    }
}

/// One probe of the search, as recorded in the bracket history.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeRecord {
    pub level: usize,
    pub lo: f64,
    pub hi: f64,
    pub d0: f64,
    pub d1: f64,
    pub exit_s: f64,
    pub violator: Option<Component>,
    pub sign: Option<ExitSign>,
    /// More than one sign flip among the probes of this level.
    pub anomaly: bool,
}

pub struct SearchOutcome {
    pub best: ShotConfig,
    pub report: ExitReport,
    pub record: Option<TrajectoryRecord>,
    pub history: Vec<ProbeRecord>,
}

impl SearchOutcome {
    pub fn reached(&self, s_target: f64) -> bool {
        self.report.survived() || self.report.exit_s() >= s_target - 1e-9
    }

    pub const CSV_HEADER: &'static str = "level,lo,hi,d0,d1,exit_s,violator,sign,anomaly";

    pub fn write_history_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for p in &self.history {
            writeln!(
                out,
                "{},{:.17e},{:.17e},{:.17e},{:.17e},{},{},{},{}",
                p.level,
                p.lo,
                p.hi,
                p.d0,
                p.d1,
                p.exit_s,
                p.violator.map(|c| c.label()).unwrap_or("survived"),
                p.sign.map(|s| s.label()).unwrap_or(""),
                u8::from(p.anomaly)
            )?;
        }
        Ok(())
    }
}

type Probe = (ShotConfig, ExitReport, TrajectoryRecord);

fn run_probes<F>(points: &[f64], probes: usize, eval: &F) -> Result<Vec<Probe>>
where
    F: Fn(f64) -> Result<Probe> + Sync,
{
    if probes <= 1 || points.len() <= 1 {
        return points.iter().map(|&d| eval(d)).collect();
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = points.iter().map(|&d| scope.spawn(move || eval(d))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("probe thread panicked"))
            .collect()
    })
}

/// Sign-driven bisection (or multisection) of a scalar parameter.
///
/// `eval(x)` runs a shot; `sign_of` extracts the sign steering the bracket
/// (`None` means the shot survived to the target).
fn bisect<F, G>(
    mut lo: f64,
    mut hi: f64,
    options: &SearchOptions,
    s_target: f64,
    eval: F,
    sign_of: G,
    history: &mut Vec<ProbeRecord>,
    level_offset: usize,
) -> Result<Probe>
where
    F: Fn(f64) -> Result<Probe> + Sync,
    G: Fn(&ExitReport) -> Option<ExitSign>,
{
    let reached = |r: &ExitReport| r.survived() || r.exit_s() >= s_target - 1e-9;
    let ends = run_probes(&[lo, hi], options.probes_per_level.max(2), &eval)?;
    let mut ends = ends.into_iter();
    let lo_probe = ends.next().unwrap();
    let hi_probe = ends.next().unwrap();
    for p in [&lo_probe, &hi_probe] {
        history.push(probe_record(level_offset, lo, hi, p, false, &sign_of));
    }
    for p in [&lo_probe, &hi_probe] {
        if reached(&p.1) {
            return Ok(p.clone());
        }
    }
    let (s_lo, s_hi) = (sign_of(&lo_probe.1), sign_of(&hi_probe.1));
    if s_lo == s_hi || s_lo.is_none() || s_hi.is_none() {
        return Err(Error::NoAdmissibleBracket {
            lo: Box::new(lo_probe.1),
            hi: Box::new(hi_probe.1),
        });
    }
    let lo_sign = s_lo.unwrap();
    let mut best = if lo_probe.1.exit_s() >= hi_probe.1.exit_s() { lo_probe } else { hi_probe };

    for level in 1..=options.max_levels {
        if hi - lo < options.width_tol {
            break;
        }
        let m = options.probes_per_level.max(1);
        let points: Vec<f64> = (1..=m).map(|k| lo + (hi - lo) * k as f64 / (m + 1) as f64).collect();
        let probes = run_probes(&points, m, &eval)?;
        let signs: Vec<Option<ExitSign>> = probes.iter().map(|p| sign_of(&p.1)).collect();

        let mut chain = vec![Some(lo_sign)];
        chain.extend(signs.iter().copied());
        chain.push(Some(lo_sign.flip()));
        let flips = chain.windows(2).filter(|w| w[0] != w[1]).count();
        let anomaly = flips > 1;
        for p in &probes {
            history.push(probe_record(level_offset + level, lo, hi, p, anomaly, &sign_of));
        }

        let mut survivor = None;
        for p in &probes {
            if p.1.exit_s() > best.1.exit_s() {
                best = p.clone();
            }
            if reached(&p.1) && survivor.is_none() {
                survivor = Some(p.clone());
            }
        }
        if let Some(p) = survivor {
            return Ok(p);
        }
        // Keep the first sub-interval across which the sign flips.
        let mut new_lo = lo;
        let mut new_hi = hi;
        for (k, sign) in signs.iter().enumerate() {
            if *sign == Some(lo_sign) {
                new_lo = points[k];
            } else {
                new_hi = points[k];
                break;
            }
        }
        lo = new_lo;
        hi = new_hi;
    }
    Ok(best)
}

impl ExitSign {
    pub fn flip(self) -> Self {
        match self {
            ExitSign::Plus => ExitSign::Minus,
            ExitSign::Minus => ExitSign::Plus,
        }
    }
}

fn probe_record<G>(level: usize, lo: f64, hi: f64, p: &Probe, anomaly: bool, sign_of: &G) -> ProbeRecord
where
    G: Fn(&ExitReport) -> Option<ExitSign>,
{
    ProbeRecord {
        level,
        lo,
        hi,
        d0: p.0.d0,
        d1: p.0.d1,
        exit_s: p.1.exit_s(),
        violator: p.1.violator(),
        sign: sign_of(&p.1),
        anomaly: anomaly || p.1.anomaly,
    }
}

/// Searches `(d0, d1)` for a trajectory staying in the shrinking set up to
/// `s_target`. Radial geometry bisects `d0` on the `q0` exit sign; the full
/// line nests a `d1` bisection on the `q1` exit sign inside every `d0` probe.
pub fn search(setup: &ShotSetup, s_target: f64, options: &SearchOptions) -> Result<SearchOutcome> {
    let params = setup.params;
    if s_target <= params.s0 {
        let best = ShotConfig::new(&params, 0.0, 0.0)?;
        let report = ExitReport {
            d0: 0.0,
            d1: 0.0,
            exit: None,
            s_end: params.s0,
            q0_at_end: 0.0,
            q1_at_end: 0.0,
            saturation: Vec::new(),
            anomaly: false,
        };
        return Ok(SearchOutcome {
            best,
            report,
            record: None,
            history: Vec::new(),
        });
    }
    let mut history = Vec::new();
    let probe = match setup.grid.geometry() {
        Geometry::Radial { .. } => {
            let eval = |d0: f64| -> Result<Probe> {
                let shot = ShotConfig::new(&params, d0, 0.0)?;
                let (r, rec) = shoot_with_record(&shot, setup, s_target)?;
                Ok((shot, r, rec))
            };
            bisect(D_RANGE.0, D_RANGE.1, options, s_target, eval, ExitReport::q0_sign, &mut history, 0)?
        }
        Geometry::Line => {
            let inner_options = SearchOptions {
                probes_per_level: 1,
                ..*options
            };
            let eval = |d0: f64| -> Result<Probe> {
                let mut inner = Vec::new();
                let eval_inner = |d1: f64| -> Result<Probe> {
                    let shot = ShotConfig::new(&params, d0, d1)?;
                    let (r, rec) = shoot_with_record(&shot, setup, s_target)?;
                    Ok((shot, r, rec))
                };
                // Tune d1 until the exit is no longer driven by q1.
                let sign_q1 = |r: &ExitReport| match r.violator() {
                    Some(Component::Q1) => r.q1_sign(),
                    _ => None,
                };
                match bisect(D_RANGE.0, D_RANGE.1, &inner_options, s_target, eval_inner, sign_q1, &mut inner, 0) {
                    Ok(p) => Ok(p),
                    Err(Error::NoAdmissibleBracket { lo, .. }) if lo.violator() != Some(Component::Q1) => {
                        eval_inner(0.0)
                    }
                    Err(e) => Err(e),
                }
            };
            bisect(D_RANGE.0, D_RANGE.1, options, s_target, eval, ExitReport::q0_sign, &mut history, 0)?
        }
    };
    let (best, report, record) = probe;
    Ok(SearchOutcome {
        best,
        report,
        record: Some(record),
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coarse(p: f64, alpha: f64) -> ShotSetup {
        let prm = ProblemParams::desk(p, alpha).unwrap();
        let settings = ShotSettings {
            geometry: Geometry::Radial { n: 1 },
            dy: 0.1,
            ds: 2.5e-3,
            observe_every: 0.1,
            s_horizon: 26.0,
        };
        ShotSetup::new(&prm, settings).unwrap()
    }

    #[test]
    fn initial_data_examples() {
        let prm = ProblemParams::new(3.0, 1.0, 1, 10.0, 10.0, 20.0).unwrap();
        let shot = ShotConfig::new(&prm, 1.0, 0.0).unwrap();
        assert!((shot.perturbation(0.0, Geometry::Radial { n: 1 }) - 0.025).abs() < 1e-15);
        let setup = coarse(3.0, 1.0);
        let flat = ShotConfig::new(&setup.params, 0.0, 0.0).unwrap();
        let st = initial_data(&flat, &setup);
        let profile = setup.ctx.profile();
        for (w, &y) in st.w.iter().zip(setup.grid.nodes()) {
            assert_eq!(*w, profile.varphi(y, 20.0));
        }
    }

    #[test]
    fn initial_outer_part_vanishes() {
        let setup = coarse(3.0, 1.0);
        for d0 in [-1.0, 0.3, 1.0] {
            let shot = ShotConfig::new(&setup.params, d0, 0.0).unwrap();
            let integ = setup.integrator(Dynamics::W).unwrap();
            let obs = integ.observe(&initial_data(&shot, &setup), &setup.spec()).unwrap();
            assert_eq!(obs.modes.qe_norm, 0.0);
            assert!(obs.membership.ratio(Component::QMinus) < 1.0);
        }
    }

    #[test]
    fn rejects_out_of_box() {
        let prm = ProblemParams::desk(3.0, 1.0).unwrap();
        assert!(ShotConfig::new(&prm, 2.5, 0.0).is_err());
    }

    #[test]
    fn large_d0_exits_by_sign() {
        let setup = coarse(3.0, 1.0);
        let up = shoot(&ShotConfig::new(&setup.params, 1.9, 0.0).unwrap(), &setup, 26.0).unwrap();
        assert_eq!(up.violator(), Some(Component::Q0));
        assert_eq!(up.q0_sign(), Some(ExitSign::Plus));
        let down = shoot(&ShotConfig::new(&setup.params, -1.9, 0.0).unwrap(), &setup, 26.0).unwrap();
        assert_eq!(down.violator(), Some(Component::Q0));
        assert_eq!(down.q0_sign(), Some(ExitSign::Minus));
    }

    #[test]
    fn degenerate_target_returns_immediately() {
        let setup = coarse(3.0, 1.0);
        let out = search(&setup, 20.0, &SearchOptions::default()).unwrap();
        assert!(out.report.survived());
        assert!(out.history.is_empty());
        assert_eq!(out.best.d0, 0.0);
    }
}
