//! Explicit time marching of the similarity-variable dynamics and the
//! trajectory record built from it.

use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridState};
use crate::numerics::linear_fit;
use crate::params::ProblemParams;
use crate::spectral::{Component, Decomposer, Membership, ModeDecomposition, ShrinkingSetSpec};
use crate::terms::TermContext;

/// Which equation is marched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Dynamics {
    /// `w_s = Delta w - (1/2) y . grad w - h w + h |w|^{p-1} w ratio(w)`; the state is `w`.
    W,
    /// `q_s = L q + V q + B + R + D`; the state is `q = w - phi`.
    Q,
    /// `theta_s = L theta`.
    Linear,
    /// `theta_s = (L + V) theta`.
    LinearWithPotential,
}

impl Dynamics {
    /// Whether the marched variable is the perturbation rather than `w`.
    pub fn carries_perturbation(&self) -> bool {
        !matches!(self, Dynamics::W)
    }
}

/// Sign of an exit through a component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExitSign {
    Plus,
    Minus,
}

impl ExitSign {
    pub fn of(v: f64) -> Self {
        if v < 0.0 {
            ExitSign::Minus
        } else {
            ExitSign::Plus
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ExitSign::Plus => "+",
            ExitSign::Minus => "-",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExitInfo {
    pub exit_s: f64,
    pub violator: Component,
    pub sign: ExitSign,
}

/// One observation along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Observation {
    pub modes: ModeDecomposition,
    pub membership: Membership,
    /// `w(0, s)`.
    pub center_w: f64,
    /// `sup_y |w(y, s) - f0(y / sqrt s)|`.
    pub sup_w_minus_f0: f64,
    /// Coefficient of `|y|^2 - 2n` in `w - 1`.
    pub wbar2: f64,
}

impl Observation {
    pub fn s(&self) -> f64 {
        self.modes.s
    }
}

#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub params: ProblemParams,
    pub dynamics: Dynamics,
    pub dy: f64,
    pub ds: f64,
    pub observations: Vec<Observation>,
    /// First exit from the shrinking set, if any occurred before `s_max`.
    pub exit: Option<ExitInfo>,
    pub s_max: f64,
    /// State at the last completed step.
    pub final_state: GridState,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectorySummary {
    pub params: ProblemParams,
    pub dynamics: Dynamics,
    pub dy: f64,
    pub ds: f64,
    pub y_max: f64,
    pub s_start: f64,
    pub s_end: f64,
    pub s_max: f64,
    pub survived: bool,
    pub exit: Option<ExitInfo>,
    pub observations: usize,
    pub mode_fits: Option<ModeOdeFit>,
}

impl TrajectoryRecord {
    pub fn survived(&self) -> bool {
        self.exit.is_none()
    }

    pub fn s_start(&self) -> f64 {
        self.observations.first().map(|o| o.s()).unwrap_or(self.final_state.s)
    }

    pub fn s_end(&self) -> f64 {
        self.final_state.s
    }

    pub const CSV_HEADER: &'static str =
        "s,q0,q1,q2,qminus_norm,qe_norm,member_flag,violator,center_w,sup_w_minus_f0,wbar2";

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for o in &self.observations {
            writeln!(
                out,
                "{},{:e},{:e},{:e}",
                o.modes.csv_row(&o.membership),
                o.center_w,
                o.sup_w_minus_f0,
                o.wbar2
            )?;
        }
        Ok(())
    }

    pub fn summary(&self) -> TrajectorySummary {
        let s_start = self.s_start();
        TrajectorySummary {
            params: self.params,
            dynamics: self.dynamics,
            dy: self.dy,
            ds: self.ds,
            y_max: self.final_state.grid.y_max(),
            s_start,
            s_end: self.s_end(),
            s_max: self.s_max,
            survived: self.survived(),
            exit: self.exit,
            observations: self.observations.len(),
            mode_fits: mode_ode_fit(self, s_start + 2.0, self.s_end()),
        }
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary()).expect("summary serializes")
    }

    /// Observations with `lo <= s <= hi`.
    pub fn window(&self, lo: f64, hi: f64) -> impl Iterator<Item = &Observation> {
        let tol = 1e-9;
        self.observations.iter().filter(move |o| o.s() >= lo - tol && o.s() <= hi + tol)
    }
}

/// Marches one of the [`Dynamics`] on a grid with classical RK4.
pub struct Integrator {
    ctx: Arc<TermContext>,
    grid: Arc<Grid>,
    decomposer: Decomposer,
    dynamics: Dynamics,
    ds: f64,
    k: [Vec<f64>; 4],
    stage: Vec<f64>,
}

impl Integrator {
    pub fn new(ctx: Arc<TermContext>, grid: Arc<Grid>, dynamics: Dynamics, ds: f64) -> Result<Self> {
        let limit = grid.step_limit();
        if !(ds > 0.0) || ds > limit * (1.0 + 1e-12) {
            return Err(Error::Cfl { ds, limit });
        }
        if grid.dim() != ctx.params().n {
            return Err(Error::InvalidParameter(format!(
                "grid dimension {} but n = {}",
                grid.dim(),
                ctx.params().n
            )));
        }
        let decomposer = Decomposer::new(grid.clone(), ctx.params().k)?;
        let len = grid.len();
        Ok(Self {
            ctx,
            grid,
            decomposer,
            dynamics,
            ds,
            k: [vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len]],
            stage: vec![0.0; len],
        })
    }

    pub fn ds(&self) -> f64 {
        self.ds
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn context(&self) -> &Arc<TermContext> {
        &self.ctx
    }

    pub fn decomposer(&self) -> &Decomposer {
        &self.decomposer
    }

    pub fn dynamics(&self) -> Dynamics {
        self.dynamics
    }

    /// Right-hand side of the selected dynamics.
    pub fn rhs(&self, s: f64, u: &[f64], out: &mut [f64]) -> Result<()> {
        rhs_into(&self.ctx, &self.grid, self.dynamics, s, u, out)
    }

    /// One RK4 step of size `ds` in place.
    pub fn step(&mut self, state: &mut GridState) -> Result<()> {
        let ds = self.ds;
        self.step_by(state, ds)
    }

    fn step_by(&mut self, state: &mut GridState, ds: f64) -> Result<()> {
        let s = state.s;
        let [k1, k2, k3, k4] = &mut self.k;
        let u = &state.w;
        let stage = &mut self.stage;
        rhs_into(&self.ctx, &self.grid, self.dynamics, s, u, k1)?;
        for i in 0..u.len() {
            stage[i] = u[i] + 0.5 * ds * k1[i];
        }
        rhs_into(&self.ctx, &self.grid, self.dynamics, s + 0.5 * ds, stage, k2)?;
        for i in 0..u.len() {
            stage[i] = u[i] + 0.5 * ds * k2[i];
        }
        rhs_into(&self.ctx, &self.grid, self.dynamics, s + 0.5 * ds, stage, k3)?;
        for i in 0..u.len() {
            stage[i] = u[i] + ds * k3[i];
        }
        rhs_into(&self.ctx, &self.grid, self.dynamics, s + ds, stage, k4)?;
        let w = &mut state.w;
        let sixth = ds / 6.0;
        for i in 0..w.len() {
            w[i] += sixth * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
        }
        state.s = s + ds;
        Ok(())
    }

    /// Steps until `s_end` (the last step is shortened to land exactly).
    pub fn advance(&mut self, state: &mut GridState, s_end: f64) -> Result<()> {
        let steps = ((s_end - state.s) / self.ds - 1e-9).ceil().max(0.0) as usize;
        if steps == 0 {
            return Ok(());
        }
        let h = (s_end - state.s) / steps as f64;
        for _ in 0..steps {
            self.step_by(state, h)?;
        }
        state.s = s_end;
        Ok(())
    }

    /// Splits the state into `(w, q)` at its time.
    fn split(&self, state: &GridState) -> (Vec<f64>, Vec<f64>) {
        let profile = self.ctx.profile();
        let s = state.s;
        match self.dynamics {
            Dynamics::W => {
                let q = state
                    .w
                    .iter()
                    .zip(self.grid.nodes())
                    .map(|(&w, &y)| w - profile.varphi(y, s))
                    .collect();
                (state.w.clone(), q)
            }
            Dynamics::Q => {
                let w = state
                    .w
                    .iter()
                    .zip(self.grid.nodes())
                    .map(|(&q, &y)| q + profile.varphi(y, s))
                    .collect();
                (w, state.w.clone())
            }
            Dynamics::Linear | Dynamics::LinearWithPotential => {
                let w = state.w.iter().map(|&t| t + 1.0).collect();
                (w, state.w.clone())
            }
        }
    }

    /// Decomposition and diagnostics of the current state.
    pub fn observe(&self, state: &GridState, spec: &ShrinkingSetSpec) -> Result<Observation> {
        let (w, q) = self.split(state);
        let s = state.s;
        let modes = self.decomposer.decompose(&q, s)?;
        let membership = spec.classify(&modes);
        let profile = self.ctx.profile();
        let root_s = s.sqrt();
        let sup_w_minus_f0 = w
            .iter()
            .zip(self.grid.nodes())
            .map(|(&wv, &y)| (wv - profile.f0(y / root_s)).abs())
            .fold(0.0, f64::max);
        let wbar: Vec<f64> = w.iter().map(|v| v - 1.0).collect();
        Ok(Observation {
            modes,
            membership,
            center_w: w[self.grid.origin()],
            sup_w_minus_f0,
            wbar2: self.decomposer.quadratic_coefficient(&wbar),
        })
    }

    /// Marches from `initial` to `s_max`, observing every `observe_every`
    /// units; with `stop_on_exit` the run ends at the first observation
    /// outside the shrinking set.
    pub fn run(
        &mut self,
        initial: GridState,
        s_max: f64,
        spec: &ShrinkingSetSpec,
        observe_every: f64,
        stop_on_exit: bool,
    ) -> Result<TrajectoryRecord> {
        if !Arc::ptr_eq(&initial.grid, &self.grid) && initial.grid.nodes() != self.grid.nodes() {
            return Err(Error::InvalidParameter("initial state lives on another grid".into()));
        }
        if !(observe_every >= self.ds * (1.0 - 1e-9)) {
            return Err(Error::InvalidParameter(format!(
                "observation interval {observe_every} below the step {}",
                self.ds
            )));
        }
        if !initial.is_finite() {
            return Err(Error::InvalidParameter("initial state is not finite".into()));
        }
        let s0 = initial.s;
        let steps_per_obs = (observe_every / self.ds).round().max(1.0) as usize;
        let total_steps = ((s_max - s0) / self.ds - 1e-9).ceil().max(0.0) as usize;
        let ds = if total_steps > 0 { (s_max - s0) / total_steps as f64 } else { self.ds };

        let mut record = TrajectoryRecord {
            params: *self.ctx.params(),
            dynamics: self.dynamics,
            dy: self.grid.dy(),
            ds,
            observations: Vec::with_capacity(total_steps / steps_per_obs + 2),
            exit: None,
            s_max,
            final_state: initial.clone(),
        };
        let mut state = initial;
        let take = |integ: &Self, state: &GridState, record: &mut TrajectoryRecord| -> Result<bool> {
            let obs = integ.observe(state, spec)?;
            let exit = (!obs.membership.member).then(|| {
                let violator = obs.membership.violator.unwrap_or(Component::Q0);
                let value = obs.modes.components()[violator.index()];
                ExitInfo {
                    exit_s: state.s,
                    violator,
                    sign: ExitSign::of(value),
                }
            });
            record.observations.push(obs);
            if let Some(e) = exit {
                if record.exit.is_none() {
                    record.exit = Some(e);
                }
                return Ok(stop_on_exit);
            }
            Ok(false)
        };

        if take(self, &state, &mut record)? {
            record.final_state = state;
            return Ok(record);
        }
        for k in 1..=total_steps {
            let last_valid = state.s;
            self.step_by(&mut state, ds)?;
            state.s = s0 + k as f64 * ds;
            if !state.is_finite() {
                record.final_state = GridState {
                    s: last_valid,
                    grid: state.grid.clone(),
                    w: vec![f64::NAN; state.w.len()],
                };
                return Err(Error::PoisonedState {
                    last_valid_s: last_valid,
                    partial: Box::new(record),
                });
            }
            if (k % steps_per_obs == 0 || k == total_steps) && take(self, &state, &mut record)? {
                break;
            }
        }
        record.final_state = state;
        Ok(record)
    }
}

fn rhs_into(
    ctx: &TermContext,
    grid: &Grid,
    dynamics: Dynamics,
    s: f64,
    u: &[f64],
    out: &mut [f64],
) -> Result<()> {
    grid.apply_drift_diffusion(u, out);
    match dynamics {
        Dynamics::W => {
            let at = ctx.at(s)?;
            for (o, &w) in out.iter_mut().zip(u) {
                *o += at.reaction(w);
            }
        }
        Dynamics::Q => {
            let at = ctx.at(s)?;
            let profile = ctx.profile();
            for ((o, &q), &y) in out.iter_mut().zip(u).zip(grid.nodes()) {
                let d = profile.derivs(y, s);
                let v = ctx.potential_of_phi(d.phi);
                let r = ctx.remainder_of(&d);
                let b = ctx.nonlinear_b(q, d.phi);
                let dd = at.d_of_v(q + d.phi, y)?;
                *o += q + v * q + b + r + dd;
            }
        }
        Dynamics::Linear => {
            for (o, &t) in out.iter_mut().zip(u) {
                *o += t;
            }
        }
        Dynamics::LinearWithPotential => {
            let profile = ctx.profile();
            for ((o, &t), &y) in out.iter_mut().zip(u).zip(grid.nodes()) {
                *o += t + ctx.potential_of_phi(profile.varphi(y, s)) * t;
            }
        }
    }
    Ok(())
}

/// `dw/ds` of the `w`-equation on the state's grid.
pub fn rhs_w(state: &GridState, ctx: &TermContext) -> Result<Vec<f64>> {
    let mut out = vec![0.0; state.w.len()];
    rhs_into(ctx, &state.grid, Dynamics::W, state.s, &state.w, &mut out)?;
    Ok(out)
}

/// Fitted constants of the mode equations along a trajectory window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeOdeFit {
    pub s_lo: f64,
    pub s_hi: f64,
    /// `max s^2 |q0' - q0|`.
    pub c_q0: f64,
    /// `max s^2 |q1' - q1/2|`.
    pub c_q1: f64,
    /// `max s^3 / ln s |q2' + (2/s) q2|`.
    pub c_q2: f64,
}

/// Central-difference residuals of the mode equations on `[s_lo, s_hi]`.
pub fn mode_ode_fit(traj: &TrajectoryRecord, s_lo: f64, s_hi: f64) -> Option<ModeOdeFit> {
    let obs: Vec<&Observation> = traj.observations.iter().collect();
    let mut fit = ModeOdeFit {
        s_lo,
        s_hi,
        c_q0: 0.0,
        c_q1: 0.0,
        c_q2: 0.0,
    };
    let mut any = false;
    for w in obs.windows(3) {
        let (a, b, c) = (&w[0].modes, &w[1].modes, &w[2].modes);
        let s = b.s;
        if s < s_lo - 1e-9 || s > s_hi + 1e-9 {
            continue;
        }
        let span = c.s - a.s;
        let d0 = (c.q0 - a.q0) / span;
        let d1 = (c.q1 - a.q1) / span;
        let d2 = (c.q2 - a.q2) / span;
        fit.c_q0 = fit.c_q0.max(s * s * (d0 - b.q0).abs());
        fit.c_q1 = fit.c_q1.max(s * s * (d1 - 0.5 * b.q1).abs());
        fit.c_q2 = fit.c_q2.max(s.powi(3) / s.ln() * (d2 + 2.0 / s * b.q2).abs());
        any = true;
    }
    any.then_some(fit)
}

/// Measured norms of `theta = K(s, sigma) v` against the linear-kernel templates.
#[derive(Debug, Clone, Serialize)]
pub struct KernelBoundReport {
    pub sigma: f64,
    pub rho_star: f64,
    /// `(s, ||theta_-/(1+|y|^3)||, ||theta_e||)`.
    pub series: Vec<(f64, f64, f64)>,
    /// `max ||theta_-|| / template_-`.
    pub c_minus: f64,
    /// `max ||theta_e|| / template_e`.
    pub c_outer: f64,
    /// `-d ln ||theta_e|| / ds` from a least-squares fit, when defined.
    pub outer_decay_rate: Option<f64>,
}

/// Propagates `v` under `(L + V)` on `[sigma, sigma + rho_star]`.
pub fn verify_kernel_bounds(
    v: &GridState,
    rho_star: f64,
    ctx: Arc<TermContext>,
    ds: f64,
) -> Result<KernelBoundReport> {
    let sigma = v.s;
    let p = ctx.params().p;
    let mut integ = Integrator::new(ctx.clone(), v.grid.clone(), Dynamics::LinearWithPotential, ds)?;
    let spec = ShrinkingSetSpec::new(ctx.params().a);
    let traj = integ.run(v.clone(), sigma + rho_star, &spec, 0.05f64.max(ds), false)?;
    let v0 = &traj.observations[0].modes;
    let mut series = Vec::new();
    let (mut c_minus, mut c_outer) = (0.0f64, 0.0f64);
    for o in traj.observations.iter().skip(1) {
        let s = o.s();
        let tau = s - sigma;
        let low = v0.q0.abs() + v0.q1.abs() + s.sqrt() * v0.q2.abs();
        let t_minus = tau.exp() * (tau * tau + 1.0) / s * low
            + (-0.5 * tau).exp() * v0.qminus_norm
            + (-tau * tau).exp() / s.powf(1.5) * v0.qe_norm;
        let t_outer = tau.exp() * (v0.q0.abs() + s.sqrt() * v0.q1.abs() + s * v0.q2.abs() + s.powf(1.5) * v0.qminus_norm)
            + (-tau / p).exp() * v0.qe_norm;
        if t_minus > 0.0 {
            c_minus = c_minus.max(o.modes.qminus_norm / t_minus);
        }
        if t_outer > 0.0 {
            c_outer = c_outer.max(o.modes.qe_norm / t_outer);
        }
        series.push((s, o.modes.qminus_norm, o.modes.qe_norm));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = series
        .iter()
        .filter(|e| e.2 > 0.0)
        .map(|e| (e.0, e.2.ln()))
        .unzip();
    let outer_decay_rate = linear_fit(&xs, &ys).map(|(_, slope)| -slope);
    Ok(KernelBoundReport {
        sigma,
        rho_star,
        series,
        c_minus,
        c_outer,
        outer_decay_rate,
    })
}
