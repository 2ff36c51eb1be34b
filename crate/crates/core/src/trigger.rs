//! Certainty-equivalence control law, event schedule, trigger margin, and
//! the hybrid closed-loop runner.
//!
//! Between events the loop integrates the plant together with the
//! identifier accumulator under a frozen estimate; the trigger margin
//!
//! ```text
//! V(theta_hat, x(t)) - Q(theta_hat, x(tau_i)) - a(x(tau_i)) - eps
//! ```
//!
//! is watched on the dense interpolant and its first zero up-crossing (or
//! the dwell cap `tau_i + T`, whichever comes first) defines the next
//! event. At each event the estimate is rebuilt from the windowed Gram
//! system and integration restarts, so every segment has a smooth
//! right-hand side and solutions are right differentiable at events.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::identifier::{
    self, GramSystem, IdentifierState, Snapshot, UpdatePolicy, UpdateReport, WindowSpec,
};
use crate::linalg;
use crate::ode::{self, EventOutcome, IntegratorConfig, Trajectory};
use crate::systems::{self, PlantModel};

/// States with norm at or below this are treated as the origin when arming
/// the trigger (exact zeros are measure-zero in floating point).
pub const ZERO_STATE_TOL: f64 = 1e-12;
/// Estimate error threshold defining the parameter-convergence time.
pub const CONVERGENCE_TOL: f64 = 1e-5;
/// Hard cap on event counts; beyond this the run is declared a runaway.
pub const MAX_EVENTS: usize = 1_000_000;

pub type DisturbFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;
/// `(theta_hat, x_at_tau, x_now) -> margin`; negative means no event.
pub type MarginFn = dyn Fn(&[f64], &[f64], &[f64]) -> f64 + Send + Sync;
/// `(theta, x, u_out)`: writes the control input.
pub type FeedbackFn = dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync;
/// `(theta, x) -> scalar`, for Lyapunov-type functions.
pub type LyapunovFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;
/// `x -> a(x)`, the trigger threshold offset.
pub type ThresholdFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

#[derive(Debug)]
pub enum SimError {
    Setup(&'static str),
    Ode(ode::OdeError),
    Identifier(identifier::IdentifierError),
    EventStorm { events: usize },
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::Setup(what) => write!(f, "invalid setup: {what}"),
            SimError::Ode(e) => write!(f, "integration failed: {e}"),
            SimError::Identifier(e) => write!(f, "identifier failed: {e}"),
            SimError::EventStorm { events } => {
                write!(f, "runaway event sequence ({events} events)")
            }
        }
    }
}

impl core::error::Error for SimError {}

impl From<ode::OdeError> for SimError {
    fn from(e: ode::OdeError) -> Self {
        SimError::Ode(e)
    }
}

impl From<identifier::IdentifierError> for SimError {
    fn from(e: identifier::IdentifierError) -> Self {
        SimError::Identifier(e)
    }
}

/// Nominal certainty-equivalence design: feedback `k(theta, x)` with its
/// Lyapunov pair `V`, `Q` (for a control Lyapunov function design the two
/// coincide). `k(theta, 0) = 0` for every parameter.
pub struct NominalController {
    /// Input dimension written by `k`.
    pub m: usize,
    pub k: Box<FeedbackFn>,
    pub v: Box<LyapunovFn>,
    pub q_fn: Box<LyapunovFn>,
}

impl NominalController {
    pub fn eval_k(&self, theta: &[f64], x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.m);
        (self.k)(theta, x, out);
    }

    pub fn eval_v(&self, theta: &[f64], x: &[f64]) -> f64 {
        (self.v)(theta, x)
    }

    pub fn eval_q(&self, theta: &[f64], x: &[f64]) -> f64 {
        (self.q_fn)(theta, x)
    }
}

impl fmt::Debug for NominalController {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NominalController")
            .field("m", &self.m)
            .finish()
    }
}

/// The control input `k(theta_hat, x)`.
pub fn control(ctrl: &NominalController, theta_hat: &[f64], x: &[f64]) -> Vec<f64> {
    let mut u = vec![0.0; ctrl.m];
    ctrl.eval_k(theta_hat, x, &mut u);
    u
}

/// Event schedule: the next event is the guard time capped by the dwell
/// bound. `r_i` may be infinite when the guard level is never reached.
pub fn next_event_time(tau_i: f64, t_dwell: f64, r_i: f64) -> f64 {
    (tau_i + t_dwell).min(r_i)
}

/// Trigger parameters: dwell cap `T`, threshold offset `a(x)`, and the
/// dead-zone constant `eps` added to the threshold.
pub struct TriggerConfig {
    pub t_dwell: f64,
    pub eps: f64,
    pub a_fn: Box<ThresholdFn>,
    /// Replaces the Lyapunov margin wholesale (the norm trigger of the
    /// linear specialization); `eps` is still subtracted.
    pub margin_override: Option<Box<MarginFn>>,
}

impl TriggerConfig {
    /// Standard Lyapunov-threshold trigger with `a(x) = a_scale |x|^2`.
    pub fn quadratic(t_dwell: f64, a_scale: f64, eps: f64) -> Self {
        TriggerConfig {
            t_dwell,
            eps,
            a_fn: Box::new(move |x| a_scale * linalg::norm_sq(x)),
            margin_override: None,
        }
    }

    /// Signed trigger margin; the event fires at the first zero up-crossing.
    pub fn margin(
        &self,
        ctrl: &NominalController,
        theta_hat: &[f64],
        x_at_tau: &[f64],
        x_now: &[f64],
    ) -> f64 {
        let raw = match &self.margin_override {
            Some(m) => m(theta_hat, x_at_tau, x_now),
            None => {
                ctrl.eval_v(theta_hat, x_now)
                    - ctrl.eval_q(theta_hat, x_at_tau)
                    - (self.a_fn)(x_at_tau)
            }
        };
        raw - self.eps
    }
}

impl fmt::Debug for TriggerConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TriggerConfig")
            .field("t_dwell", &self.t_dwell)
            .field("eps", &self.eps)
            .field("margin_override", &self.margin_override.is_some())
            .finish()
    }
}

/// Free convenience wrapper over [`TriggerConfig::margin`].
pub fn guard_margin(
    ctrl: &NominalController,
    trig: &TriggerConfig,
    theta_hat: &[f64],
    x_at_tau: &[f64],
    x_now: &[f64],
) -> f64 {
    trig.margin(ctrl, theta_hat, x_at_tau, x_now)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventCause {
    /// The run start `tau_0 = 0`.
    InitialEvent,
    GuardCrossed,
    DwellCap,
}

impl EventCause {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventCause::InitialEvent => "initial",
            EventCause::GuardCrossed => "guard",
            EventCause::DwellCap => "dwell",
        }
    }
}

/// One event of the hybrid run with everything needed to rebuild its
/// window: the accumulator snapshot taken at the event time.
#[derive(Debug, Clone)]
pub struct EventRecord {
    pub index: usize,
    pub tau: f64,
    pub x_at_tau: Vec<f64>,
    pub theta_before: Vec<f64>,
    pub theta_after: Vec<f64>,
    pub snapshot: Snapshot,
    pub cause: EventCause,
    /// Absent on the initial event, which performs no update.
    pub update: Option<UpdateReport>,
}

/// Which identifier feeds the update at events.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IdVariant {
    /// Windowed symmetric double-integral identifier (snapshot algebra).
    DoubleIntegral,
    /// Windowed single-integral identifier anchored at the window start.
    SingleIntegral,
    /// Dedicated cumulative scalar block for the robustness-study plant;
    /// updates by gated quotient and requires the window start pinned at
    /// time zero (`t_end <= n_tilde * T`).
    ScalarCumulative { eps: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunKind {
    EventTriggered,
    Nominal,
    ExtendedMatching,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    /// Time of the first event after the run start, if any.
    pub first_event_time: Option<f64>,
    /// Events after the initial one.
    pub event_count: usize,
    pub guard_event_count: usize,
    pub dwell_event_count: usize,
    /// Non-skipped updates whose constraint rank fell short of the
    /// parameter dimension.
    pub rank_deficient_updates: usize,
    /// First event time at which `|theta_hat - theta_true|` dropped to
    /// [`CONVERGENCE_TOL`].
    pub convergence_time: Option<f64>,
    pub sup_norm_x: f64,
    pub final_norm_x: f64,
}

/// Full record of one closed-loop run: dense trajectory of the augmented
/// state, the estimate staircase, the event list and summary statistics.
#[derive(Debug)]
pub struct RunResult {
    pub kind: RunKind,
    pub n: usize,
    pub l: usize,
    pub t0: f64,
    pub t_end: f64,
    pub trajectory: Trajectory,
    /// `(t, theta_hat)` knots: the estimate held from `t` onward.
    pub pieces: Vec<(f64, Vec<f64>)>,
    pub events: Vec<EventRecord>,
    pub summary: RunSummary,
}

impl RunResult {
    /// Full augmented state at `t`.
    pub fn state_at(&self, t: f64) -> Vec<f64> {
        self.trajectory.eval(t)
    }

    /// Plant state at `t`.
    pub fn x_at(&self, t: f64) -> Vec<f64> {
        let mut y = self.trajectory.eval(t);
        y.truncate(self.n);
        y
    }

    /// Estimate in effect at `t` (right-continuous staircase; for the
    /// continuous-tuning comparator the estimate is a state component).
    pub fn theta_at(&self, t: f64) -> Vec<f64> {
        match self.kind {
            RunKind::ExtendedMatching => {
                let y = self.trajectory.eval(t);
                y[self.n..self.n + self.l].to_vec()
            }
            _ => {
                let idx = self.pieces.partition_point(|(ts, _)| *ts <= t);
                self.pieces[idx.saturating_sub(1)].1.clone()
            }
        }
    }

    /// Recomputes summary statistics against a reference parameter.
    pub fn compute_summary(&self, theta_true: &[f64]) -> RunSummary {
        let mut s = RunSummary {
            first_event_time: self.events.get(1).map(|e| e.tau),
            ..RunSummary::default()
        };
        for e in self.events.iter().skip(1) {
            s.event_count += 1;
            match e.cause {
                EventCause::GuardCrossed => s.guard_event_count += 1,
                EventCause::DwellCap => s.dwell_event_count += 1,
                EventCause::InitialEvent => {}
            }
            if let Some(up) = &e.update {
                if !up.skipped && up.rank < self.l {
                    s.rank_deficient_updates += 1;
                }
            }
        }
        match self.kind {
            RunKind::ExtendedMatching => {
                // Continuous estimate: scan the dense trajectory.
                s.convergence_time = self.scan_convergence(theta_true);
            }
            _ => {
                s.convergence_time = self
                    .events
                    .iter()
                    .find(|e| {
                        linalg::norm(&linalg::sub_vec(&e.theta_after, theta_true))
                            <= CONVERGENCE_TOL
                    })
                    .map(|e| e.tau);
            }
        }
        let mut sup = 0.0f64;
        let mut probe = vec![0.0; self.trajectory.steps.first().map_or(0, |st| st.dim())];
        for st in &self.trajectory.steps {
            for k in 0..=3 {
                let t = st.t0 + (st.t1 - st.t0) * k as f64 / 3.0;
                st.eval_into(t, &mut probe);
                sup = sup.max(linalg::norm(&probe[..self.n]));
            }
        }
        s.sup_norm_x = sup;
        s.final_norm_x = linalg::norm(&self.x_at(self.t_end));
        s
    }

    fn scan_convergence(&self, theta_true: &[f64]) -> Option<f64> {
        let mut probe = vec![0.0; self.trajectory.steps.first().map_or(0, |st| st.dim())];
        for st in &self.trajectory.steps {
            for k in 0..=8 {
                let t = st.t0 + (st.t1 - st.t0) * k as f64 / 8.0;
                st.eval_into(t, &mut probe);
                let th = &probe[self.n..self.n + self.l];
                if linalg::norm(&linalg::sub_vec(th, theta_true)) <= CONVERGENCE_TOL {
                    return Some(t);
                }
            }
        }
        None
    }
}

/// Everything one event-triggered closed-loop run needs.
pub struct ClosedLoopSetup<'a> {
    pub plant: &'a PlantModel,
    pub controller: &'a NominalController,
    pub trigger: &'a TriggerConfig,
    /// Window length multiplier; must exceed the plant's observability
    /// constant for the finite-time guarantee to apply.
    pub n_tilde: usize,
    pub policy: UpdatePolicy,
    pub variant: IdVariant,
    pub theta_true: &'a [f64],
    pub theta_hat0: &'a [f64],
    pub x0: &'a [f64],
    pub t_end: f64,
    pub integrator: IntegratorConfig,
    pub disturbance: Option<&'a DisturbFn>,
}

/// Runs the hybrid closed loop from `t = 0`.
pub fn run_closed_loop(setup: &ClosedLoopSetup<'_>) -> Result<RunResult, SimError> {
    let plant = setup.plant;
    let ctrl = setup.controller;
    let trig = setup.trigger;
    let (n, m, l) = (plant.n, plant.m, plant.l);

    if ctrl.m != m {
        return Err(SimError::Setup(
            "controller input dimension disagrees with plant",
        ));
    }
    if setup.theta_true.len() != l || setup.theta_hat0.len() != l {
        return Err(SimError::Setup("parameter dimension disagrees with plant"));
    }
    if setup.x0.len() != n {
        return Err(SimError::Setup(
            "initial state dimension disagrees with plant",
        ));
    }
    if !setup.x0.iter().all(|v| v.is_finite()) {
        return Err(SimError::Setup("initial state must be finite"));
    }
    if !setup.t_end.is_finite() || setup.t_end <= 0.0 {
        return Err(SimError::Setup("t_end must be positive"));
    }
    if !trig.t_dwell.is_finite() || trig.t_dwell <= 0.0 {
        return Err(SimError::Setup("dwell cap T must be positive"));
    }
    if setup.n_tilde < 1 {
        return Err(SimError::Setup("window multiplier must be at least 1"));
    }
    let scalar_block = matches!(setup.variant, IdVariant::ScalarCumulative { .. });
    if scalar_block {
        if n != 2 || l != 1 {
            return Err(SimError::Setup(
                "the cumulative scalar identifier is specific to the two-state scalar-parameter plant",
            ));
        }
        if setup.t_end > setup.n_tilde as f64 * trig.t_dwell {
            return Err(SimError::Setup(
                "the cumulative scalar identifier needs the window start pinned at zero (t_end <= n_tilde * T)",
            ));
        }
    }
    setup.integrator.validate()?;

    let acc_len = IdentifierState::flat_len(n, l);
    let dim = n
        + acc_len
        + if scalar_block {
            systems::SCALAR_LS_DIM
        } else {
            0
        };
    let window = WindowSpec {
        n_tilde: setup.n_tilde,
        t_dwell: trig.t_dwell,
    };

    let mut t = 0.0;
    let mut y = vec![0.0; dim];
    y[..n].copy_from_slice(setup.x0);
    let mut theta = setup.theta_hat0.to_vec();

    let mut result = RunResult {
        kind: RunKind::EventTriggered,
        n,
        l,
        t0: 0.0,
        t_end: setup.t_end,
        trajectory: Trajectory::default(),
        pieces: vec![(0.0, theta.clone())],
        events: Vec::new(),
        summary: RunSummary::default(),
    };
    result.events.push(EventRecord {
        index: 0,
        tau: 0.0,
        x_at_tau: setup.x0.to_vec(),
        theta_before: theta.clone(),
        theta_after: theta.clone(),
        snapshot: Snapshot::from_augmented(n, l, 0.0, &y),
        cause: EventCause::InitialEvent,
        update: None,
    });
    let mut event_times = vec![0.0];

    loop {
        let theta_seg = theta.clone();
        let x_tau: Vec<f64> = y[..n].to_vec();
        let t_cap = (t + trig.t_dwell).min(setup.t_end);

        // Segment right-hand side under the frozen estimate. The true
        // parameter enters only the plant state; the accumulator sees the
        // nominal maps and the measured state.
        let mut u_buf = vec![0.0; m];
        let mut f_buf = vec![0.0; n];
        let mut g_buf = vec![0.0; n * l];
        let theta_rhs = theta_seg.clone();
        let mut rhs = |tt: f64, yy: &[f64], dyy: &mut [f64]| {
            let x = &yy[..n];
            ctrl.eval_k(&theta_rhs, x, &mut u_buf);
            plant.eval_f(x, &u_buf, &mut f_buf);
            plant.eval_g(x, &u_buf, &mut g_buf);
            for i in 0..n {
                let mut dx = f_buf[i];
                for j in 0..l {
                    dx += g_buf[i * l + j] * setup.theta_true[j];
                }
                dyy[i] = dx;
            }
            if let Some(d) = setup.disturbance {
                d(tt, x, &mut dyy[..n]);
            }
            identifier::accumulator_rhs_flat(
                n,
                l,
                x,
                &f_buf,
                &g_buf,
                &yy[n..n + acc_len],
                &mut dyy[n..n + acc_len],
            );
            if scalar_block {
                systems::scalar_ls_rhs(x, &yy[n + acc_len..], &mut dyy[n + acc_len..]);
            }
        };

        // The trigger stays disarmed from the origin unless the dead-zone
        // offset keeps the threshold positive there.
        let armed = linalg::norm(&x_tau) > ZERO_STATE_TOL || trig.eps > 0.0;
        let margin_now = trig.margin(ctrl, &theta_seg, &x_tau, &x_tau);

        let (event, y_after, traj) = if armed && margin_now >= 0.0 {
            // Margin already non-negative at the event (possible under
            // disturbances or dead-zone corner cases): schedule the next
            // event one localization width ahead instead of instantly.
            let te = (t + setup.integrator.event_tol).min(t_cap);
            let (y_end, traj) = ode::integrate(&mut rhs, &setup.integrator, t, &y, te)?;
            (Some((te, EventCause::GuardCrossed)), y_end, traj)
        } else if armed {
            let theta_gd = theta_seg.clone();
            let x_tau_gd = x_tau.clone();
            let mut guard =
                |_tt: f64, yy: &[f64]| trig.margin(ctrl, &theta_gd, &x_tau_gd, &yy[..n]);
            let (outcome, traj) =
                ode::integrate_with_guard(&mut rhs, &mut guard, &setup.integrator, t, &y, t_cap)?;
            match outcome {
                EventOutcome::Event { t: te, y: ye } => {
                    (Some((te, EventCause::GuardCrossed)), ye, traj)
                }
                EventOutcome::ReachedEnd { y: ye } => {
                    let cause = if t_cap < setup.t_end {
                        Some((t_cap, EventCause::DwellCap))
                    } else {
                        None
                    };
                    (cause, ye, traj)
                }
            }
        } else {
            let (y_end, traj) = ode::integrate(&mut rhs, &setup.integrator, t, &y, t_cap)?;
            let cause = if t_cap < setup.t_end {
                Some((t_cap, EventCause::DwellCap))
            } else {
                None
            };
            (cause, y_end, traj)
        };

        result.trajectory.steps.extend(traj.steps);
        y = y_after;

        let (tau_next, cause) = match event {
            Some(ev) => ev,
            None => break,
        };
        t = tau_next;

        if result.events.len() >= MAX_EVENTS {
            return Err(SimError::EventStorm {
                events: result.events.len(),
            });
        }

        // Parameter update from the window ending at this event.
        let index = result.events.len();
        let snapshot = Snapshot::from_augmented(n, l, t, &y);
        event_times.push(t);
        let theta_before = theta.clone();
        let (theta_after, report) = match setup.variant {
            IdVariant::ScalarCumulative { eps } => {
                let block = &y[n + acc_len..];
                let (th, rep) = systems::scalar_ls_update(block, eps, theta_before[0]);
                (vec![th], rep)
            }
            _ => {
                let (_mu_t, mu_idx) = identifier::mu_index(&event_times, index - 1, &window);
                let gram: GramSystem = match setup.variant {
                    IdVariant::DoubleIntegral => {
                        identifier::gram_from_snapshots(&snapshot, &result.events[mu_idx].snapshot)?
                    }
                    IdVariant::SingleIntegral => identifier::gram_single_integral(
                        &snapshot,
                        &result.events[mu_idx].snapshot,
                    )?,
                    IdVariant::ScalarCumulative { .. } => unreachable!(),
                };
                identifier::update_estimate(&theta_before, &gram, setup.policy)?
            }
        };

        result.events.push(EventRecord {
            index,
            tau: t,
            x_at_tau: y[..n].to_vec(),
            theta_before,
            theta_after: theta_after.clone(),
            snapshot,
            cause,
            update: Some(report),
        });
        result.pieces.push((t, theta_after.clone()));
        theta = theta_after;

        if t >= setup.t_end {
            break;
        }
    }

    result.summary = result.compute_summary(setup.theta_true);
    Ok(result)
}

/// Integrates the nominal known-parameter closed loop (no events, no
/// identifier) from `(t0, x0)`; the baseline every scenario is compared
/// against.
#[allow(clippy::too_many_arguments)]
pub fn run_nominal(
    plant: &PlantModel,
    ctrl: &NominalController,
    theta: &[f64],
    t0: f64,
    x0: &[f64],
    t_end: f64,
    cfg: &IntegratorConfig,
    disturbance: Option<&DisturbFn>,
) -> Result<RunResult, SimError> {
    let (n, m, l) = (plant.n, plant.m, plant.l);
    if theta.len() != l || x0.len() != n || ctrl.m != m {
        return Err(SimError::Setup("dimension mismatch in nominal run"));
    }
    if !t_end.is_finite() || t_end <= t0 {
        return Err(SimError::Setup("t_end must exceed t0"));
    }
    let mut u_buf = vec![0.0; m];
    let mut f_buf = vec![0.0; n];
    let mut g_buf = vec![0.0; n * l];
    let mut rhs = |tt: f64, x: &[f64], dx: &mut [f64]| {
        ctrl.eval_k(theta, x, &mut u_buf);
        plant.eval_f(x, &u_buf, &mut f_buf);
        plant.eval_g(x, &u_buf, &mut g_buf);
        for i in 0..n {
            let mut v = f_buf[i];
            for j in 0..l {
                v += g_buf[i * l + j] * theta[j];
            }
            dx[i] = v;
        }
        if let Some(d) = disturbance {
            d(tt, x, dx);
        }
    };
    let (_y_end, traj) = ode::integrate(&mut rhs, cfg, t0, x0, t_end)?;
    let mut result = RunResult {
        kind: RunKind::Nominal,
        n,
        l,
        t0,
        t_end,
        trajectory: traj,
        pieces: vec![(t0, theta.to_vec())],
        events: Vec::new(),
        summary: RunSummary::default(),
    };
    result.summary = result.compute_summary(theta);
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{example_disturbed, example_planar};

    fn quick_cfg() -> IntegratorConfig {
        IntegratorConfig::default()
    }

    #[test]
    fn control_at_origin_is_zero() {
        let entry = example_planar();
        assert_eq!(
            control(&entry.controller, &[0.4, -0.9], &[0.0, 0.0]),
            vec![0.0]
        );
    }

    #[test]
    fn control_hand_values() {
        let planar = example_planar();
        assert_eq!(
            control(&planar.controller, &[0.0, 0.0], &[1.0, 0.0]),
            vec![-2.0]
        );
        let disturbed = example_disturbed();
        assert_eq!(
            control(&disturbed.controller, &[1.0], &[1.0, 1.0]),
            vec![-159.0]
        );
    }

    #[test]
    fn guard_margin_hand_value() {
        // theta_hat = -4 at x = (1,1): V = 1, threshold = 1 + |x|^2/20.
        let entry = example_disturbed();
        let trig = TriggerConfig::quadratic(3.0, 1.0 / 20.0, 0.0);
        let m = guard_margin(&entry.controller, &trig, &[-4.0], &[1.0, 1.0], &[1.0, 1.0]);
        assert!((m + 0.1).abs() < 1e-12);
    }

    #[test]
    fn guard_starts_armed_low() {
        let entry = example_planar();
        let trig = TriggerConfig::quadratic(1.0, 1.0 / 20.0, 0.0);
        let x = [0.7, -0.4];
        let m = guard_margin(&entry.controller, &trig, &[0.1, 0.2], &x, &x);
        assert!(m < 0.0);
    }

    #[test]
    fn schedule_takes_the_earlier_of_guard_and_dwell() {
        assert_eq!(next_event_time(0.0, 3.0, 0.02), 0.02);
        assert_eq!(next_event_time(0.0, 3.0, f64::INFINITY), 3.0);
        assert_eq!(next_event_time(6.0, 3.0, 100.0), 9.0);
    }

    #[test]
    fn equilibrium_start_never_updates() {
        let entry = example_planar();
        let trig = TriggerConfig::quadratic(0.5, 1.0 / 20.0, 0.0);
        let setup = ClosedLoopSetup {
            plant: &entry.plant,
            controller: &entry.controller,
            trigger: &trig,
            n_tilde: 3,
            policy: UpdatePolicy::MinNorm { rank_tol: 1e-9 },
            variant: IdVariant::DoubleIntegral,
            theta_true: &[0.8, -0.3],
            theta_hat0: &[-1.0, 2.0],
            x0: &[0.0, 0.0],
            t_end: 2.0,
            integrator: quick_cfg(),
            disturbance: None,
        };
        let r = run_closed_loop(&setup).unwrap();
        // Only dwell events, state pinned at the origin, estimate untouched.
        assert!(r
            .events
            .iter()
            .skip(1)
            .all(|e| e.cause == EventCause::DwellCap));
        assert_eq!(r.summary.sup_norm_x, 0.0);
        for e in &r.events {
            assert_eq!(e.theta_after, vec![-1.0, 2.0]);
        }
        assert!(r.summary.convergence_time.is_none());
    }

    #[test]
    fn disturbance_free_scalar_plant_deadbeat_at_first_event() {
        // Pure windowed min-norm identifier: the very first window already
        // pins the scalar parameter.
        let entry = example_disturbed();
        let trig = TriggerConfig::quadratic(3.0, 1.0 / 20.0, 0.0);
        let setup = ClosedLoopSetup {
            plant: &entry.plant,
            controller: &entry.controller,
            trigger: &trig,
            n_tilde: 7,
            policy: UpdatePolicy::MinNorm { rank_tol: 1e-9 },
            variant: IdVariant::DoubleIntegral,
            theta_true: &[1.0],
            theta_hat0: &[-4.0],
            x0: &[1.0, 1.0],
            t_end: 1.0,
            integrator: quick_cfg(),
            disturbance: None,
        };
        let r = run_closed_loop(&setup).unwrap();
        let conv = r.summary.convergence_time.expect("estimate must converge");
        assert!(conv <= 0.05, "convergence at {conv}");
        assert!(r.summary.event_count >= 1);
        let first = r.summary.first_event_time.unwrap();
        assert!((0.01..=0.04).contains(&first), "first event at {first}");
        // Independent cross-implementation anchor for the first crossing.
        assert!((first - 0.01619).abs() < 5e-4, "first event at {first}");
    }

    #[test]
    fn inter_event_spacing_respects_dwell_cap() {
        let entry = example_disturbed();
        let trig = TriggerConfig::quadratic(0.7, 1.0 / 20.0, 1e-6);
        let inj = crate::systems::disturbed_injection(crate::systems::DisturbanceSpec {
            a1: 0.0,
            a2: 2.0,
            omega: 2.0,
        });
        let setup = ClosedLoopSetup {
            plant: &entry.plant,
            controller: &entry.controller,
            trigger: &trig,
            n_tilde: 10,
            policy: UpdatePolicy::DeadZone {
                rank_tol: 1e-9,
                eps: 1e-6,
            },
            variant: IdVariant::DoubleIntegral,
            theta_true: &[1.0],
            theta_hat0: &[-4.0],
            x0: &[1.0, 1.0],
            t_end: 6.0,
            integrator: quick_cfg(),
            disturbance: Some(inj.as_ref()),
        };
        let r = run_closed_loop(&setup).unwrap();
        assert!(r.summary.event_count >= 2);
        for pair in r.events.windows(2) {
            let gap = pair[1].tau - pair[0].tau;
            assert!(gap > 0.0, "events must be strictly increasing");
            assert!(gap <= 0.7 + 1e-9 + 1e-12, "dwell cap violated: {gap}");
        }
        // The estimate is exactly piecewise constant: knots match events.
        assert_eq!(r.pieces.len(), r.events.len());
        for (piece, ev) in r.pieces.iter().zip(&r.events) {
            assert_eq!(piece.0, ev.tau);
            assert_eq!(&piece.1, &ev.theta_after);
        }
    }

    #[test]
    fn matched_estimate_never_fires_the_guard() {
        // With theta_hat = theta the Lyapunov value can never climb back to
        // its threshold: all events are dwell-capped.
        let entry = example_planar();
        let trig = TriggerConfig::quadratic(0.8, 1.0 / 20.0, 0.0);
        let setup = ClosedLoopSetup {
            plant: &entry.plant,
            controller: &entry.controller,
            trigger: &trig,
            n_tilde: 3,
            policy: UpdatePolicy::MinNorm { rank_tol: 1e-9 },
            variant: IdVariant::DoubleIntegral,
            theta_true: &[0.5, -0.7],
            theta_hat0: &[0.5, -0.7],
            x0: &[1.0, -0.5],
            t_end: 4.0,
            integrator: quick_cfg(),
            disturbance: None,
        };
        let r = run_closed_loop(&setup).unwrap();
        assert!(r
            .events
            .iter()
            .skip(1)
            .all(|e| e.cause == EventCause::DwellCap));
        // And the estimate stays put under consistent windows.
        for e in &r.events {
            assert!(linalg::norm(&linalg::sub_vec(&e.theta_after, &[0.5, -0.7])) < 1e-7);
        }
    }

    #[test]
    fn between_events_the_lyapunov_threshold_holds() {
        let entry = example_disturbed();
        let trig = TriggerConfig::quadratic(3.0, 1.0 / 20.0, 0.0);
        let setup = ClosedLoopSetup {
            plant: &entry.plant,
            controller: &entry.controller,
            trigger: &trig,
            n_tilde: 7,
            policy: UpdatePolicy::MinNorm { rank_tol: 1e-9 },
            variant: IdVariant::DoubleIntegral,
            theta_true: &[1.0],
            theta_hat0: &[-4.0],
            x0: &[1.0, 1.0],
            t_end: 2.0,
            integrator: quick_cfg(),
            disturbance: None,
        };
        let r = run_closed_loop(&setup).unwrap();
        for w in r.events.windows(2) {
            let (e0, e1) = (&w[0], &w[1]);
            let thresh = entry.controller.eval_q(&e0.theta_after, &e0.x_at_tau)
                + linalg::norm_sq(&e0.x_at_tau) / 20.0;
            for k in 0..=20 {
                let t = e0.tau + (e1.tau - e0.tau) * k as f64 / 20.0;
                let v = entry.controller.eval_v(&e0.theta_after, &r.x_at(t));
                assert!(v <= thresh + 1e-6, "threshold breached between events");
            }
        }
    }

    #[test]
    fn matched_estimate_passivity_on_the_scalar_plant() {
        let entry = example_disturbed();
        let trig = TriggerConfig::quadratic(0.6, 1.0 / 20.0, 0.0);
        let setup = ClosedLoopSetup {
            plant: &entry.plant,
            controller: &entry.controller,
            trigger: &trig,
            n_tilde: 7,
            policy: UpdatePolicy::MinNorm { rank_tol: 1e-9 },
            variant: IdVariant::DoubleIntegral,
            theta_true: &[1.0],
            theta_hat0: &[1.0],
            x0: &[1.0, 1.0],
            t_end: 3.0,
            integrator: quick_cfg(),
            disturbance: None,
        };
        let r = run_closed_loop(&setup).unwrap();
        assert!(r.summary.event_count >= 4);
        assert_eq!(r.summary.guard_event_count, 0);
        assert!(r.events.iter().skip(1).all(|e| e.cause == EventCause::DwellCap));
    }

    #[test]
    fn planar_random_instance_deadbeat_within_two_dwells() {
        let entry = example_planar();
        let trig = TriggerConfig::quadratic(1.0, 1.0 / 20.0, 0.0);
        let setup = ClosedLoopSetup {
            plant: &entry.plant,
            controller: &entry.controller,
            trigger: &trig,
            n_tilde: 3,
            policy: UpdatePolicy::MinNorm { rank_tol: 1e-9 },
            variant: IdVariant::DoubleIntegral,
            theta_true: &[0.5, -0.7],
            theta_hat0: &[-1.0, 2.0],
            x0: &[1.0, -0.5],
            t_end: 2.5,
            integrator: quick_cfg(),
            disturbance: None,
        };
        let r = run_closed_loop(&setup).unwrap();
        for e in r.events.iter().filter(|e| e.tau >= 2.0) {
            let err = linalg::norm(&linalg::sub_vec(&e.theta_after, &[0.5, -0.7]));
            assert!(err <= 1e-5, "estimate off by {err} at tau {}", e.tau);
        }
        let th = r.theta_at(2.0);
        assert!(linalg::norm(&linalg::sub_vec(&th, &[0.5, -0.7])) <= 1e-5);
    }

    #[test]
    fn single_integral_variant_also_deadbeats() {
        let entry = example_planar();
        let trig = TriggerConfig::quadratic(1.0, 1.0 / 20.0, 0.0);
        let setup = ClosedLoopSetup {
            plant: &entry.plant,
            controller: &entry.controller,
            trigger: &trig,
            n_tilde: 3,
            policy: UpdatePolicy::MinNorm { rank_tol: 1e-9 },
            variant: IdVariant::SingleIntegral,
            theta_true: &[0.5, -0.7],
            theta_hat0: &[-1.0, 2.0],
            x0: &[1.0, -0.5],
            t_end: 2.5,
            integrator: quick_cfg(),
            disturbance: None,
        };
        let r = run_closed_loop(&setup).unwrap();
        let th = r.theta_at(2.2);
        assert!(linalg::norm(&linalg::sub_vec(&th, &[0.5, -0.7])) <= 1e-5);
    }

    #[test]
    fn scalar_cumulative_variant_requires_matching_plant() {
        let entry = example_planar();
        let trig = TriggerConfig::quadratic(1.0, 1.0 / 20.0, 1e-6);
        let setup = ClosedLoopSetup {
            plant: &entry.plant,
            controller: &entry.controller,
            trigger: &trig,
            n_tilde: 3,
            policy: UpdatePolicy::MinNorm { rank_tol: 1e-9 },
            variant: IdVariant::ScalarCumulative { eps: 1e-6 },
            theta_true: &[0.5, -0.7],
            theta_hat0: &[0.0, 0.0],
            x0: &[1.0, 0.0],
            t_end: 2.0,
            integrator: quick_cfg(),
            disturbance: None,
        };
        assert!(matches!(run_closed_loop(&setup), Err(SimError::Setup(_))));
    }
}
