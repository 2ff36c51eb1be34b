//! Adaptive explicit Runge-Kutta integration with dense output and
//! first-crossing guard localization.
//!
//! The stepper is the Dormand-Prince 5(4) embedded pair with the classic
//! free fourth-order continuous extension, which is what the closed-loop
//! runner interrogates between accepted steps: trigger margins are evaluated
//! on the interpolant (never by re-integration) and the first sign change is
//! localized by bisection down to the configured event tolerance.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Tolerances and step limits for one integrator instance.
#[derive(Debug, Clone, Copy)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Width of the bracketing interval when an event is localized.
    pub event_tol: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_step: 0.1,
            event_tol: 1e-9,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<(), OdeError> {
        if !(self.rel_tol > 0.0
            && self.abs_tol > 0.0
            && self.max_step > 0.0
            && self.event_tol > 0.0)
        {
            return Err(OdeError::BadConfig(
                "tolerances and max_step must be positive",
            ));
        }
        if self.event_tol > self.max_step {
            return Err(OdeError::BadConfig("event_tol must not exceed max_step"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OdeError {
    BadConfig(&'static str),
    /// Step size collapsed below `1e-14 * max(1, |t|)`.
    StepSizeUnderflow {
        t: f64,
    },
    NonFiniteState {
        t: f64,
    },
    /// A guarded integration was started with the margin already
    /// non-negative; callers decide how to schedule that case.
    GuardAlreadyCrossed {
        t: f64,
        value: f64,
    },
    EmptySpan,
}

impl fmt::Display for OdeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OdeError::BadConfig(what) => write!(f, "bad integrator config: {what}"),
            OdeError::StepSizeUnderflow { t } => {
                write!(f, "step size underflow at t = {t} (problem too stiff?)")
            }
            OdeError::NonFiniteState { t } => write!(f, "non-finite state at t = {t}"),
            OdeError::GuardAlreadyCrossed { t, value } => {
                write!(f, "guard already non-negative ({value}) at start time {t}")
            }
            OdeError::EmptySpan => write!(f, "integration span is empty or reversed"),
        }
    }
}

impl core::error::Error for OdeError {}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// Difference between the 5th- and 4th-order weights (error estimator).
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// Weights of the fourth-order continuous extension.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Right-hand side `(t, y, dy_out)` of an initial value problem.
pub type OdeRhs<'a> = dyn FnMut(f64, &[f64], &mut [f64]) + 'a;
/// Trigger margin `(t, y) -> value`; events fire at the first zero
/// up-crossing.
pub type GuardFn<'a> = dyn FnMut(f64, &[f64]) -> f64 + 'a;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;
/// Guard samples per accepted step when hunting for the first crossing.
const GUARD_SUBSAMPLES: usize = 8;

/// One accepted step with its dense interpolant.
///
/// The interpolant is valid on `[t0, t0 + h]`; `t1 <= t0 + h` marks the end
/// of the range actually used (steps are truncated at event times).
#[derive(Debug, Clone)]
pub struct DenseStep {
    pub t0: f64,
    pub t1: f64,
    h: f64,
    dim: usize,
    /// Five stacked coefficient vectors of the quartic interpolant.
    cont: Vec<f64>,
}

impl DenseStep {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Evaluates the interpolant at `t` (clamped to the step span).
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        let theta = ((t - self.t0) / self.h).clamp(0.0, 1.0);
        let theta1 = 1.0 - theta;
        let d = self.dim;
        let (c1, rest) = self.cont.split_at(d);
        let (c2, rest) = rest.split_at(d);
        let (c3, rest) = rest.split_at(d);
        let (c4, c5) = rest.split_at(d);
        for i in 0..d {
            out[i] = c1[i] + theta * (c2[i] + theta1 * (c3[i] + theta * (c4[i] + theta1 * c5[i])));
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out);
        out
    }
}

/// Ordered list of accepted steps spanning a run; lookup by time.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub steps: Vec<DenseStep>,
}

impl Trajectory {
    pub fn t_start(&self) -> Option<f64> {
        self.steps.first().map(|s| s.t0)
    }

    pub fn t_end(&self) -> Option<f64> {
        self.steps.last().map(|s| s.t1)
    }

    /// Evaluates the dense solution at `t`, clamped to the covered span.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        assert!(!self.steps.is_empty(), "empty trajectory");
        let idx = match self
            .steps
            .binary_search_by(|s| s.t1.partial_cmp(&t).unwrap())
        {
            Ok(i) => (i + 1).min(self.steps.len() - 1),
            Err(i) => i.min(self.steps.len() - 1),
        };
        self.steps[idx].eval_into(t, out);
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let dim = self.steps.first().expect("empty trajectory").dim;
        let mut out = vec![0.0; dim];
        self.eval_into(t, &mut out);
        out
    }
}

/// Outcome of a guarded integration.
#[derive(Debug, Clone)]
pub enum EventOutcome {
    /// The guard's first zero up-crossing, localized to `event_tol`.
    Event { t: f64, y: Vec<f64> },
    /// No crossing before the requested end time.
    ReachedEnd { y: Vec<f64> },
}

/// Result of a single accepted step.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub y: Vec<f64>,
    pub h_used: f64,
    pub h_next: f64,
    pub dense: DenseStep,
    pub err_est: f64,
}

struct Stepper<'a> {
    rhs: &'a mut OdeRhs<'a>,
    cfg: IntegratorConfig,
    dim: usize,
    k: [Vec<f64>; 7],
    y_stage: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(rhs: &'a mut OdeRhs<'a>, cfg: IntegratorConfig, dim: usize) -> Self {
        Stepper {
            rhs,
            cfg,
            dim,
            k: core::array::from_fn(|_| vec![0.0; dim]),
            y_stage: vec![0.0; dim],
        }
    }

    fn eval(&mut self, t: f64, y: &[f64], stage: usize) {
        (self.rhs)(t, y, &mut self.k[stage]);
    }

    /// Attempts one step of size `h` from `(t, y)` with `k[0]` already
    /// holding `f(t, y)`. Returns `(y_new, err_norm)`; `k[6]` ends up
    /// holding the derivative at the new point (FSAL).
    fn try_step(&mut self, t: f64, y: &[f64], h: f64, y_new: &mut [f64]) -> f64 {
        let d = self.dim;
        for stage in 1..7 {
            for i in 0..d {
                let mut acc = 0.0;
                for (j, kj) in self.k.iter().enumerate().take(stage) {
                    let a = A[stage - 1][j];
                    if a != 0.0 {
                        acc += a * kj[i];
                    }
                }
                self.y_stage[i] = y[i] + h * acc;
            }
            if stage == 6 {
                // Stage 7 is evaluated at the candidate solution itself.
                y_new.copy_from_slice(&self.y_stage);
            }
            let ts = t + C[stage] * h;
            let y_arg = core::mem::take(&mut self.y_stage);
            self.eval(ts, &y_arg, stage);
            self.y_stage = y_arg;
        }
        // Weighted RMS error norm from the embedded difference.
        let mut err_sq = 0.0;
        for i in 0..d {
            let mut e = 0.0;
            for (j, kj) in self.k.iter().enumerate() {
                if E[j] != 0.0 {
                    e += E[j] * kj[i];
                }
            }
            e *= h;
            let sc = self.cfg.abs_tol + self.cfg.rel_tol * y[i].abs().max(y_new[i].abs());
            err_sq += (e / sc) * (e / sc);
        }
        libm::sqrt(err_sq / d as f64)
    }

    fn dense_from_stages(&self, t: f64, h: f64, t1: f64, y: &[f64], y_new: &[f64]) -> DenseStep {
        let d = self.dim;
        let mut cont = vec![0.0; 5 * d];
        let (c1, rest) = cont.split_at_mut(d);
        let (c2, rest) = rest.split_at_mut(d);
        let (c3, rest) = rest.split_at_mut(d);
        let (c4, c5) = rest.split_at_mut(d);
        for i in 0..d {
            let ydiff = y_new[i] - y[i];
            let bspl = h * self.k[0][i] - ydiff;
            c1[i] = y[i];
            c2[i] = ydiff;
            c3[i] = bspl;
            c4[i] = ydiff - h * self.k[6][i] - bspl;
            let mut acc = 0.0;
            for (j, kj) in self.k.iter().enumerate() {
                if D[j] != 0.0 {
                    acc += D[j] * kj[i];
                }
            }
            c5[i] = h * acc;
        }
        DenseStep {
            t0: t,
            t1,
            h,
            dim: d,
            cont,
        }
    }

    /// Runs the accept/reject loop until one step is accepted.
    fn step(&mut self, t: f64, y: &[f64], h_try: f64) -> Result<StepResult, OdeError> {
        let mut h = h_try.min(self.cfg.max_step);
        let mut y_new = vec![0.0; self.dim];
        let mut rejected = false;
        loop {
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(OdeError::StepSizeUnderflow { t });
            }
            let err = self.try_step(t, y, h, &mut y_new);
            let finite = err.is_finite() && y_new.iter().all(|v| v.is_finite());
            if finite && err <= 1.0 {
                let factor = if err == 0.0 {
                    MAX_FACTOR
                } else {
                    (SAFETY * libm::pow(err, -0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
                };
                let factor = if rejected { factor.min(1.0) } else { factor };
                let dense = self.dense_from_stages(t, h, t + h, y, &y_new);
                return Ok(StepResult {
                    y: y_new,
                    h_used: h,
                    h_next: (h * factor).min(self.cfg.max_step),
                    dense,
                    err_est: err,
                });
            }
            rejected = true;
            h *= if finite {
                (SAFETY * libm::pow(err, -0.2)).clamp(MIN_FACTOR, 0.9)
            } else {
                0.5
            };
        }
    }

    /// Step-size guess for the first step, after Hairer's starting
    /// procedure.
    fn initial_step(&mut self, t0: f64, y0: &[f64], span: f64) -> f64 {
        let d = self.dim;
        let sc: Vec<f64> = y0
            .iter()
            .map(|v| self.cfg.abs_tol + self.cfg.rel_tol * v.abs())
            .collect();
        let d0 = rms_scaled(y0, &sc);
        let f0: Vec<f64> = self.k[0].clone();
        let d1 = rms_scaled(&f0, &sc);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        let h0 = h0.min(span).min(self.cfg.max_step);
        let y1: Vec<f64> = y0.iter().zip(&f0).map(|(y, f)| y + h0 * f).collect();
        let mut f1 = vec![0.0; d];
        (self.rhs)(t0 + h0, &y1, &mut f1);
        let df: Vec<f64> = f1.iter().zip(&f0).map(|(a, b)| a - b).collect();
        let d2 = rms_scaled(&df, &sc) / h0;
        let dm = d1.max(d2);
        let h1 = if dm <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            libm::pow(0.01 / dm, 0.2)
        };
        (100.0 * h0).min(h1).min(span).min(self.cfg.max_step)
    }
}

fn rms_scaled(v: &[f64], sc: &[f64]) -> f64 {
    let s: f64 = v.iter().zip(sc).map(|(x, s)| (x / s) * (x / s)).sum();
    libm::sqrt(s / v.len() as f64)
}

/// Takes a single accepted step of suggested size `h` from `(t, y)`.
///
/// Rejected trials are retried internally with reduced step size, so the
/// returned step always satisfies the error test. Mostly useful for tests
/// and custom drivers; the closed loop goes through [`integrate`] and
/// [`integrate_with_guard`].
pub fn step<F>(
    rhs: &mut F,
    cfg: &IntegratorConfig,
    t: f64,
    y: &[f64],
    h: f64,
) -> Result<StepResult, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    cfg.validate()?;
    if !h.is_finite() || h <= 0.0 {
        return Err(OdeError::BadConfig("step size must be positive"));
    }
    let mut st = Stepper::new(rhs, *cfg, y.len());
    let y0 = y.to_vec();
    st.eval(t, &y0, 0);
    st.step(t, &y0, h)
}

/// Integrates from `(t0, y0)` to `t_end`, returning the final state and the
/// dense trajectory.
pub fn integrate<F>(
    rhs: &mut F,
    cfg: &IntegratorConfig,
    t0: f64,
    y0: &[f64],
    t_end: f64,
) -> Result<(Vec<f64>, Trajectory), OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let (outcome, traj) = drive(rhs, None, cfg, t0, y0, t_end)?;
    match outcome {
        EventOutcome::ReachedEnd { y } => Ok((y, traj)),
        EventOutcome::Event { .. } => unreachable!("no guard supplied"),
    }
}

/// Integrates with a guard margin; stops at the first zero up-crossing.
///
/// The guard must start strictly negative (callers handle the
/// already-crossed case before integrating). The margin is sampled at
/// several points inside every accepted step and the first sign change is
/// bisected on the dense interpolant down to `cfg.event_tol`.
pub fn integrate_with_guard<F, G>(
    rhs: &mut F,
    guard: &mut G,
    cfg: &IntegratorConfig,
    t0: f64,
    y0: &[f64],
    t_end: f64,
) -> Result<(EventOutcome, Trajectory), OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    G: FnMut(f64, &[f64]) -> f64,
{
    drive(rhs, Some(guard), cfg, t0, y0, t_end)
}

fn drive<F>(
    rhs: &mut F,
    mut guard: Option<&mut GuardFn<'_>>,
    cfg: &IntegratorConfig,
    t0: f64,
    y0: &[f64],
    t_end: f64,
) -> Result<(EventOutcome, Trajectory), OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    cfg.validate()?;
    if !t_end.is_finite() || t_end <= t0 {
        return Err(OdeError::EmptySpan);
    }
    if !y0.iter().all(|v| v.is_finite()) {
        return Err(OdeError::NonFiniteState { t: t0 });
    }
    if let Some(g) = guard.as_deref_mut() {
        let g0 = g(t0, y0);
        if g0 >= 0.0 {
            return Err(OdeError::GuardAlreadyCrossed { t: t0, value: g0 });
        }
    }

    let mut st = Stepper::new(rhs, *cfg, y0.len());
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut traj = Trajectory::default();
    st.eval(t, &y, 0);
    let mut h = st.initial_step(t0, &y, t_end - t0);
    let mut g_prev_t = t0;
    let mut probe = vec![0.0; y0.len()];

    loop {
        let remaining = t_end - t;
        if remaining <= 1e-14 * t.abs().max(1.0) {
            // Snap to the end point; the last accepted step already covers it.
            if let Some(last) = traj.steps.last_mut() {
                last.t1 = t_end;
            }
            return Ok((EventOutcome::ReachedEnd { y }, traj));
        }
        let h_try = h.min(remaining);
        let res = st.step(t, &y, h_try)?;
        let t_new = t + res.h_used;

        if let Some(g) = guard.as_deref_mut() {
            // Hunt for the first sign change over interior samples plus the
            // step end point.
            let mut lo_t = g_prev_t.max(res.dense.t0);
            let mut hit = None;
            for s in 1..=GUARD_SUBSAMPLES {
                let ts = res.dense.t0 + res.h_used * s as f64 / GUARD_SUBSAMPLES as f64;
                if ts <= lo_t {
                    continue;
                }
                res.dense.eval_into(ts, &mut probe);
                if g(ts, &probe) >= 0.0 {
                    hit = Some(ts);
                    break;
                }
                lo_t = ts;
            }
            if let Some(mut hi_t) = hit {
                while hi_t - lo_t > cfg.event_tol {
                    let mid = 0.5 * (lo_t + hi_t);
                    res.dense.eval_into(mid, &mut probe);
                    if g(mid, &probe) >= 0.0 {
                        hi_t = mid;
                    } else {
                        lo_t = mid;
                    }
                }
                let mut dense = res.dense;
                dense.t1 = hi_t;
                dense.eval_into(hi_t, &mut probe);
                let y_event = probe.clone();
                traj.steps.push(dense);
                return Ok((
                    EventOutcome::Event {
                        t: hi_t,
                        y: y_event,
                    },
                    traj,
                ));
            }
            g_prev_t = t_new;
        }

        traj.steps.push(res.dense);
        y = res.y;
        t = t_new;
        h = res.h_next;
        // FSAL: derivative at the accepted point becomes stage one.
        let last = st.k[6].clone();
        st.k[0] = last;
    }
}
