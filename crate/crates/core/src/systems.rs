//! Catalog of concrete plants, nominal controllers and Lyapunov pairs used
//! by the scenario harness, plus the continuous-tuning comparator and the
//! linear time-invariant specialization of the identifier loop.
//!
//! Controller and Lyapunov expressions are transcribed directly from the
//! backstepping designs they implement and each carries a hand-evaluated
//! unit value test; transcription slips in these long polynomials are the
//! dominant practical risk, so audit those tests before touching anything.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::identifier::UpdateReport;
use crate::linalg::{self, Matrix};
use crate::ode::{self, IntegratorConfig};
use crate::trigger::{
    DisturbFn, MarginFn, NominalController, RunKind, RunResult, RunSummary, SimError,
};

#[derive(Debug, Clone, PartialEq)]
pub enum SystemsError {
    InvalidParameter(&'static str),
    Dimension(&'static str),
}

impl fmt::Display for SystemsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SystemsError::InvalidParameter(what) => write!(f, "invalid parameter: {what}"),
            SystemsError::Dimension(what) => write!(f, "dimension error: {what}"),
        }
    }
}

impl core::error::Error for SystemsError {}

type DynamicsFn = dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync;

/// Parameter-affine plant `x' = f(x,u) + g(x,u) theta`.
///
/// `f` writes an `n`-vector, `g` writes the `n x l` regressor matrix in
/// row-major order. Both vanish at the origin with zero input.
pub struct PlantModel {
    pub n: usize,
    pub m: usize,
    pub l: usize,
    pub name: String,
    pub f: Box<DynamicsFn>,
    pub g: Box<DynamicsFn>,
}

impl PlantModel {
    pub fn eval_f(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.n);
        (self.f)(x, u, out);
    }

    pub fn eval_g(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.n * self.l);
        (self.g)(x, u, out);
    }
}

impl fmt::Debug for PlantModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PlantModel")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("m", &self.m)
            .field("l", &self.l)
            .finish()
    }
}

/// Sinusoidal disturbance amplitudes for the robustness-study plant; the
/// two channels are `v1 = a1 sin(omega t)` and `v2 = a2 sin(omega t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisturbanceSpec {
    pub a1: f64,
    pub a2: f64,
    pub omega: f64,
}

impl Default for DisturbanceSpec {
    fn default() -> Self {
        DisturbanceSpec {
            a1: 0.0,
            a2: 0.0,
            omega: 2.0,
        }
    }
}

impl DisturbanceSpec {
    pub fn values(&self, t: f64) -> (f64, f64) {
        let s = libm::sin(self.omega * t);
        (self.a1 * s, self.a2 * s)
    }

    pub fn is_zero(&self) -> bool {
        self.a1 == 0.0 && self.a2 == 0.0
    }
}

/// Additive disturbance term for the robustness-study plant:
/// `x1' += v1 x1^2 + v2`. The disturbance perturbs the true dynamics only;
/// the identifier keeps using the nominal maps.
pub fn disturbed_injection(spec: DisturbanceSpec) -> Box<DisturbFn> {
    Box::new(move |t, x, dx| {
        let (v1, v2) = spec.values(t);
        dx[0] += v1 * x[0] * x[0] + v2;
    })
}

/// A plant paired with its nominal certainty-equivalence design.
#[derive(Debug)]
pub struct PlantCatalogEntry {
    pub plant: PlantModel,
    pub controller: NominalController,
    /// Observability constant of the plant: the number of event intervals
    /// after which windowed data pins the parameter for any nonzero state.
    pub n_h3: usize,
}

/// Planar benchmark plant `x1' = theta1 x1 + theta2 x1^2 + x2, x2' = u`
/// with its backstepping feedback and control Lyapunov function; the
/// matched closed loop satisfies `V' = -2V` exactly.
pub fn example_planar() -> PlantCatalogEntry {
    let plant = PlantModel {
        n: 2,
        m: 1,
        l: 2,
        name: String::from("planar_s5"),
        f: Box::new(|x, u, out| {
            out[0] = x[1];
            out[1] = u[0];
        }),
        g: Box::new(|x, _u, out| {
            out[0] = x[0];
            out[1] = x[0] * x[0];
            out[2] = 0.0;
            out[3] = 0.0;
        }),
    };
    let k = |theta: &[f64], x: &[f64], out: &mut [f64]| {
        let (t1, t2) = (theta[0], theta[1]);
        let (x1, x2) = (x[0], x[1]);
        let drift = t1 * x1 + t2 * x1 * x1;
        out[0] = -x1 - (1.0 + t1 + 2.0 * t2 * x1) * (x2 + drift) - (x2 + x1 + drift);
    };
    let v = |theta: &[f64], x: &[f64]| -> f64 {
        let s = x[1] + x[0] + theta[0] * x[0] + theta[1] * x[0] * x[0];
        0.5 * x[0] * x[0] + 0.5 * s * s
    };
    let controller = NominalController {
        m: 1,
        k: Box::new(k),
        v: Box::new(v),
        q_fn: Box::new(v),
    };
    PlantCatalogEntry {
        plant,
        controller,
        n_h3: 2,
    }
}

/// Backstepping feedback for the robustness-study plant.
fn disturbed_feedback(th: f64, x: &[f64]) -> f64 {
    let (x1, x2) = (x[0], x[1]);
    let x1sq = x1 * x1;
    let p = 1.0 + 2.0 * th * x1 + 3.0 * x1sq;
    let s = x2 + x1 + x1 * x1sq + th * x1sq;
    -x1 - p * (th * x1sq + x2) - 0.5 * s * (1.0 + p * p * (1.0 + x1sq * x1sq))
}

/// Robustness-study plant `x1' = (theta + v1) x1^2 + x2 + v2, x2' = u` with
/// scalar unknown parameter. The matched closed loop satisfies the
/// dissipation bound `V' <= -V + (2 + v1^2) v1^2 / 4 + v2^2`.
pub fn example_disturbed() -> PlantCatalogEntry {
    let plant = PlantModel {
        n: 2,
        m: 1,
        l: 1,
        name: String::from("disturbed_s6"),
        f: Box::new(|x, u, out| {
            out[0] = x[1];
            out[1] = u[0];
        }),
        g: Box::new(|x, _u, out| {
            out[0] = x[0] * x[0];
            out[1] = 0.0;
        }),
    };
    let v = |theta: &[f64], x: &[f64]| -> f64 {
        let x1 = x[0];
        let s = x[1] + x1 + x1 * x1 * x1 + theta[0] * x1 * x1;
        0.5 * x1 * x1 + 0.5 * s * s
    };
    let controller = NominalController {
        m: 1,
        k: Box::new(|theta, x, out| out[0] = disturbed_feedback(theta[0], x)),
        v: Box::new(v),
        q_fn: Box::new(v),
    };
    PlantCatalogEntry {
        plant,
        controller,
        n_h3: 1,
    }
}

/// Shared inner expression of the continuous-tuning comparator law.
fn extended_matching_inner(theta_hat: f64, x: &[f64]) -> f64 {
    let (x1, x2) = (x[0], x[1]);
    let x1sq = x1 * x1;
    x1 + (x2 + x1 + x1 * x1sq + theta_hat * x1sq) * (1.0 + 2.0 * theta_hat * x1 + 3.0 * x1sq)
}

/// Estimate derivative of the continuous-tuning comparator.
pub fn extended_matching_deriv(gamma: f64, theta_hat: f64, x: &[f64]) -> f64 {
    gamma * x[0] * x[0] * extended_matching_inner(theta_hat, x)
}

/// Control input of the continuous-tuning comparator.
pub fn extended_matching_control(gamma: f64, theta_hat: f64, x: &[f64]) -> f64 {
    let x1sq = x[0] * x[0];
    disturbed_feedback(theta_hat, x) - gamma * x1sq * x1sq * extended_matching_inner(theta_hat, x)
}

/// Simulates the robustness-study plant under the classical
/// continuous-tuning adaptive law (estimate integrated alongside the state,
/// no events). Used as the comparator in the robustness scenarios.
pub fn run_extended_matching(
    gamma: f64,
    theta_true: f64,
    theta_hat0: f64,
    x0: &[f64],
    t_end: f64,
    cfg: &IntegratorConfig,
    disturbance: Option<&DisturbFn>,
) -> Result<RunResult, SimError> {
    if gamma <= 0.0 {
        return Err(SimError::Setup("comparator gain gamma must be positive"));
    }
    if x0.len() != 2 {
        return Err(SimError::Setup(
            "comparator runs on the planar disturbed plant (n = 2)",
        ));
    }
    if !t_end.is_finite() || t_end <= 0.0 {
        return Err(SimError::Setup("t_end must be positive"));
    }
    let entry = example_disturbed();
    let mut y0 = vec![0.0; 3];
    y0[..2].copy_from_slice(x0);
    y0[2] = theta_hat0;

    let mut rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        let x = &y[..2];
        let th = y[2];
        let u = extended_matching_control(gamma, th, x);
        let mut fv = [0.0; 2];
        let mut gv = [0.0; 2];
        entry.plant.eval_f(x, &[u], &mut fv);
        entry.plant.eval_g(x, &[u], &mut gv);
        dy[0] = fv[0] + gv[0] * theta_true;
        dy[1] = fv[1] + gv[1] * theta_true;
        if let Some(d) = disturbance {
            d(t, x, &mut dy[..2]);
        }
        dy[2] = extended_matching_deriv(gamma, th, x);
    };
    let (_y_end, traj) = ode::integrate(&mut rhs, cfg, 0.0, &y0, t_end)?;

    let mut result = RunResult {
        kind: RunKind::ExtendedMatching,
        n: 2,
        l: 1,
        t0: 0.0,
        t_end,
        trajectory: traj,
        pieces: vec![(0.0, vec![theta_hat0])],
        events: Vec::new(),
        summary: RunSummary::default(),
    };
    result.summary = result.compute_summary(&[theta_true]);
    Ok(result)
}

/// Linear time-invariant family `x' = (A + theta_1 C_1 + ... + theta_l C_l) x + B u`
/// with feedback gains `K_theta` and exponential envelope bound `M(theta)`.
/// `theta -> K_theta`, the feedback gain family.
pub type GainFn = dyn Fn(&[f64]) -> Matrix + Send + Sync;
/// `theta -> M(theta)`, the exponential envelope bound.
pub type BoundFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

pub struct LtiSpec {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Vec<Matrix>,
    pub k_gain: Box<GainFn>,
    pub m_bound: Box<BoundFn>,
    /// Positive constant of the norm trigger
    /// `|x(t)| = |x(tau)| sqrt(a + M(theta)^2)`.
    pub trigger_a: f64,
}

/// An LTI spec wired into the generic event-triggered loop.
pub struct LtiSystem {
    pub entry: PlantCatalogEntry,
    /// The norm-trigger margin `|x_now| - |x_tau| sqrt(a + M(theta)^2)`,
    /// to be installed as the trigger margin override. Root-equivalent to
    /// the default Lyapunov margin built from `V = |x|^2`,
    /// `Q = M^2 |x|^2`, `a(x) = a |x|^2`.
    pub norm_margin: Box<MarginFn>,
    pub trigger_a: f64,
}

/// Adapts an LTI family to the parameter-affine interface: the drift is
/// `f(x,u) = Ax + Bu` and the regressor columns are `C_j x`, which makes the
/// generic accumulator reproduce the dedicated linear filters
/// (`z' = x, w' = u, y = x - Az - Bw`) exactly.
///
/// Callers assert the observability of the closed-loop/channel pairs that
/// the finite-time estimate relies on; the engine does not verify it.
pub fn example_lti(spec: LtiSpec) -> Result<LtiSystem, SystemsError> {
    let n = spec.a.rows();
    if !spec.a.is_square() {
        return Err(SystemsError::Dimension("A must be square"));
    }
    if spec.b.rows() != n {
        return Err(SystemsError::Dimension("B row count must match A"));
    }
    let m = spec.b.cols();
    let l = spec.c.len();
    if l == 0 {
        return Err(SystemsError::Dimension(
            "at least one parameter channel C_j required",
        ));
    }
    for c in &spec.c {
        if c.rows() != n || c.cols() != n {
            return Err(SystemsError::Dimension("each C_j must be n x n"));
        }
    }
    if !spec.trigger_a.is_finite() || spec.trigger_a <= 0.0 {
        return Err(SystemsError::InvalidParameter(
            "trigger constant a must be positive",
        ));
    }
    let k0 = (spec.k_gain)(&vec![0.0; l]);
    if k0.rows() != m || k0.cols() != n {
        return Err(SystemsError::Dimension("K_theta must be m x n"));
    }
    if (spec.m_bound)(&vec![0.0; l]) < 1.0 {
        return Err(SystemsError::InvalidParameter(
            "envelope bound M(theta) must be >= 1",
        ));
    }

    let LtiSpec {
        a,
        b,
        c,
        k_gain,
        m_bound,
        trigger_a,
    } = spec;
    let (a_f, b_f) = (a.clone(), b.clone());
    let f = Box::new(move |x: &[f64], u: &[f64], out: &mut [f64]| {
        let ax = a_f.matvec(x);
        let bu = b_f.matvec(u);
        for i in 0..out.len() {
            out[i] = ax[i] + bu[i];
        }
    });
    let c_g = c.clone();
    let g = Box::new(move |x: &[f64], _u: &[f64], out: &mut [f64]| {
        for (j, cj) in c_g.iter().enumerate() {
            let col = cj.matvec(x);
            for (i, v) in col.iter().enumerate() {
                out[i * c_g.len() + j] = *v;
            }
        }
    });
    let plant = PlantModel {
        n,
        m,
        l,
        name: String::from("lti"),
        f,
        g,
    };

    let k = Box::new(move |theta: &[f64], x: &[f64], out: &mut [f64]| {
        let gain = k_gain(theta);
        let u = gain.matvec(x);
        out.copy_from_slice(&u);
    });
    let m_for_q = alloc::sync::Arc::new(m_bound);
    let m_for_margin = m_for_q.clone();
    let controller = NominalController {
        m,
        k,
        v: Box::new(|_theta: &[f64], x: &[f64]| linalg::norm_sq(x)),
        q_fn: Box::new(move |theta: &[f64], x: &[f64]| {
            let mb = m_for_q(theta);
            mb * mb * linalg::norm_sq(x)
        }),
    };
    let norm_margin = Box::new(move |theta: &[f64], x_tau: &[f64], x_now: &[f64]| {
        let mb = m_for_margin(theta);
        linalg::norm(x_now) - linalg::norm(x_tau) * libm::sqrt(trigger_a + mb * mb)
    });
    Ok(LtiSystem {
        entry: PlantCatalogEntry {
            plant,
            controller,
            n_h3: 1,
        },
        norm_margin,
        trigger_a,
    })
}

/// Canonical scalar instance of the LTI family: plant `x' = theta x + u`,
/// gain `K_theta = -(theta + 1)` (matched closed loop `x' = -x`), envelope
/// `M = 1`, trigger constant `a = 1`.
pub fn example_lti_scalar(trigger_a: f64) -> Result<LtiSystem, SystemsError> {
    example_lti(LtiSpec {
        a: Matrix::zeros(1, 1),
        b: Matrix::identity(1),
        c: vec![Matrix::identity(1)],
        k_gain: Box::new(|theta| Matrix::from_row_major(1, 1, &[-(theta[0] + 1.0)])),
        m_bound: Box::new(|_| 1.0),
        trigger_a,
    })
}

/// Number of scalar states in the cumulative scalar least-squares block.
pub const SCALAR_LS_DIM: usize = 9;

/// Derivative of the cumulative scalar least-squares block for the
/// robustness-study plant. Layout: `[eta, zeta, z1..z7]` with
///
/// ```text
/// z1 = int x1^2      z2 = int z1^2    z3 = int z1    z4 = int (x1 - z7)
/// z5 = int (x1-z7)z1 z6 = t           z7 = int x2
/// ```
///
/// `eta` and `zeta` accumulate the symmetric double integrals of the
/// squared regressor and of regressor times response over the window
/// anchored at time zero, so `theta = zeta / eta` once enough excitation
/// has built up. Note `eta` carries the full double integral, i.e. twice
/// the snapshot-formula value; the quotient is invariant to that factor.
pub fn scalar_ls_rhs(x: &[f64], s: &[f64], ds: &mut [f64]) {
    debug_assert_eq!(s.len(), SCALAR_LS_DIM);
    debug_assert_eq!(ds.len(), SCALAR_LS_DIM);
    let (x1, x2) = (x[0], x[1]);
    let (z1, z2, z3, z4, z5, z6, z7) = (s[2], s[3], s[4], s[5], s[6], s[7], s[8]);
    let y = x1 - z7;
    ds[0] = 2.0 * z2 + 2.0 * z6 * z1 * z1 - 4.0 * z1 * z3;
    ds[1] = 2.0 * y * (z6 * z1 - z3) + 2.0 * z5 - 2.0 * z1 * z4;
    ds[2] = x1 * x1;
    ds[3] = z1 * z1;
    ds[4] = z1;
    ds[5] = y;
    ds[6] = y * z1;
    ds[7] = 1.0;
    ds[8] = x2;
}

/// Gated quotient update from the cumulative scalar block: hold the
/// previous estimate while the excitation measure `eta` is below `eps`.
pub fn scalar_ls_update(s: &[f64], eps: f64, theta_prev: f64) -> (f64, UpdateReport) {
    let (eta, zeta) = (s[0], s[1]);
    if eta < eps {
        (
            theta_prev,
            UpdateReport {
                rank: 0,
                residual: 0.0,
                skipped: true,
            },
        )
    } else {
        (
            zeta / eta,
            UpdateReport {
                rank: 1,
                residual: 0.0,
                skipped: false,
            },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn eval_k(entry: &PlantCatalogEntry, theta: &[f64], x: &[f64]) -> f64 {
        let mut u = [0.0];
        (entry.controller.k)(theta, x, &mut u);
        u[0]
    }

    #[test]
    fn planar_regressor_vanishes_with_first_state() {
        let entry = example_planar();
        let mut g = [9.0; 4];
        entry.plant.eval_g(&[0.0, 3.0], &[11.0], &mut g);
        assert_eq!(g, [0.0; 4]);
    }

    #[test]
    fn planar_lyapunov_hand_value() {
        let entry = example_planar();
        assert_eq!((entry.controller.v)(&[0.0, 0.0], &[1.0, 0.0]), 1.0);
    }

    #[test]
    fn planar_feedback_hand_value() {
        let entry = example_planar();
        assert_eq!(eval_k(&entry, &[0.0, 0.0], &[1.0, 0.0]), -2.0);
        // k(theta, 0) = 0 for any parameter.
        assert_eq!(eval_k(&entry, &[0.7, -1.3], &[0.0, 0.0]), 0.0);
    }

    #[test]
    fn disturbed_dynamics_hand_values() {
        let entry = example_disturbed();
        let mut f = [0.0; 2];
        let mut g = [0.0; 2];
        entry.plant.eval_f(&[1.0, 1.0], &[0.0], &mut f);
        entry.plant.eval_g(&[1.0, 1.0], &[0.0], &mut g);
        // x1' = theta x1^2 + x2 at theta = 1: f + g theta = 1 + 1 = 2.
        assert_eq!(f[0] + g[0] * 1.0, 2.0);
        assert_eq!((entry.controller.v)(&[1.0], &[1.0, 1.0]), 8.5);
        assert_eq!((entry.controller.v)(&[-4.0], &[1.0, 1.0]), 1.0);
    }

    #[test]
    fn disturbed_feedback_hand_values() {
        let entry = example_disturbed();
        assert_eq!(eval_k(&entry, &[1.0], &[1.0, 1.0]), -159.0);
        assert_eq!(eval_k(&entry, &[-4.0], &[1.0, 1.0]), 3.5);
        assert_eq!(eval_k(&entry, &[2.5], &[0.0, 0.0]), 0.0);
    }

    #[test]
    fn comparator_hand_values() {
        assert_eq!(extended_matching_deriv(1.0, 0.0, &[1.0, 0.0]), 9.0);
        assert_eq!(extended_matching_deriv(5.0, 0.0, &[1.0, 0.0]), 45.0);
        assert_eq!(extended_matching_deriv(5.0, 0.3, &[0.0, 2.0]), 0.0);
        let cfg = IntegratorConfig::default();
        assert!(matches!(
            run_extended_matching(0.0, 1.0, -4.0, &[1.0, 1.0], 1.0, &cfg, None),
            Err(SimError::Setup(_))
        ));
    }

    #[test]
    fn disturbance_channels() {
        let spec = DisturbanceSpec {
            a1: 2.0,
            a2: 0.5,
            omega: 2.0,
        };
        let (v1, v2) = spec.values(0.25);
        assert!((v1 - 2.0 * libm::sin(0.5)).abs() < 1e-15);
        assert!((v2 - 0.5 * libm::sin(0.5)).abs() < 1e-15);
        let inj = disturbed_injection(spec);
        let mut dx = [1.0, 1.0];
        inj(0.25, &[2.0, 0.0], &mut dx);
        assert!((dx[0] - (1.0 + v1 * 4.0 + v2)).abs() < 1e-15);
        assert_eq!(dx[1], 1.0);
    }

    #[test]
    fn matched_dissipation_bound_holds_at_samples() {
        // Along the disturbed plant under the matched feedback,
        // V' <= -V + (2 + v1^2) v1^2 / 4 + v2^2 pointwise. The gradient of V
        // is evaluated analytically.
        let entry = example_disturbed();
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        for _ in 0..20_000 {
            let th: f64 = rng.gen_range(-2.0..2.0);
            let x = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            let v1: f64 = rng.gen_range(-3.0..3.0);
            let v2: f64 = rng.gen_range(-3.0..3.0);
            let u = eval_k(&entry, &[th], &x);
            let (x1, x2) = (x[0], x[1]);
            let s = x2 + x1 + x1 * x1 * x1 + th * x1 * x1;
            let dv_dx1 = x1 + s * (1.0 + 3.0 * x1 * x1 + 2.0 * th * x1);
            let dv_dx2 = s;
            let dx1 = (th + v1) * x1 * x1 + x2 + v2;
            let dx2 = u;
            let vdot = dv_dx1 * dx1 + dv_dx2 * dx2;
            let v = (entry.controller.v)(&[th], &x);
            let bound = -v + (2.0 + v1 * v1) / 4.0 * v1 * v1 + v2 * v2;
            assert!(
                vdot <= bound + 1e-9 * (1.0 + vdot.abs() + bound.abs()),
                "dissipation bound violated at x={x:?}, th={th}, v=({v1},{v2})"
            );
        }
    }

    #[test]
    fn planar_coercivity_bound_holds_on_grid() {
        // V_theta(x) <= M with |theta| <= rho implies
        // |x| <= (3 + rho) sqrt(2M) + 2 rho M.
        let entry = example_planar();
        let rho = 2.0f64;
        let grid: Vec<f64> = (-12..=12).map(|k| k as f64 / 3.0).collect();
        for &t1 in &grid {
            for &t2 in &grid {
                if libm::sqrt(t1 * t1 + t2 * t2) > rho {
                    continue;
                }
                for &x1 in &grid {
                    for &x2 in &grid {
                        let v = (entry.controller.v)(&[t1, t2], &[x1, x2]);
                        let m = v;
                        let bound = (3.0 + rho) * libm::sqrt(2.0 * m) + 2.0 * rho * m;
                        let nx = libm::sqrt(x1 * x1 + x2 * x2);
                        assert!(nx <= bound + 1e-9, "coercivity violated at {x1},{x2}");
                    }
                }
            }
        }
    }

    #[test]
    fn planar_quadratic_sandwich_on_grid() {
        let entry = example_planar();
        let rho = 2.0f64;
        let r = 3.0f64;
        let c = 1.0 + rho + rho * r;
        let k1 = 1.0 / (4.0 * c * c + 2.0);
        let k2 = c * c + 0.5;
        let grid: Vec<f64> = (-9..=9).map(|k| k as f64 / 3.0).collect();
        for &t1 in &grid {
            for &t2 in &grid {
                if libm::sqrt(t1 * t1 + t2 * t2) > rho {
                    continue;
                }
                for &x1 in &grid {
                    for &x2 in &grid {
                        let nsq = x1 * x1 + x2 * x2;
                        if libm::sqrt(nsq) > r {
                            continue;
                        }
                        let v = (entry.controller.v)(&[t1, t2], &[x1, x2]);
                        assert!(k1 * nsq <= v + 1e-12, "lower sandwich violated");
                        assert!(v <= k2 * nsq + 1e-12, "upper sandwich violated");
                    }
                }
            }
        }
    }

    #[test]
    fn lti_regressor_is_identity_channel_shape() {
        // n = 2, single channel C1 = I: the regressor column is x itself.
        let sys = example_lti(LtiSpec {
            a: Matrix::zeros(2, 2),
            b: Matrix::from_row_major(2, 1, &[0.0, 1.0]),
            c: vec![Matrix::identity(2)],
            k_gain: Box::new(|_| Matrix::from_row_major(1, 2, &[0.0, 0.0])),
            m_bound: Box::new(|_| 1.0),
            trigger_a: 1.0,
        })
        .unwrap();
        let mut g = [0.0; 2];
        sys.entry.plant.eval_g(&[0.7, -0.2], &[0.0], &mut g);
        assert_eq!(g, [0.7, -0.2]);
    }

    #[test]
    fn lti_scalar_margin_and_validation() {
        let sys = example_lti_scalar(1.0).unwrap();
        // sqrt(a + M^2) = sqrt(2): margin zero exactly at |x| = sqrt(2)|x_tau|.
        let m = (sys.norm_margin)(&[0.0], &[1.0], &[libm::sqrt(2.0)]);
        assert!(m.abs() < 1e-12);
        assert!(example_lti_scalar(0.0).is_err());
    }

    #[test]
    fn scalar_ls_block_starts_inert() {
        let s = [0.0; SCALAR_LS_DIM];
        let (theta, rep) = scalar_ls_update(&s, 1e-6, -4.0);
        assert_eq!(theta, -4.0);
        assert!(rep.skipped);
        let mut ds = [0.0; SCALAR_LS_DIM];
        scalar_ls_rhs(&[1.0, 1.0], &s, &mut ds);
        // Only the primitive accumulators move from rest.
        assert_eq!(ds[0], 0.0);
        assert_eq!(ds[1], 0.0);
        assert_eq!(ds[2], 1.0);
        assert_eq!(ds[7], 1.0);
        assert_eq!(ds[8], 1.0);
    }
}
