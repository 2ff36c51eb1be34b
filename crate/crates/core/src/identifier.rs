//! Finite-time least-squares identifier: the running accumulator ODE block,
//! windowed Gram systems reconstructed from accumulator snapshots, and the
//! parameter update policies applied at event times.
//!
//! The accumulator integrates, along the closed-loop trajectory,
//!
//! ```text
//! z' = f(x,u)        w' = x - z        B' = g(x,u)
//! phi' = B'(x - z)   Q' = B            R' = B'B
//! ```
//!
//! from zero initial conditions. At an event time `tau` with window start
//! `mu`, the constraint pair over the window is recovered purely from the
//! two snapshots:
//!
//! ```text
//! G = (tau - mu)(R(tau) - R(mu)) - (Q(tau) - Q(mu))'(Q(tau) - Q(mu))
//! Z = (tau - mu)(phi(tau) - phi(mu)) - (Q(tau) - Q(mu))'(w(tau) - w(mu))
//! ```
//!
//! Convention note: this snapshot pair equals one half of the symmetric
//! double-integral form of the windowed least-squares normal equations
//! (expanding the squared window integrand produces two copies of every
//! cross term). The common factor scales `G` and `Z` identically, so every
//! update policy below is invariant to it; tests pin the factor against a
//! quadrature oracle.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::linalg::{self, Matrix};
use crate::systems::PlantModel;

#[derive(Debug, Clone, PartialEq)]
pub enum IdentifierError {
    Dimension { what: &'static str },
    TimeOrdering { t_mu: f64, t_tau: f64 },
    Linalg(linalg::LinalgError),
}

impl fmt::Display for IdentifierError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IdentifierError::Dimension { what } => write!(f, "dimension mismatch: {what}"),
            IdentifierError::TimeOrdering { t_mu, t_tau } => {
                write!(f, "window start {t_mu} is after window end {t_tau}")
            }
            IdentifierError::Linalg(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for IdentifierError {}

impl From<linalg::LinalgError> for IdentifierError {
    fn from(e: linalg::LinalgError) -> Self {
        IdentifierError::Linalg(e)
    }
}

/// The augmented accumulator carried alongside the plant state.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentifierState {
    pub z: Vec<f64>,
    pub w: Vec<f64>,
    pub b: Matrix,
    pub phi: Vec<f64>,
    pub q: Matrix,
    pub r: Matrix,
}

impl IdentifierState {
    pub fn zero(n: usize, l: usize) -> Self {
        IdentifierState {
            z: vec![0.0; n],
            w: vec![0.0; n],
            b: Matrix::zeros(n, l),
            phi: vec![0.0; l],
            q: Matrix::zeros(n, l),
            r: Matrix::zeros(l, l),
        }
    }

    /// Number of scalar ODE states the accumulator occupies.
    pub fn flat_len(n: usize, l: usize) -> usize {
        2 * n + 2 * n * l + l + l * l
    }

    /// Reads the accumulator out of its flat ODE-state layout
    /// `[z, w, B, phi, Q, R]` (matrices row-major).
    pub fn from_flat(n: usize, l: usize, flat: &[f64]) -> Self {
        assert_eq!(flat.len(), Self::flat_len(n, l), "accumulator slice length");
        let (z, rest) = flat.split_at(n);
        let (w, rest) = rest.split_at(n);
        let (b, rest) = rest.split_at(n * l);
        let (phi, rest) = rest.split_at(l);
        let (q, r) = rest.split_at(n * l);
        IdentifierState {
            z: z.to_vec(),
            w: w.to_vec(),
            b: Matrix::from_row_major(n, l, b),
            phi: phi.to_vec(),
            q: Matrix::from_row_major(n, l, q),
            r: Matrix::from_row_major(l, l, r),
        }
    }

    pub fn write_flat(&self, flat: &mut [f64]) {
        let n = self.z.len();
        let l = self.phi.len();
        assert_eq!(flat.len(), Self::flat_len(n, l), "accumulator slice length");
        let (z, rest) = flat.split_at_mut(n);
        let (w, rest) = rest.split_at_mut(n);
        let (b, rest) = rest.split_at_mut(n * l);
        let (phi, rest) = rest.split_at_mut(l);
        let (q, r) = rest.split_at_mut(n * l);
        z.copy_from_slice(&self.z);
        w.copy_from_slice(&self.w);
        b.copy_from_slice(self.b.data());
        phi.copy_from_slice(&self.phi);
        q.copy_from_slice(self.q.data());
        r.copy_from_slice(self.r.data());
    }
}

/// Accumulator state captured at one event time.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub x: Vec<f64>,
    pub state: IdentifierState,
}

impl Snapshot {
    /// Builds a snapshot from the augmented ODE state `[x | accumulator]`.
    pub fn from_augmented(n: usize, l: usize, t: f64, y: &[f64]) -> Self {
        let acc = &y[n..n + IdentifierState::flat_len(n, l)];
        Snapshot {
            t,
            x: y[..n].to_vec(),
            state: IdentifierState::from_flat(n, l, acc),
        }
    }
}

/// The linear constraint pair `Z = G theta` over one window.
#[derive(Debug, Clone)]
pub struct GramSystem {
    pub g: Matrix,
    pub z: Vec<f64>,
}

impl GramSystem {
    pub fn dim(&self) -> usize {
        self.g.rows()
    }

    pub fn zero(l: usize) -> Self {
        GramSystem {
            g: Matrix::zeros(l, l),
            z: vec![0.0; l],
        }
    }

    /// Largest eigenvalue (zero for an empty matrix).
    pub fn max_eigenvalue(&self) -> Result<f64, linalg::LinalgError> {
        Ok(linalg::sym_eig(&self.g)?
            .eigenvalues
            .first()
            .copied()
            .unwrap_or(0.0))
    }

    /// Checks positive semi-definiteness up to `tol * max(1, |G|)`.
    pub fn is_psd(&self, tol: f64) -> Result<bool, linalg::LinalgError> {
        let eig = linalg::sym_eig(&self.g)?;
        let scale = self.g.frobenius_norm().max(1.0);
        Ok(eig
            .eigenvalues
            .last()
            .is_none_or(|&lam| lam >= -tol * scale))
    }
}

/// Window rule parameters: the window start is the earliest event time
/// within `n_tilde * t_dwell` of the current event.
#[derive(Debug, Clone, Copy)]
pub struct WindowSpec {
    pub n_tilde: usize,
    pub t_dwell: f64,
}

/// Derivative of the accumulator block given already-evaluated `f(x,u)` and
/// `g(x,u)` (row-major `n x l`). `acc` and `dacc` use the flat layout of
/// [`IdentifierState::from_flat`]. This is the allocation-free form the
/// closed-loop right-hand side calls every stage.
pub fn accumulator_rhs_flat(
    n: usize,
    l: usize,
    x: &[f64],
    f_val: &[f64],
    g_val: &[f64],
    acc: &[f64],
    dacc: &mut [f64],
) {
    debug_assert_eq!(acc.len(), IdentifierState::flat_len(n, l));
    debug_assert_eq!(dacc.len(), acc.len());
    let (z, rest) = acc.split_at(n);
    let (_w, rest) = rest.split_at(n);
    let (b, _rest) = rest.split_at(n * l);

    let (dz, drest) = dacc.split_at_mut(n);
    let (dw, drest) = drest.split_at_mut(n);
    let (db, drest) = drest.split_at_mut(n * l);
    let (dphi, drest) = drest.split_at_mut(l);
    let (dq, dr) = drest.split_at_mut(n * l);

    dz.copy_from_slice(f_val);
    for i in 0..n {
        dw[i] = x[i] - z[i];
    }
    db.copy_from_slice(g_val);
    dq.copy_from_slice(b);
    // phi' = B'(x - z), R' = B'B
    for j in 0..l {
        let mut acc_phi = 0.0;
        for i in 0..n {
            acc_phi += b[i * l + j] * (x[i] - z[i]);
        }
        dphi[j] = acc_phi;
        for jj in 0..l {
            let mut acc_r = 0.0;
            for i in 0..n {
                acc_r += b[i * l + j] * b[i * l + jj];
            }
            dr[j * l + jj] = acc_r;
        }
    }
}

/// Structured form of [`accumulator_rhs_flat`]: evaluates the plant maps and
/// returns the accumulator derivative as a state.
pub fn accumulator_rhs(
    plant: &PlantModel,
    x: &[f64],
    u: &[f64],
    state: &IdentifierState,
) -> Result<IdentifierState, IdentifierError> {
    let (n, l) = (plant.n, plant.l);
    if x.len() != n || u.len() != plant.m || state.z.len() != n || state.phi.len() != l {
        return Err(IdentifierError::Dimension {
            what: "plant/state sizes disagree",
        });
    }
    let mut f_val = vec![0.0; n];
    let mut g_val = vec![0.0; n * l];
    plant.eval_f(x, u, &mut f_val);
    plant.eval_g(x, u, &mut g_val);
    let mut acc = vec![0.0; IdentifierState::flat_len(n, l)];
    state.write_flat(&mut acc);
    let mut dacc = vec![0.0; acc.len()];
    accumulator_rhs_flat(n, l, x, &f_val, &g_val, &acc, &mut dacc);
    Ok(IdentifierState::from_flat(n, l, &dacc))
}

/// Window start for the update at event `i + 1`: the earliest event time
/// `tau_j` (with `j <= i`) satisfying `tau_j >= tau_{i+1} - n_tilde * T`.
///
/// `times` must contain `tau_0 ..= tau_{i+1}`. The schedule guarantees the
/// candidate set is non-empty because consecutive events are at most `T`
/// apart.
pub fn mu_index(times: &[f64], i: usize, window: &WindowSpec) -> (f64, usize) {
    assert!(
        times.len() >= i + 2,
        "times must contain tau_0 ..= tau_(i+1)"
    );
    let cutoff = times[i + 1] - window.n_tilde as f64 * window.t_dwell;
    for (j, &tau_j) in times.iter().enumerate().take(i + 1) {
        if tau_j >= cutoff {
            return (tau_j, j);
        }
    }
    debug_assert!(false, "event schedule violated the dwell bound");
    (times[i], i)
}

/// `(dt, dR, dQ, dphi, dw)` between two snapshots.
type WindowDeltas = (f64, Matrix, Matrix, Vec<f64>, Vec<f64>);

fn window_deltas(at_tau: &Snapshot, at_mu: &Snapshot) -> Result<WindowDeltas, IdentifierError> {
    if at_tau.t < at_mu.t {
        return Err(IdentifierError::TimeOrdering {
            t_mu: at_mu.t,
            t_tau: at_tau.t,
        });
    }
    let (a, b) = (&at_tau.state, &at_mu.state);
    if a.z.len() != b.z.len() || a.phi.len() != b.phi.len() {
        return Err(IdentifierError::Dimension {
            what: "snapshot sizes disagree",
        });
    }
    let dt = at_tau.t - at_mu.t;
    let dr = a.r.sub(&b.r);
    let dq = a.q.sub(&b.q);
    let dphi = linalg::sub_vec(&a.phi, &b.phi);
    let dw = linalg::sub_vec(&a.w, &b.w);
    Ok((dt, dr, dq, dphi, dw))
}

/// Windowed constraint pair from two accumulator snapshots (symmetric
/// double-integral identifier). Equal snapshot times yield the degenerate
/// zero system.
pub fn gram_from_snapshots(
    at_tau: &Snapshot,
    at_mu: &Snapshot,
) -> Result<GramSystem, IdentifierError> {
    let (dt, dr, dq, dphi, dw) = window_deltas(at_tau, at_mu)?;
    let g = dr.scaled(dt).sub(&dq.tr_mul(&dq)).symmetrized();
    let dqt_dw = dq.tr_matvec(&dw);
    let z: Vec<f64> = dphi.iter().zip(&dqt_dw).map(|(p, c)| dt * p - c).collect();
    Ok(GramSystem { g, z })
}

/// Windowed constraint pair for the single-integral identifier variant,
/// which anchors the regressor at the window start:
///
/// ```text
/// G = int_mu^tau (B(t)-B(mu))'(B(t)-B(mu)) dt
/// Z = int_mu^tau (B(t)-B(mu))'(y(t)-y(mu)) dt,   y = x - z
/// ```
///
/// expanded into snapshot differences so no trajectory storage is needed.
pub fn gram_single_integral(
    at_tau: &Snapshot,
    at_mu: &Snapshot,
) -> Result<GramSystem, IdentifierError> {
    let (dt, dr, dq, dphi, dw) = window_deltas(at_tau, at_mu)?;
    let b_mu = &at_mu.state.b;
    let y_mu = linalg::sub_vec(&at_mu.x, &at_mu.state.z);

    // G = dR - dQ'B_mu - B_mu'dQ + dt B_mu'B_mu
    let cross = dq.tr_mul(b_mu);
    let g = dr
        .sub(&cross)
        .sub(&cross.transpose())
        .add(&b_mu.tr_mul(b_mu).scaled(dt))
        .symmetrized();

    // Z = dphi - dQ'y_mu - B_mu'dw + dt B_mu'y_mu
    let dqt_ymu = dq.tr_matvec(&y_mu);
    let bmut_dw = b_mu.tr_matvec(&dw);
    let bmut_ymu = b_mu.tr_matvec(&y_mu);
    let z: Vec<f64> = (0..dphi.len())
        .map(|j| dphi[j] - dqt_ymu[j] - bmut_dw[j] + dt * bmut_ymu[j])
        .collect();
    Ok(GramSystem { g, z })
}

/// How the estimate moves once a window's constraint pair is available.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UpdatePolicy {
    /// Minimum-norm move onto the constraint set with relative rank
    /// truncation.
    MinNorm { rank_tol: f64 },
    /// Regularized solve `(eta I + G) theta = Z`.
    Tikhonov { eta: f64 },
    /// Skip the update entirely when the window carries too little
    /// excitation (`lambda_max(G) < eps`), otherwise behave like `MinNorm`.
    DeadZone { rank_tol: f64, eps: f64 },
}

/// Per-update diagnostics surfaced in event logs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateReport {
    pub rank: usize,
    pub residual: f64,
    pub skipped: bool,
}

pub fn update_estimate(
    theta_prev: &[f64],
    gram: &GramSystem,
    policy: UpdatePolicy,
) -> Result<(Vec<f64>, UpdateReport), IdentifierError> {
    match policy {
        UpdatePolicy::MinNorm { rank_tol } => {
            let up = linalg::min_norm_update(&gram.g, &gram.z, theta_prev, rank_tol)?;
            Ok((
                up.theta,
                UpdateReport {
                    rank: up.rank,
                    residual: up.residual,
                    skipped: false,
                },
            ))
        }
        UpdatePolicy::Tikhonov { eta } => {
            let theta = linalg::tikhonov_update(&gram.g, &gram.z, eta)?;
            let residual = linalg::norm(&linalg::sub_vec(&gram.g.matvec(&theta), &gram.z));
            Ok((
                theta,
                UpdateReport {
                    rank: gram.dim(),
                    residual,
                    skipped: false,
                },
            ))
        }
        UpdatePolicy::DeadZone { rank_tol, eps } => {
            if gram.max_eigenvalue()? < eps {
                Ok((
                    theta_prev.to_vec(),
                    UpdateReport {
                        rank: 0,
                        residual: 0.0,
                        skipped: true,
                    },
                ))
            } else {
                let up = linalg::min_norm_update(&gram.g, &gram.z, theta_prev, rank_tol)?;
                Ok((
                    up.theta,
                    UpdateReport {
                        rank: up.rank,
                        residual: up.residual,
                        skipped: false,
                    },
                ))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems;

    #[allow(clippy::too_many_arguments)]
    fn snapshot_scalar(
        t: f64,
        x: f64,
        z: f64,
        w: f64,
        b: f64,
        phi: f64,
        q: f64,
        r: f64,
    ) -> Snapshot {
        Snapshot {
            t,
            x: vec![x],
            state: IdentifierState {
                z: vec![z],
                w: vec![w],
                b: Matrix::from_row_major(1, 1, &[b]),
                phi: vec![phi],
                q: Matrix::from_row_major(1, 1, &[q]),
                r: Matrix::from_row_major(1, 1, &[r]),
            },
        }
    }

    /// Scalar accumulator snapshot for a synthetic regressor path B(t) whose
    /// innovation y = x - z follows a true parameter: y(t) = B(t) theta.
    /// All accumulator integrals are supplied in closed form; the snapshot
    /// carries x = y(t) with z = 0 so the innovation is consistent.
    #[allow(clippy::too_many_arguments)]
    fn snapshot_from_b_path(
        t: f64,
        y_now: f64,
        b: impl Fn(f64) -> f64,
        int_b: impl Fn(f64) -> f64,
        int_b2: impl Fn(f64) -> f64,
        int_b_y: impl Fn(f64) -> f64,
        int_y: impl Fn(f64) -> f64,
    ) -> Snapshot {
        snapshot_scalar(
            t,
            y_now,
            0.0,
            int_y(t),
            b(t),
            int_b_y(t),
            int_b(t),
            int_b2(t),
        )
    }

    #[test]
    fn zero_innovation_freezes_w_and_phi() {
        let plant = systems::example_disturbed().plant;
        let mut state = IdentifierState::zero(2, 1);
        state.z = vec![1.0, 1.0];
        state.b = Matrix::from_row_major(2, 1, &[3.0, -2.0]);
        let d = accumulator_rhs(&plant, &[1.0, 1.0], &[0.0], &state).unwrap();
        assert_eq!(d.w, vec![0.0, 0.0]);
        assert_eq!(d.phi, vec![0.0]);
    }

    #[test]
    fn zero_regressor_freezes_phi_q_r() {
        let plant = systems::example_planar().plant;
        let mut state = IdentifierState::zero(2, 2);
        state.z = vec![0.3, -0.1];
        // B = 0; x away from z so the innovation is nonzero.
        let d = accumulator_rhs(&plant, &[1.0, 2.0], &[0.5], &state).unwrap();
        assert_eq!(d.phi, vec![0.0, 0.0]);
        assert_eq!(d.q.max_abs(), 0.0);
        assert_eq!(d.r.max_abs(), 0.0);
    }

    #[test]
    fn disturbed_plant_accumulator_hand_values() {
        let plant = systems::example_disturbed().plant;
        let state = IdentifierState::zero(2, 1);
        let d = accumulator_rhs(&plant, &[1.0, 1.0], &[0.0], &state).unwrap();
        assert_eq!(d.z, vec![1.0, 0.0]);
        assert_eq!(d.b.data(), &[1.0, 0.0]);
    }

    #[test]
    fn flat_roundtrip_preserves_state() {
        let mut s = IdentifierState::zero(3, 2);
        s.z = vec![1.0, 2.0, 3.0];
        s.phi = vec![-1.0, 0.5];
        s.b = Matrix::from_row_major(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let mut flat = vec![0.0; IdentifierState::flat_len(3, 2)];
        s.write_flat(&mut flat);
        assert_eq!(IdentifierState::from_flat(3, 2, &flat), s);
    }

    #[test]
    fn mu_index_window_cases() {
        let w = WindowSpec {
            n_tilde: 2,
            t_dwell: 3.0,
        };
        let times = [0.0, 3.0, 6.0, 9.0];
        assert_eq!(mu_index(&times, 2, &w), (3.0, 1));

        let w7 = WindowSpec {
            n_tilde: 7,
            t_dwell: 3.0,
        };
        assert_eq!(mu_index(&[0.0, 3.0], 0, &w7), (0.0, 0));

        let w1 = WindowSpec {
            n_tilde: 1,
            t_dwell: 0.5,
        };
        assert_eq!(mu_index(&[0.0, 0.4], 0, &w1), (0.0, 0));
    }

    #[test]
    fn mu_index_is_earliest_admissible_event() {
        // Irregular schedules: the returned index is the first event inside
        // the lookback horizon.
        let times = [0.0, 0.2, 0.9, 1.0, 1.7, 2.1];
        let w = WindowSpec {
            n_tilde: 2,
            t_dwell: 0.6,
        };
        for i in 0..times.len() - 1 {
            let (t_mu, j) = mu_index(&times, i, &w);
            let cutoff = times[i + 1] - 1.2;
            assert!(t_mu >= cutoff);
            assert!(j <= i);
            if j > 0 {
                assert!(times[j - 1] < cutoff, "not the earliest admissible event");
            }
        }
    }

    #[test]
    fn zero_width_window_gives_zero_system() {
        let s = snapshot_scalar(1.0, 0.5, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6);
        let g = gram_from_snapshots(&s, &s).unwrap();
        assert_eq!(g.g.max_abs(), 0.0);
        assert_eq!(g.z, vec![0.0]);
        let gs = gram_single_integral(&s, &s).unwrap();
        assert_eq!(gs.g.max_abs(), 0.0);
        assert!(matches!(
            gram_from_snapshots(&snapshot_scalar(0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0), &s),
            Err(IdentifierError::TimeOrdering { .. })
        ));
    }

    #[test]
    fn linear_regressor_closed_form() {
        // B(t) = t, y(t) = 0.5 t: R = t^3/3, Q = t^2/2, phi = t^3/6, w = t^2/4.
        let theta = 0.5;
        let snap = |t: f64| {
            snapshot_from_b_path(
                t,
                theta * t,
                |t| t,
                |t| t * t / 2.0,
                |t| t * t * t / 3.0,
                |t| theta * t * t * t / 3.0,
                |t| theta * t * t / 2.0,
            )
        };
        let g = gram_from_snapshots(&snap(2.0), &snap(0.0)).unwrap();
        assert!((g.g[(0, 0)] - 4.0 / 3.0).abs() < 1e-12);
        assert!((g.z[0] - 2.0 / 3.0).abs() < 1e-12);
        // Consistent with the generating parameter.
        assert!((g.z[0] - g.g[(0, 0)] * theta).abs() < 1e-12);

        let gs = gram_single_integral(&snap(2.0), &snap(0.0)).unwrap();
        assert!((gs.g[(0, 0)] - 8.0 / 3.0).abs() < 1e-12);
        assert!((gs.z[0] - gs.g[(0, 0)] * theta).abs() < 1e-12);
    }

    #[test]
    fn window_not_anchored_at_zero_reduces_to_cumulative_difference() {
        // With B(mu) = 0 the single-integral expansion collapses to dR / dphi.
        let theta = -1.25;
        let snap_zero_b =
            |t: f64, r: f64, phi: f64| snapshot_scalar(t, 0.0, 0.0, 0.0, 0.0, phi, 0.0, r);
        let a = snap_zero_b(2.0, 3.0, 3.0 * theta);
        let b = snap_zero_b(1.0, 1.0, theta);
        let gs = gram_single_integral(&a, &b).unwrap();
        assert!((gs.g[(0, 0)] - 2.0).abs() < 1e-14);
        assert!((gs.z[0] - 2.0 * theta).abs() < 1e-12);
    }

    /// Composite Simpson weights on [a, b] with an even number of panels.
    fn simpson_weights(a: f64, b: f64, points: usize) -> (Vec<f64>, Vec<f64>) {
        assert!(points % 2 == 1 && points >= 3);
        let h = (b - a) / (points - 1) as f64;
        let ts: Vec<f64> = (0..points).map(|k| a + h * k as f64).collect();
        let ws: Vec<f64> = (0..points)
            .map(|k| {
                if k == 0 || k == points - 1 {
                    h / 3.0
                } else if k % 2 == 1 {
                    4.0 * h / 3.0
                } else {
                    2.0 * h / 3.0
                }
            })
            .collect();
        (ts, ws)
    }

    #[test]
    fn snapshot_algebra_matches_quadrature_with_factor_two() {
        // Smooth scalar path B(t) = sin t with y = theta sin t; accumulators
        // in closed form. The symmetric double integral of q^2 must equal
        // twice the snapshot formula; the single integral must match it
        // exactly.
        let theta = 0.8;
        let snap = |t: f64| {
            snapshot_from_b_path(
                t,
                theta * libm::sin(t),
                libm::sin,
                |t| 1.0 - libm::cos(t),
                |t| t / 2.0 - libm::sin(2.0 * t) / 4.0,
                |t| theta * (t / 2.0 - libm::sin(2.0 * t) / 4.0),
                |t| theta * (1.0 - libm::cos(t)),
            )
        };
        let (mu, tau) = (0.3, 2.1);
        let g2 = gram_from_snapshots(&snap(tau), &snap(mu)).unwrap();
        let g1 = gram_single_integral(&snap(tau), &snap(mu)).unwrap();

        let (ts, ws) = simpson_weights(mu, tau, 201);
        let mut g_double = 0.0;
        let mut z_double = 0.0;
        let mut g_single = 0.0;
        let mut z_single = 0.0;
        for (i, &t) in ts.iter().enumerate() {
            let q_t0 = libm::sin(t) - libm::sin(mu);
            g_single += ws[i] * q_t0 * q_t0;
            z_single += ws[i] * q_t0 * (theta * libm::sin(t) - theta * libm::sin(mu));
            for (j, &s) in ts.iter().enumerate() {
                let q = libm::sin(t) - libm::sin(s);
                let p = theta * q;
                g_double += ws[i] * ws[j] * q * q;
                z_double += ws[i] * ws[j] * q * p;
            }
        }
        assert!((2.0 * g2.g[(0, 0)] - g_double).abs() <= 1e-8 * g_double.abs());
        assert!((2.0 * g2.z[0] - z_double).abs() <= 1e-8 * z_double.abs());
        assert!((g1.g[(0, 0)] - g_single).abs() <= 1e-8 * g_single.abs());
        assert!((g1.z[0] - z_single).abs() <= 1e-8 * z_single.abs());
    }

    #[test]
    fn update_estimate_policies() {
        let zero = GramSystem::zero(2);
        let prev = vec![1.5, -2.5];
        let (theta, rep) =
            update_estimate(&prev, &zero, UpdatePolicy::MinNorm { rank_tol: 1e-9 }).unwrap();
        assert_eq!(theta, prev);
        assert_eq!(rep.rank, 0);
        assert!(!rep.skipped);

        // Scalar full-rank constraint reduces to the plain quotient.
        let scalar = GramSystem {
            g: Matrix::from_row_major(1, 1, &[2.0]),
            z: vec![3.0],
        };
        let (theta, rep) =
            update_estimate(&[0.0], &scalar, UpdatePolicy::MinNorm { rank_tol: 1e-9 }).unwrap();
        assert!((theta[0] - 1.5).abs() < 1e-14);
        assert_eq!(rep.rank, 1);

        // Dead zone boundary: lambda_max = eps / 2 skips the update.
        let weak = GramSystem {
            g: Matrix::from_row_major(1, 1, &[0.5e-6]),
            z: vec![1.0],
        };
        let (theta, rep) = update_estimate(
            &[7.0],
            &weak,
            UpdatePolicy::DeadZone {
                rank_tol: 1e-9,
                eps: 1e-6,
            },
        )
        .unwrap();
        assert_eq!(theta, vec![7.0]);
        assert!(rep.skipped);

        let (theta, rep) = update_estimate(
            &[7.0],
            &scalar,
            UpdatePolicy::DeadZone {
                rank_tol: 1e-9,
                eps: 1e-6,
            },
        )
        .unwrap();
        assert!((theta[0] - 1.5).abs() < 1e-14);
        assert!(!rep.skipped);

        let (theta, _) =
            update_estimate(&[0.0], &scalar, UpdatePolicy::Tikhonov { eta: 1e-8 }).unwrap();
        assert!((theta[0] - 1.5).abs() < 1e-7);
    }
}
