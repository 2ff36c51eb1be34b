//! Property-based checks over randomly generated schedules and constraint
//! systems.

use proptest::prelude::*;
use retrig_core::identifier::{mu_index, WindowSpec};
use retrig_core::linalg::{self, Matrix};
use retrig_core::trigger::next_event_time;

proptest! {
    /// The window start is always the earliest event inside the lookback
    /// horizon, and never after the event that triggered the update.
    #[test]
    fn mu_index_picks_earliest_admissible(
        gaps in prop::collection::vec(0.01f64..1.0, 1..20),
        n_tilde in 1usize..8,
    ) {
        let t_dwell = 1.0;
        let mut times = vec![0.0];
        for g in &gaps {
            // Gaps never exceed the dwell cap.
            times.push(times.last().unwrap() + g.min(t_dwell));
        }
        let w = WindowSpec { n_tilde, t_dwell };
        for i in 0..times.len() - 1 {
            let (t_mu, j) = mu_index(&times, i, &w);
            let cutoff = times[i + 1] - n_tilde as f64 * t_dwell;
            prop_assert!(j <= i);
            prop_assert!(t_mu >= cutoff);
            if j > 0 {
                prop_assert!(times[j - 1] < cutoff);
            }
        }
    }

    /// The schedule picks whichever of guard time and dwell cap comes first.
    #[test]
    fn schedule_is_min_of_guard_and_dwell(
        tau in 0.0f64..100.0,
        dwell in 0.001f64..10.0,
        guard_gap in prop::option::of(0.0001f64..20.0),
    ) {
        let r = guard_gap.map_or(f64::INFINITY, |g| tau + g);
        let next = next_event_time(tau, dwell, r);
        prop_assert!(next <= tau + dwell + 1e-12);
        prop_assert!(next <= r);
        prop_assert!(next == r || next == tau + dwell);
    }

    /// Minimum-norm updates never move the estimate farther from any
    /// solution of the constraint, and applying the same window twice
    /// changes nothing.
    #[test]
    fn min_norm_is_a_projection(
        lam in prop::collection::vec(0.0f64..4.0, 1..5),
        seed_theta in prop::collection::vec(-2.0f64..2.0, 1..5),
        seed_prev in prop::collection::vec(-2.0f64..2.0, 1..5),
    ) {
        let n = lam.len().min(seed_theta.len()).min(seed_prev.len());
        let lam = &lam[..n];
        let theta_star = &seed_theta[..n];
        let prev = &seed_prev[..n];
        let g = Matrix::diag(lam);
        let z = g.matvec(theta_star);
        let up = linalg::min_norm_update(&g, &z, prev, 1e-9).unwrap();
        let d_new = linalg::norm(&linalg::sub_vec(&up.theta, theta_star));
        let d_old = linalg::norm(&linalg::sub_vec(prev, theta_star));
        prop_assert!(d_new <= d_old + 1e-9);
        let again = linalg::min_norm_update(&g, &z, &up.theta, 1e-9).unwrap();
        prop_assert!(linalg::norm(&linalg::sub_vec(&again.theta, &up.theta)) <= 1e-9);
    }
}
