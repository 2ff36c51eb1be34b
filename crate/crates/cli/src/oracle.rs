//! Quadrature oracle: rebuilds windowed constraint pairs by direct
//! two-dimensional composite-Simpson integration over a run's stored dense
//! trajectory, independently of the snapshot algebra it cross-checks.

use retrig_core::linalg::Matrix;
use retrig_core::{GramSystem, IdentifierState, RunResult};

/// Composite Simpson abscissas and weights on `[a, b]`; `points` must be
/// odd and at least 3.
fn simpson(a: f64, b: f64, points: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(
        points % 2 == 1 && points >= 3,
        "Simpson needs an odd point count"
    );
    let h = (b - a) / (points - 1) as f64;
    let ts = (0..points).map(|k| a + h * k as f64).collect();
    let ws = (0..points)
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

/// Direct double-integral evaluation of the windowed constraint pair over
/// `[t_lo, t_hi]^2`:
///
/// ```text
/// G = integral integral q'(t,s) q(t,s) ds dt,  q(t,s) = B(t) - B(s)
/// Z = integral integral q'(t,s) p(t,s) ds dt,  p(t,s) = y(t) - y(s)
/// ```
///
/// where `B` and `y = x - z` are read off the run's augmented dense state.
/// This is the full symmetric double integral: exactly twice the
/// snapshot-formula value.
pub fn gram_by_quadrature(run: &RunResult, t_lo: f64, t_hi: f64, points: usize) -> GramSystem {
    let (n, l) = (run.n, run.l);
    let (ts, ws) = simpson(t_lo, t_hi, points);

    // Cache regressor primitive and innovation at every node.
    let mut b_at: Vec<Matrix> = Vec::with_capacity(ts.len());
    let mut y_at: Vec<Vec<f64>> = Vec::with_capacity(ts.len());
    for &t in &ts {
        let state = run.state_at(t);
        let acc = IdentifierState::from_flat(n, l, &state[n..n + IdentifierState::flat_len(n, l)]);
        let y: Vec<f64> = (0..n).map(|i| state[i] - acc.z[i]).collect();
        b_at.push(acc.b);
        y_at.push(y);
    }

    let mut g = Matrix::zeros(l, l);
    let mut z = vec![0.0; l];
    for (i, &wi) in ws.iter().enumerate() {
        for (j, &wj) in ws.iter().enumerate() {
            let w = wi * wj;
            // q = B(t_i) - B(t_j), p = y(t_i) - y(t_j)
            for a in 0..l {
                let mut zq = 0.0;
                for r in 0..n {
                    let q_ra = b_at[i][(r, a)] - b_at[j][(r, a)];
                    zq += q_ra * (y_at[i][r] - y_at[j][r]);
                    for b in a..l {
                        let q_rb = b_at[i][(r, b)] - b_at[j][(r, b)];
                        g[(a, b)] += w * q_ra * q_rb;
                    }
                }
                z[a] += w * zq;
            }
        }
    }
    for a in 0..l {
        for b in 0..a {
            g[(a, b)] = g[(b, a)];
        }
    }
    GramSystem { g, z }
}
