//! Built-in invariant suite behind `retrig selftest`: quick deterministic
//! checks of the eigensolver, the minimum-norm update, the closed-loop
//! Lyapunov identities, the dead-beat property on the catalog systems, the
//! quadrature factor convention and output determinism.

use retrig_core::linalg::{self, Matrix};
use retrig_core::systems::{example_lti_scalar, example_planar};
use retrig_core::trigger::{
    run_closed_loop, run_nominal, ClosedLoopSetup, IdVariant, TriggerConfig,
};
use retrig_core::{IntegratorConfig, UpdatePolicy};

use crate::config::{IdentifierChoice, ScenarioConfig, SystemId};
use crate::oracle::gram_by_quadrature;
use crate::rng::SplitMix64;
use crate::run::run_scenario;

struct Report {
    failures: usize,
}

impl Report {
    fn check(&mut self, name: &str, outcome: Result<(), String>) {
        match outcome {
            Ok(()) => println!("selftest: {name:<44} ok"),
            Err(why) => {
                self.failures += 1;
                println!("selftest: {name:<44} FAIL ({why})");
            }
        }
    }
}

fn ensure(cond: bool, why: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(why.into())
    }
}

fn random_symmetric(rng: &mut SplitMix64, n: usize) -> Matrix {
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = rng.range(-1.0, 1.0);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

fn eigensolver_reconstruction() -> Result<(), String> {
    let mut rng = SplitMix64::new(1);
    for _ in 0..5 {
        let s = random_symmetric(&mut rng, 6);
        let e = linalg::sym_eig(&s).map_err(|e| e.to_string())?;
        let err = e.reconstruct().sub(&s).frobenius_norm();
        let bound = 1e-10 * s.frobenius_norm().max(1.0);
        ensure(err <= bound, format!("reconstruction error {err:e}"))?;
        for w in e.eigenvalues.windows(2) {
            ensure(w[0] >= w[1], "eigenvalues not sorted descending")?;
        }
    }
    Ok(())
}

fn min_norm_projection() -> Result<(), String> {
    let mut rng = SplitMix64::new(2);
    for _ in 0..20 {
        let n = 2 + (rng.next_u64() % 4) as usize;
        let rank = (rng.next_u64() % (n as u64 + 1)) as usize;
        let mut lam = vec![0.0; n];
        for v in lam.iter_mut().take(rank) {
            *v = rng.range(0.2, 3.0);
        }
        let g = Matrix::diag(&lam);
        let theta_star: Vec<f64> = (0..n).map(|_| rng.range(-2.0, 2.0)).collect();
        let prev: Vec<f64> = (0..n).map(|_| rng.range(-2.0, 2.0)).collect();
        let z = g.matvec(&theta_star);
        let up = linalg::min_norm_update(&g, &z, &prev, 1e-9).map_err(|e| e.to_string())?;
        ensure(
            up.rank == rank,
            format!("rank {} vs expected {rank}", up.rank),
        )?;
        let defect = linalg::norm(&linalg::sub_vec(&g.matvec(&up.theta), &z));
        ensure(defect <= 1e-9, format!("constraint defect {defect:e}"))?;
        let again = linalg::min_norm_update(&g, &z, &up.theta, 1e-9).map_err(|e| e.to_string())?;
        let moved = linalg::norm(&linalg::sub_vec(&again.theta, &up.theta));
        ensure(moved <= 1e-10, format!("not idempotent: moved {moved:e}"))?;
    }
    Ok(())
}

fn matched_lyapunov_decay() -> Result<(), String> {
    let entry = example_planar();
    let cfg = IntegratorConfig::default();
    let theta = [0.4, -0.8];
    let x0 = [1.0, 0.5];
    let r = run_nominal(
        &entry.plant,
        &entry.controller,
        &theta,
        0.0,
        &x0,
        3.0,
        &cfg,
        None,
    )
    .map_err(|e| e.to_string())?;
    let v0 = entry.controller.eval_v(&theta, &x0);
    for k in 0..=300 {
        let t = k as f64 / 100.0;
        let v = entry.controller.eval_v(&theta, &r.x_at(t));
        let expected = v0 * (-2.0 * t).exp();
        ensure(
            (v - expected).abs() <= 100.0 * cfg.rel_tol * v0,
            format!("decay identity broke at t={t}"),
        )?;
    }
    Ok(())
}

fn scalar_plant_deadbeat_and_quadrature() -> Result<(), String> {
    let mut cfg = ScenarioConfig::defaults(SystemId::DisturbedS6);
    cfg.theta_true = vec![1.0];
    cfg.theta_hat0 = vec![-4.0];
    cfg.x0 = vec![1.0, 1.0];
    cfg.t_dwell = 3.0;
    cfg.n_tilde = 7;
    cfg.eps = 1e-6;
    cfg.identifier = IdentifierChoice::Double;
    cfg.t_end = 0.3;
    let out = run_scenario(&cfg).map_err(|e| e.to_string())?;
    let first = out
        .result
        .summary
        .first_event_time
        .ok_or_else(|| "no event fired".to_string())?;
    ensure(
        (0.01..=0.04).contains(&first),
        format!("first event at {first}"),
    )?;
    let conv = out
        .result
        .summary
        .convergence_time
        .ok_or_else(|| "estimate did not converge".to_string())?;
    ensure(conv <= 0.05, format!("convergence at {conv}"))?;

    // Window over [0, tau_1]: snapshot algebra vs direct double-integral
    // quadrature (factor two), and consistency with the true parameter.
    let ev = &out.result.events[1];
    let gram =
        retrig_core::identifier::gram_from_snapshots(&ev.snapshot, &out.result.events[0].snapshot)
            .map_err(|e| e.to_string())?;
    let quad = gram_by_quadrature(&out.result, 0.0, ev.tau, 65);
    let g_rel = (2.0 * gram.g[(0, 0)] - quad.g[(0, 0)]).abs() / quad.g[(0, 0)].abs();
    let z_rel = (2.0 * gram.z[0] - quad.z[0]).abs() / quad.z[0].abs();
    ensure(
        g_rel <= 1e-6,
        format!("quadrature factor check failed for G: {g_rel:e}"),
    )?;
    ensure(
        z_rel <= 1e-6,
        format!("quadrature factor check failed for Z: {z_rel:e}"),
    )?;
    let defect = linalg::norm(&linalg::sub_vec(&gram.g.matvec(&[1.0]), &gram.z));
    let bound = 1e-6 * (1.0 + gram.g.frobenius_norm());
    ensure(
        defect <= bound,
        format!("window inconsistent with true parameter: {defect:e}"),
    )
}

fn lti_deadbeat() -> Result<(), String> {
    let sys = example_lti_scalar(1.0).map_err(|e| e.to_string())?;
    let trig = TriggerConfig {
        t_dwell: 1.0,
        eps: 0.0,
        a_fn: Box::new(|x: &[f64]| linalg::norm_sq(x)),
        margin_override: Some(sys.norm_margin),
    };
    let setup = ClosedLoopSetup {
        plant: &sys.entry.plant,
        controller: &sys.entry.controller,
        trigger: &trig,
        n_tilde: 2,
        policy: UpdatePolicy::MinNorm { rank_tol: 1e-9 },
        variant: IdVariant::DoubleIntegral,
        theta_true: &[0.7],
        theta_hat0: &[-0.5],
        x0: &[1.0],
        t_end: 2.5,
        integrator: IntegratorConfig {
            rel_tol: 1e-11,
            abs_tol: 1e-14,
            max_step: 0.05,
            event_tol: 1e-10,
        },
        disturbance: None,
    };
    let r = run_closed_loop(&setup).map_err(|e| e.to_string())?;
    for e in r.events.iter().filter(|e| e.tau >= 1.0 - 1e-9) {
        ensure(
            (e.theta_after[0] - 0.7).abs() <= 1e-6,
            format!("estimate off at {}", e.tau),
        )?;
    }
    ensure(
        r.summary.convergence_time.is_some_and(|t| t <= 1.0 + 1e-9),
        "no one-dwell convergence",
    )
}

fn deterministic_output() -> Result<(), String> {
    let mut cfg = ScenarioConfig::defaults(SystemId::DisturbedS6);
    cfg.theta_true = vec![1.0];
    cfg.theta_hat0 = vec![-4.0];
    cfg.x0 = vec![1.0, 1.0];
    cfg.t_dwell = 3.0;
    cfg.n_tilde = 7;
    cfg.eps = 1e-6;
    cfg.identifier = IdentifierChoice::Scalar;
    cfg.t_end = 0.2;
    let a = run_scenario(&cfg).map_err(|e| e.to_string())?;
    let b = run_scenario(&cfg).map_err(|e| e.to_string())?;
    ensure(a.rows.len() == b.rows.len(), "row counts differ")?;
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        let same =
            ra.t == rb.t && ra.x == rb.x && ra.u == rb.u && ra.theta == rb.theta && ra.v == rb.v;
        ensure(same, format!("rows differ at t={}", ra.t))?;
    }
    Ok(())
}

/// Runs every check, printing one line per check. Returns `true` when all
/// pass.
pub fn run_selftest() -> bool {
    let mut report = Report { failures: 0 };
    report.check("eigensolver reconstruction", eigensolver_reconstruction());
    report.check("minimum-norm projection invariants", min_norm_projection());
    report.check(
        "matched-loop exponential Lyapunov decay",
        matched_lyapunov_decay(),
    );
    report.check(
        "scalar-plant dead-beat + quadrature factor",
        scalar_plant_deadbeat_and_quadrature(),
    );
    report.check("linear catalog dead-beat in one dwell", lti_deadbeat());
    report.check("deterministic re-run", deterministic_output());
    if report.failures == 0 {
        println!("selftest: all checks passed");
        true
    } else {
        println!("selftest: {} check(s) FAILED", report.failures);
        false
    }
}
