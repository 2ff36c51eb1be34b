//! Named presets reproducing the robustness study's figure set. Figure
//! names that show different views of the same run (state plot, estimation
//! error, transient zoom) share one underlying scenario.

use crate::config::{ComparatorChoice, IdentifierChoice, ScenarioConfig, SystemId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Nominal,
    Comparator,
    EventTriggered,
}

/// `(preset, mode, a1, a2, description)`.
const PRESETS: &[(&str, Mode, f64, f64, &str)] = &[
    (
        "fig1",
        Mode::Nominal,
        0.0,
        0.0,
        "nominal known-parameter loop, no disturbance",
    ),
    (
        "fig2",
        Mode::Comparator,
        0.0,
        0.0,
        "continuous-tuning comparator, no disturbance",
    ),
    (
        "fig3",
        Mode::Comparator,
        0.0,
        0.0,
        "continuous-tuning comparator, no disturbance (estimation error view)",
    ),
    (
        "fig4",
        Mode::EventTriggered,
        0.0,
        0.0,
        "event-triggered adaptive loop, no disturbance",
    ),
    (
        "fig5",
        Mode::EventTriggered,
        0.0,
        0.0,
        "event-triggered adaptive loop, no disturbance (error transient view)",
    ),
    (
        "fig6",
        Mode::EventTriggered,
        0.0,
        0.0,
        "event-triggered adaptive loop, no disturbance (state transient view)",
    ),
    (
        "fig7",
        Mode::Nominal,
        2.0,
        0.0,
        "nominal known-parameter loop, vanishing disturbance",
    ),
    (
        "fig8",
        Mode::Comparator,
        2.0,
        0.0,
        "continuous-tuning comparator, vanishing disturbance",
    ),
    (
        "fig9",
        Mode::Comparator,
        2.0,
        0.0,
        "continuous-tuning comparator, vanishing disturbance (estimation error view)",
    ),
    (
        "fig10",
        Mode::EventTriggered,
        2.0,
        0.0,
        "event-triggered adaptive loop, vanishing disturbance",
    ),
    (
        "fig11",
        Mode::EventTriggered,
        2.0,
        0.0,
        "event-triggered adaptive loop, vanishing disturbance (estimation error view)",
    ),
    (
        "fig12",
        Mode::EventTriggered,
        2.0,
        0.0,
        "event-triggered adaptive loop, vanishing disturbance (state transient view)",
    ),
    (
        "fig13",
        Mode::EventTriggered,
        2.0,
        0.0,
        "event-triggered adaptive loop, vanishing disturbance (error transient view)",
    ),
    (
        "fig14",
        Mode::Nominal,
        0.0,
        2.0,
        "nominal known-parameter loop, non-vanishing disturbance",
    ),
    (
        "fig15",
        Mode::Comparator,
        0.0,
        2.0,
        "continuous-tuning comparator, non-vanishing disturbance",
    ),
    (
        "fig16",
        Mode::Comparator,
        0.0,
        2.0,
        "continuous-tuning comparator, non-vanishing disturbance (estimation error view)",
    ),
    (
        "fig17",
        Mode::EventTriggered,
        0.0,
        2.0,
        "event-triggered adaptive loop, non-vanishing disturbance",
    ),
    (
        "fig18",
        Mode::EventTriggered,
        0.0,
        2.0,
        "event-triggered adaptive loop, non-vanishing disturbance (estimation error view)",
    ),
    (
        "fig19",
        Mode::EventTriggered,
        0.0,
        2.0,
        "event-triggered adaptive loop, non-vanishing disturbance (state transient view)",
    ),
    (
        "fig20",
        Mode::EventTriggered,
        0.0,
        2.0,
        "event-triggered adaptive loop, non-vanishing disturbance (error transient view)",
    ),
];

fn build(mode: Mode, a1: f64, a2: f64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::defaults(SystemId::DisturbedS6);
    cfg.theta_true = vec![1.0];
    cfg.theta_hat0 = vec![-4.0];
    cfg.x0 = vec![1.0, 1.0];
    cfg.t_dwell = 3.0;
    cfg.n_tilde = 7;
    cfg.a_scale = 1.0 / 20.0;
    cfg.eps = 1e-6;
    cfg.gamma = 5.0;
    cfg.a1 = a1;
    cfg.a2 = a2;
    cfg.t_end = 20.0;
    cfg.identifier = IdentifierChoice::Scalar;
    cfg.comparator = match mode {
        Mode::Nominal => ComparatorChoice::Nominal,
        Mode::Comparator => ComparatorChoice::ExtendedMatching,
        Mode::EventTriggered => ComparatorChoice::None,
    };
    cfg
}

/// Expands a preset name into its scenario, if known.
pub fn expand(name: &str) -> Option<ScenarioConfig> {
    PRESETS
        .iter()
        .find(|(n, ..)| *n == name)
        .map(|&(_, mode, a1, a2, _)| build(mode, a1, a2))
}

/// All preset names with one-line descriptions.
pub fn listing() -> Vec<(&'static str, &'static str)> {
    PRESETS.iter().map(|&(n, _, _, _, d)| (n, d)).collect()
}

pub fn names() -> Vec<&'static str> {
    PRESETS.iter().map(|&(n, ..)| n).collect()
}
