//! Simulation and identification engine for event-triggered adaptive
//! certainty-equivalence control of parameter-affine plants
//! `x' = f(x,u) + g(x,u)·theta`.
//!
//! The crate is organized around the hybrid closed loop: a nominal feedback
//! `u = k(theta_hat, x)` runs with a frozen parameter estimate between
//! events, a Lyapunov-threshold trigger decides when the next event fires,
//! and at each event a finite-time least-squares identifier rebuilds the
//! estimate from windowed integral data.
//!
//! - [`linalg`]: small dense symmetric eigensolver, minimum-norm
//!   equality-constrained updates, Tikhonov-regularized solves.
//! - [`ode`]: adaptive Dormand-Prince 5(4) integration with dense output
//!   and first-crossing guard localization.
//! - [`identifier`]: the accumulator ODE block, windowed Gram systems and
//!   parameter update policies.
//! - [`trigger`]: control law, event schedule, trigger margins and the
//!   closed-loop runner.
//! - [`systems`]: catalog of concrete plants, controllers and Lyapunov
//!   pairs, plus the continuous-tuning comparator.
//!
//! The crate is `no_std` (with `alloc`); all floating-point transcendentals
//! go through `libm` so results are reproducible across platforms.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod identifier;
pub mod linalg;
pub mod ode;
pub mod systems;
pub mod trigger;

pub use identifier::{
    GramSystem, IdentifierState, Snapshot, UpdatePolicy, UpdateReport, WindowSpec,
};
pub use linalg::{Matrix, SymEig};
pub use ode::IntegratorConfig;
pub use systems::{DisturbanceSpec, LtiSpec, PlantCatalogEntry, PlantModel};
pub use trigger::{
    ClosedLoopSetup, EventCause, EventRecord, IdVariant, NominalController, RunKind, RunResult,
    RunSummary, TriggerConfig,
};
