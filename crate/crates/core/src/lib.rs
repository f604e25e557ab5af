//! Deterministic, seedable simulation of a vision-guided human-robot
//! collaborative assembly cell.
//!
//! The simulated system is a robot that fetches assembly parts (table legs)
//! from a storage area under closed-loop visual servoing, passes them to a
//! delivery point, and releases them when its action-recognition channel
//! observes consecutive human grasp predictions. A stochastic human model
//! receives each part and assembles it. Everything runs inside a single
//! discrete-event loop keyed on exact integer-microsecond timestamps, so a
//! `(config, seed)` pair fully determines the serialized trace.
//!
//! Layered on top of the simulator is the evaluation stack: per-cycle timing
//! and fluency metrics, success-rate decomposition, repetition-decay algebra,
//! the Wilcoxon signed-rank test, Likert scoring and Cronbach's alpha.
//!
//! Core numeric kernels (geometry, the servo value function, the statistics)
//! are generic over the scalar type via [`scalar::Scalar`]; the simulator
//! itself is pinned to [`Real`] so that trace files have a single stable
//! schema.

pub mod action;
pub mod engine;
pub mod error;
pub mod eval;
pub mod event;
pub mod fsm;
pub mod geom;
pub mod human;
pub mod percept;
pub mod rng;
pub mod scalar;
pub mod scene;
pub mod servo;
pub mod time;
pub mod trace;

/// Scalar type used by the simulator and all serialized artifacts.
pub type Real = f64;

/// 3-vector over [`Real`], the concrete geometry type used by the simulator.
pub type Vec3 = geom::Vector3<Real>;

/// Axis-aligned box over [`Real`].
pub type Aabb = geom::Aabb<Real>;

/// Version tag written into every trace header; bump on schema changes.
pub const SCHEMA_VERSION: u32 = 1;

pub use action::AtomicAction;
pub use error::{Error, Result};
pub use rng::{seeded_rng, SimRng};
pub use time::SimTime;
