//! Dynamic-balance biped locomotion stack.
//!
//! The crate is organized around five subsystems:
//!
//! - [`dynamics`]: articulated rigid-body biped model, forward kinematics,
//!   momentum bookkeeping, PD actuation, penalty contact and time integration.
//! - [`balance`]: zero-moment-point / zero-moment-line math and the two
//!   balance rewards built on it.
//! - [`terrain`]: procedural narrow terrains (flat, slope, stairs) with a
//!   20-level difficulty curriculum and height-field queries.
//! - [`env`]: the goal-conditioned RL environment — command sampling,
//!   observation assembly, the vectorized reward suite, domain randomization,
//!   pushes, termination and episode metrics.
//! - [`learn`]: actor/critic MLPs with manual backprop, PPO with vectorized
//!   rewards and multi-head values, GAE, symmetry regularization, curriculum
//!   promotion and checkpointing.

pub mod balance;
pub mod dynamics;
pub mod env;
pub mod learn;
pub mod rng;
pub mod terrain;
