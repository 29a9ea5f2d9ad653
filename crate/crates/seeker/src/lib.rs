//! Seeker: a partially observable 2D pathfinding environment with a
//! from-scratch DQN / DQN-GRU / DQN-LSTM training and evaluation harness.
//!
//! The agent is a disc in a continuous scene derived from a random gridworld.
//! It sees a slice-based depth view (distance plus target/other label per
//! slice), moves by five discrete turn-and-advance actions, and is trained
//! with experience replay, a target network, and an obstacle-count
//! curriculum. Everything is seeded and deterministic end to end.

pub mod dqn;
pub mod env;
pub mod error;
pub mod gridgen;
pub mod harness;
pub mod neural;
pub mod rng;
pub mod vision;
pub mod world;

pub use error::{Result, SeekerError};
pub use rng::Rng;
