//! Kit assembly by dense shape matching on a procedural 2D simulator.

pub mod collect;
pub mod config;
pub mod learn;
pub mod mask;
pub mod rng;
pub mod render;
pub mod scene;
pub mod sim;
