//! Hybrid what-if reasoning over table-top scenes: parse an action
//! description, simulate it, find the affected objects and describe what
//! happens to them.

pub mod action;
pub mod catalog;
pub mod codec;
pub mod datagen;
pub mod describer;
pub mod effects;
mod error;
pub mod exec;
pub mod io;
pub mod metrics;
pub mod parser;
pub mod physics;
pub mod pipeline;
pub mod scene;
pub mod trajectory;

pub use error::{Error, Result};
