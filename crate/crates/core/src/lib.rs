pub mod envs;
pub mod harness;
pub mod numcore;
pub mod planner;
pub mod rng;
pub mod tactile;
pub mod worldmodel;
