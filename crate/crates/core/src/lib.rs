pub mod calibration;
pub mod config;
pub mod geometry;
pub mod grasp;
pub mod log;
pub mod longrun;
pub mod motion;
pub mod orchestrator;
pub mod perception;
pub mod rng;
pub mod scoring;
pub mod task;
pub mod world;
