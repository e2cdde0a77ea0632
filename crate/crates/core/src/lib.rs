pub mod autodiff;
pub mod geometry;
pub mod network;
pub mod physics;
pub mod training;
pub mod evaluation;
pub mod cli;
