//! Singular stochastic control through finite occupation-measure linear
//! programs.

pub mod basis;
pub mod discretize;
pub mod model;
pub mod policy;
pub mod simplex;
pub mod verify;
