//! Two-stage stochastic linear programming with the L-shaped method and
//! configurable cut aggregation.

pub mod lp;
pub mod problem;
pub mod generate;
pub mod cuts;
pub mod aggregation;
pub mod bounds;
pub mod engine;
pub mod parse;
pub mod bench;
