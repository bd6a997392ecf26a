//! Stochastic closest-pair statistics and most-likely Voronoi diagrams for
//! existentially uncertain points on weighted tree networks.

pub mod closest_pair;
pub mod error;
pub mod expectation;
pub mod length;
pub mod lvd;
pub mod oracle;
pub mod reduction;
pub mod tree_space;

pub use error::{Error, Result};
pub use length::Length;
pub use tree_space::{
    generate_random, parse_instance, serialize_instance, Direction, Edge, Instance, Location,
    PointId, ProbModel, StochasticPoint, WeightedTree,
};
