use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::{RngExt, SeedableRng};
use rand_xoshiro::SplitMix64;

use super::{Edge, Instance, Location, StochasticPoint, WeightedTree};
use crate::error::{Error, Result};
use crate::length::Length;

/// How existence probabilities are drawn.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProbModel {
    /// Uniform on (0, 1].
    Uniform,
    /// Every point gets the same probability.
    Fixed(f64),
    /// Uniform on [lo, 1].
    UniformFrom(f64),
}

impl ProbModel {
    fn draw(self, rng: &mut SplitMix64) -> f64 {
        match self {
            ProbModel::Uniform => 1.0 - rng.random::<f64>(),
            ProbModel::Fixed(p) => p,
            ProbModel::UniformFrom(lo) => lo + (1.0 - lo) * (1.0 - rng.random::<f64>()),
        }
    }

    fn validate(self) -> Result<()> {
        match self {
            ProbModel::Uniform => Ok(()),
            ProbModel::Fixed(p) | ProbModel::UniformFrom(p) if (0.0..=1.0).contains(&p) => Ok(()),
            _ => Err(Error::InvalidArgument(format!("probability model {self} out of [0,1]"))),
        }
    }
}

impl fmt::Display for ProbModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProbModel::Uniform => write!(f, "uniform"),
            ProbModel::Fixed(p) => write!(f, "fixed:{p}"),
            ProbModel::UniformFrom(lo) => write!(f, "uniform:{lo}"),
        }
    }
}

impl FromStr for ProbModel {
    type Err = Error;

    /// Accepts `uniform`, `fixed:<p>` and `uniform:<lo>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unknown probability model '{s}'"));
        let model = match s.split_once(':') {
            None if s == "uniform" => ProbModel::Uniform,
            Some(("fixed", p)) => ProbModel::Fixed(p.parse().map_err(|_| bad())?),
            Some(("uniform", lo)) => ProbModel::UniformFrom(lo.parse().map_err(|_| bad())?),
            _ => return Err(bad()),
        };
        model.validate()?;
        Ok(model)
    }
}

/// Random attachment tree with weights uniform in [0.1, 10] and `n` points
/// at distinct locations drawn uniformly over the total edge length.
///
/// Deterministic in `seed` (SplitMix64). Every weight and offset is an
/// exact binary64 value, so the output survives a serialize/parse round trip.
pub fn generate_random(t: usize, n: usize, seed: u64, model: ProbModel) -> Result<Instance> {
    if t < 2 || n == 0 {
        return Err(Error::InvalidArgument("generate_random needs t >= 2 and n >= 1".into()));
    }
    model.validate()?;
    let mut rng = SplitMix64::seed_from_u64(seed);
    let mut weights = Vec::with_capacity(t - 1);
    let mut edges = Vec::with_capacity(t - 1);
    for v in 1..t {
        let u = rng.random_range(0..v);
        let w = rng.random_range(0.1..=10.0f64);
        weights.push(w);
        edges.push(Edge {
            u,
            v,
            weight: Length::from_input(w).expect("weight in range"),
        });
    }
    let tree = WeightedTree::new(t, edges)?;

    let mut cumulative = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in &weights {
        acc += w;
        cumulative.push(acc);
    }

    let mut seen = HashSet::with_capacity(n);
    let mut points = Vec::with_capacity(n);
    while points.len() < n {
        let x = rng.random::<f64>() * acc;
        let edge = cumulative.partition_point(|&c| c <= x).min(weights.len() - 1);
        let raw = rng.random::<f64>() * weights[edge];
        let offset = Length::from_input(raw).expect("offset in range");
        if offset.to_f64() != raw {
            continue;
        }
        let location = tree.canonical(Location::EdgePoint { edge, offset })?;
        if !seen.insert(location) {
            continue;
        }
        points.push(StochasticPoint {
            id: points.len() as u32,
            location,
            prob: model.draw(&mut rng),
        });
    }
    Instance::new(tree, points)
}
