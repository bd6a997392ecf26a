//! Nearest-neighbor probabilities and their exact ranking keys.
//!
//! Ranking compares products of probabilities. Each factor enters as its
//! binary64 natural logarithm scaled to a 96-bit fixed point, so sums are
//! exact and an incrementally maintained key equals the key computed from
//! scratch bit for bit. Exact zero factors are counted separately; every
//! point whose product contains a zero ranks as value 0, tied with the rest.

use std::cmp::Ordering;
use std::ops::{Add, AddAssign, Neg, Sub, SubAssign};

use crate::error::{Error, Result};
use crate::tree_space::{Instance, Location, PointId};

const LOG_SCALE: f64 = (1u128 << 96) as f64;

/// A logarithmic factor: zero count plus the fixed-point log of the nonzero
/// part.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct LogFactor {
    zeros: i32,
    log: i128,
}

impl LogFactor {
    pub const ONE: LogFactor = LogFactor { zeros: 0, log: 0 };

    pub fn of(x: f64) -> LogFactor {
        if x == 0.0 {
            LogFactor { zeros: 1, log: 0 }
        } else {
            LogFactor {
                zeros: 0,
                log: (x.ln() * LOG_SCALE) as i128,
            }
        }
    }

    /// The factor `1 - p`, with the logarithm taken through `ln_1p` for
    /// accuracy at small `p`.
    pub fn complement(p: f64) -> LogFactor {
        if p == 1.0 {
            LogFactor { zeros: 1, log: 0 }
        } else {
            LogFactor {
                zeros: 0,
                log: ((-p).ln_1p() * LOG_SCALE) as i128,
            }
        }
    }

    pub fn rank(self) -> NnpKey {
        if self.zeros > 0 {
            NnpKey::ZERO
        } else {
            NnpKey(Some(self.log))
        }
    }
}

impl Add for LogFactor {
    type Output = LogFactor;
    fn add(self, o: LogFactor) -> LogFactor {
        LogFactor {
            zeros: self.zeros + o.zeros,
            log: self.log + o.log,
        }
    }
}

impl Sub for LogFactor {
    type Output = LogFactor;
    fn sub(self, o: LogFactor) -> LogFactor {
        LogFactor {
            zeros: self.zeros - o.zeros,
            log: self.log - o.log,
        }
    }
}

impl Neg for LogFactor {
    type Output = LogFactor;
    fn neg(self) -> LogFactor {
        LogFactor {
            zeros: -self.zeros,
            log: -self.log,
        }
    }
}

impl AddAssign for LogFactor {
    fn add_assign(&mut self, o: LogFactor) {
        *self = *self + o;
    }
}

impl SubAssign for LogFactor {
    fn sub_assign(&mut self, o: LogFactor) {
        *self = *self - o;
    }
}

/// Comparable NNP value; `None` is an exact zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NnpKey(Option<i128>);

impl NnpKey {
    pub const ZERO: NnpKey = NnpKey(None);
}

impl Ord for NnpKey {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.0, other.0) {
            (None, None) => Ordering::Equal,
            (None, Some(_)) => Ordering::Less,
            (Some(_), None) => Ordering::Greater,
            (Some(a), Some(b)) => a.cmp(&b),
        }
    }
}

impl PartialOrd for NnpKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Ranking order: larger NNP first, then smaller id.
pub fn ranking(a: (NnpKey, PointId), b: (NnpKey, PointId)) -> Ordering {
    b.0.cmp(&a.0).then(a.1.cmp(&b.1))
}

/// Probability that the point at index `i` exists and no strictly closer
/// point does.
pub fn nnp(instance: &Instance, q: &Location, i: usize) -> Result<f64> {
    let q = instance.tree().canonical(*q)?;
    let pts = instance.points();
    let a = pts
        .get(i)
        .ok_or_else(|| Error::InvalidArgument(format!("no point at index {i}")))?;
    let tree = instance.tree();
    let da = tree.dist(&q, &a.location);
    Ok(pts
        .iter()
        .filter(|x| tree.dist(&q, &x.location) < da)
        .fold(a.prob, |acc, x| acc * (1.0 - x.prob)))
}

/// `nnp` by point id.
pub fn nnp_by_id(instance: &Instance, q: &Location, id: PointId) -> Result<f64> {
    let i = instance
        .index_of(id)
        .ok_or_else(|| Error::InvalidArgument(format!("no point with id {id}")))?;
    nnp(instance, q, i)
}

/// Log-domain NNP of every point at `q`, indexed like `instance.points()`.
pub fn nnp_factors(instance: &Instance, q: &Location) -> Vec<LogFactor> {
    let tree = instance.tree();
    let pts = instance.points();
    let mut by_dist: Vec<(crate::Length, usize)> = pts
        .iter()
        .enumerate()
        .map(|(i, p)| (tree.dist(q, &p.location), i))
        .collect();
    by_dist.sort_unstable();
    let mut out = vec![LogFactor::ONE; pts.len()];
    let mut closer = LogFactor::ONE;
    let mut g = 0;
    while g < by_dist.len() {
        let mut h = g;
        while h < by_dist.len() && by_dist[h].0 == by_dist[g].0 {
            let i = by_dist[h].1;
            out[i] = LogFactor::of(pts[i].prob) + closer;
            h += 1;
        }
        for &(_, i) in &by_dist[g..h] {
            closer += LogFactor::complement(pts[i].prob);
        }
        g = h;
    }
    out
}

/// The `k` points with the largest NNP at `q`, ties broken by smaller id.
pub fn k_lnn_at(instance: &Instance, q: &Location, k: usize) -> Result<Vec<PointId>> {
    if k == 0 || k > instance.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} outside 1..={}",
            instance.len()
        )));
    }
    let q = instance.tree().canonical(*q)?;
    let keys = nnp_factors(instance, &q);
    let mut ranked: Vec<(NnpKey, PointId)> = keys
        .iter()
        .zip(instance.points())
        .map(|(f, p)| (f.rank(), p.id))
        .collect();
    ranked.sort_unstable_by(|&a, &b| ranking(a, b));
    Ok(ranked.into_iter().take(k).map(|(_, id)| id).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree_space::parse_instance;

    fn instance_a() -> Instance {
        parse_instance(
            "tree 3\nedge 0 1 3\nedge 1 2 4\npoints 3\npoint 0 v 0 0.5\npoint 1 v 1 0.5\npoint 2 v 2 1.0\n",
        )
        .unwrap()
    }

    #[test]
    fn nnp_at_middle_vertex() {
        let a = instance_a();
        let q = Location::Vertex(1);
        assert_eq!(nnp(&a, &q, 1).unwrap(), 0.5);
        assert_eq!(nnp(&a, &q, 0).unwrap(), 0.25);
        assert_eq!(nnp(&a, &q, 2).unwrap(), 0.25);
        assert_eq!(k_lnn_at(&a, &q, 2).unwrap(), vec![1, 0]);
        assert_eq!(k_lnn_at(&a, &q, 3).unwrap(), vec![1, 0, 2]);
    }

    #[test]
    fn certain_point_blocks_everything_farther() {
        let a = instance_a();
        let q = Location::Vertex(2);
        assert_eq!(nnp(&a, &q, 2).unwrap(), 1.0);
        assert_eq!(nnp(&a, &q, 1).unwrap(), 0.0);
        assert_eq!(nnp(&a, &q, 0).unwrap(), 0.0);
        assert_eq!(k_lnn_at(&a, &q, 3).unwrap(), vec![2, 0, 1]);
    }

    #[test]
    fn equidistant_points_do_not_block() {
        let a = instance_a();
        let q = a.tree().at(0, crate::Length::from_input(1.5).unwrap()).unwrap();
        assert_eq!(nnp(&a, &q, 0).unwrap(), 0.5);
        assert_eq!(nnp(&a, &q, 1).unwrap(), 0.5);
        assert_eq!(k_lnn_at(&a, &q, 1).unwrap(), vec![0]);
        assert_eq!(k_lnn_at(&a, &Location::Vertex(0), 1).unwrap(), vec![0]);
    }

    #[test]
    fn k_out_of_range() {
        let a = instance_a();
        assert!(k_lnn_at(&a, &Location::Vertex(0), 0).is_err());
        assert!(k_lnn_at(&a, &Location::Vertex(0), 4).is_err());
    }

    #[test]
    fn zero_keys_tie() {
        assert_eq!(LogFactor::of(0.0).rank(), (LogFactor::of(0.5) + LogFactor::complement(1.0)).rank());
        assert!(LogFactor::of(0.5).rank() > LogFactor::of(0.25).rank());
        assert_eq!((LogFactor::of(0.5) + LogFactor::of(0.5)).rank(), LogFactor::of(0.25).rank());
    }
}
