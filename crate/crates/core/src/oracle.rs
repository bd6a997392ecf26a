//! Brute-force reference implementations.
//!
//! Everything here works from explicit realizations, explicit pairwise
//! midpoints and direct nearest-neighbor probabilities. Only the tree
//! distance code is shared with the fast algorithms.

use std::collections::BTreeMap;

use crate::closest_pair::is_legal;
use crate::error::{Error, Result};
use crate::length::Length;
use crate::lvd::{k_lnn_at, Center};
use crate::reduction::reduce;
use crate::tree_space::{Direction, Instance, Location, PointId};

/// Largest number of points with probability strictly between 0 and 1 the
/// enumerators accept.
pub const ENUMERATION_CAP: usize = 24;

/// Iterates over all realizations of a probability vector: every subset of
/// the free points, plus all certain points, with its probability.
#[derive(Clone, Debug)]
pub struct RealizationIterator {
    probs: Vec<f64>,
    free: Vec<usize>,
    certain: Vec<usize>,
    next: u64,
    end: u64,
}

impl RealizationIterator {
    pub fn new(probs: &[f64]) -> Result<Self> {
        let free: Vec<usize> = (0..probs.len()).filter(|&i| probs[i] > 0.0 && probs[i] < 1.0).collect();
        if free.len() > ENUMERATION_CAP {
            return Err(Error::TooLarge(format!(
                "{} uncertain points exceed the enumeration cap of {ENUMERATION_CAP}",
                free.len()
            )));
        }
        Ok(RealizationIterator {
            probs: probs.to_vec(),
            certain: (0..probs.len()).filter(|&i| probs[i] == 1.0).collect(),
            end: 1 << free.len(),
            free,
            next: 0,
        })
    }

    pub fn free_count(&self) -> usize {
        self.free.len()
    }
}

impl Iterator for RealizationIterator {
    /// Present point indices (ascending) and the realization probability.
    type Item = (Vec<usize>, f64);

    fn next(&mut self) -> Option<Self::Item> {
        if self.next == self.end {
            return None;
        }
        let mask = self.next;
        self.next += 1;
        let mut p = 1.0;
        let mut present = self.certain.clone();
        let top = self.free.len();
        for (b, &i) in self.free.iter().enumerate() {
            // first free point on the most significant bit, matching the
            // depth-first order of `sweep`
            if mask >> (top - 1 - b) & 1 == 1 {
                p *= self.probs[i];
                present.push(i);
            } else {
                p *= 1.0 - self.probs[i];
            }
        }
        present.sort_unstable();
        Some((present, p))
    }
}

/// Depth-first enumeration over the free points. `visit` receives each
/// realization's probability and closest-pair distance (`None` below two
/// points). With a `floor`, realizations whose closest pair is already
/// below it are skipped along with all their extensions.
fn sweep<D: Copy + PartialOrd>(
    probs: &[f64],
    dist: &dyn Fn(usize, usize) -> D,
    floor: Option<D>,
    visit: &mut dyn FnMut(f64, Option<D>),
) -> Result<()> {
    let it = RealizationIterator::new(probs)?;
    let mut chosen = Vec::with_capacity(probs.len());
    let mut min: Option<D> = None;
    for &i in &it.certain {
        for &j in &chosen {
            let d = dist(i, j);
            if min.is_none_or(|m| d < m) {
                min = Some(d);
            }
        }
        chosen.push(i);
    }
    if floor.is_some_and(|f| min.is_some_and(|m| m < f)) {
        return Ok(());
    }

    struct Ctx<'a, D> {
        probs: &'a [f64],
        free: &'a [usize],
        dist: &'a dyn Fn(usize, usize) -> D,
        floor: Option<D>,
        visit: &'a mut dyn FnMut(f64, Option<D>),
    }
    fn rec<D: Copy + PartialOrd>(c: &mut Ctx<'_, D>, depth: usize, chosen: &mut Vec<usize>, min: Option<D>, p: f64) {
        if depth == c.free.len() {
            (c.visit)(p, min);
            return;
        }
        let i = c.free[depth];
        rec(c, depth + 1, chosen, min, p * (1.0 - c.probs[i]));
        let mut m = min;
        for &j in chosen.iter() {
            let d = (c.dist)(i, j);
            if m.is_none_or(|x| d < x) {
                m = Some(d);
            }
        }
        if c.floor.is_some_and(|f| m.is_some_and(|x| x < f)) {
            return;
        }
        chosen.push(i);
        rec(c, depth + 1, chosen, m, p * c.probs[i]);
        chosen.pop();
    }
    let mut ctx = Ctx {
        probs,
        free: &it.free,
        dist,
        floor,
        visit,
    };
    rec(&mut ctx, 0, &mut chosen, min, 1.0);
    Ok(())
}

fn tree_setup(instance: &Instance) -> (Instance, Vec<f64>) {
    let inst = instance.normalize();
    let probs = inst.points().iter().map(|p| p.prob).collect();
    (inst, probs)
}

/// `Pr[closest-pair distance >= ell]`, realizations with fewer than two
/// points counting as distance 0.
pub fn enum_threshold(instance: &Instance, ell: f64) -> Result<f64> {
    let ell = Length::from_f64(ell)
        .filter(|l| l.is_positive())
        .ok_or_else(|| Error::InvalidArgument(format!("threshold {ell} must be a positive length")))?;
    let (inst, probs) = tree_setup(instance);
    let mut total = 0.0;
    sweep(&probs, &|i, j| inst.point_dist(i, j), Some(ell), &mut |p, m| {
        if m.is_some() {
            total += p;
        }
    })?;
    Ok(total)
}

/// [`enum_threshold`] computed by testing every realization for legality
/// through witnesses on the reduced space.
pub fn enum_threshold_witness(instance: &Instance, ell: f64) -> Result<f64> {
    let ell = Length::from_f64(ell)
        .filter(|l| l.is_positive())
        .ok_or_else(|| Error::InvalidArgument(format!("threshold {ell} must be a positive length")))?;
    let (inst, probs) = tree_setup(instance);
    if inst.is_empty() {
        return Ok(0.0);
    }
    let space = reduce(&inst)?;
    let vertex: Vec<usize> = inst
        .points()
        .iter()
        .map(|p| space.vertex_of_id(p.id).expect("every point is hosted"))
        .collect();
    let mut total = 0.0;
    for (present, p) in RealizationIterator::new(&probs)? {
        if present.len() < 2 {
            continue;
        }
        let subset: Vec<usize> = present.iter().map(|&i| vertex[i]).collect();
        if is_legal(&space, &subset, ell)? {
            total += p;
        }
    }
    Ok(total)
}

/// Expected closest-pair distance by enumeration.
pub fn enum_expected(instance: &Instance) -> Result<f64> {
    let (inst, probs) = tree_setup(instance);
    let mut total = 0.0;
    sweep(&probs, &|i, j| inst.point_dist(i, j), None, &mut |p, m| {
        if let Some(d) = m {
            total += p * d.to_f64();
        }
    })?;
    Ok(total)
}

/// Threshold probability over an explicit distance matrix.
pub fn enum_threshold_matrix(dist: &[Vec<f64>], probs: &[f64], ell: f64) -> Result<f64> {
    let mut total = 0.0;
    sweep(probs, &|i, j| dist[i][j], Some(ell), &mut |p, m| {
        if m.is_some() {
            total += p;
        }
    })?;
    Ok(total)
}

/// Expected closest-pair distance over an explicit distance matrix.
pub fn enum_expected_matrix(dist: &[Vec<f64>], probs: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    sweep(probs, &|i, j| dist[i][j], None, &mut |p, m| {
        if let Some(d) = m {
            total += p * d;
        }
    })?;
    Ok(total)
}

/// The location one grid unit away from `loc` in direction `d`.
fn nudge(instance: &Instance, loc: &Location, d: Direction) -> Location {
    let tree = instance.tree();
    let off = tree.offset_on(loc, d.edge).expect("direction leaves the location");
    let step = Length::from_units(1);
    let off = if d.increasing { off + step } else { off - step };
    tree.at(d.edge, off).expect("nudged point stays on the edge")
}

/// Centers by grouping all pairwise midpoints. The instance must be
/// normalized.
pub fn naive_centers(instance: &Instance) -> Result<Vec<Center>> {
    if !instance.is_normalized() {
        return Err(Error::InvalidArgument("center enumeration needs a normalized instance".into()));
    }
    let n = instance.len();
    let mut keys = BTreeMap::new();
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (&instance.points()[i].location, &instance.points()[j].location);
            let m = instance.midpoint(a, b)?;
            keys.insert((m, instance.point_dist(i, j).half()), ());
        }
    }
    let mut out = Vec::with_capacity(keys.len());
    for (m, diameter) in keys.into_keys() {
        let dist: Vec<Length> = instance.points().iter().map(|p| instance.tree().dist(&m, &p.location)).collect();
        let depth = dist.iter().filter(|&&d| d < diameter).count() as u32;
        let probes: Vec<(Direction, Location)> = instance
            .tree()
            .directions_at(&m)
            .into_iter()
            .map(|d| (d, nudge(instance, &m, d)))
            .collect();
        let mut groups: Vec<(Direction, Vec<u32>)> = Vec::new();
        for (i, p) in instance.points().iter().enumerate() {
            if dist[i] != diameter {
                continue;
            }
            let (dir, _) = probes
                .iter()
                .find(|(_, q)| instance.tree().dist(q, &p.location) < diameter)
                .expect("some direction leads toward the point");
            match groups.iter_mut().find(|g| g.0 == *dir) {
                Some(g) => g.1.push(i as u32),
                None => groups.push((*dir, vec![i as u32])),
            }
        }
        out.push(Center::new(m, diameter, depth, groups));
    }
    Ok(out)
}

/// One probe of the diagram oracle: a query location given as an edge and
/// offset, with the directly computed answer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Probe {
    pub location: Location,
    /// `None` only for the single vertex of an edgeless tree.
    pub edge: Option<usize>,
    pub offset: Length,
    pub answer: Vec<PointId>,
}

/// Direct k-LNN answers at every edge end, every center offset and every
/// midpoint between consecutive such offsets.
pub fn probe_lnn(instance: &Instance, k: usize) -> Result<Vec<Probe>> {
    let inst = instance.normalize();
    let tree = inst.tree();
    let centers = naive_centers(&inst)?;
    let mut out = Vec::new();
    if tree.edges().is_empty() {
        let location = Location::Vertex(0);
        out.push(Probe {
            answer: k_lnn_at(&inst, &location, k)?,
            location,
            edge: None,
            offset: Length::ZERO,
        });
        return Ok(out);
    }
    for (e, edge) in tree.edges().iter().enumerate() {
        let mut offs: Vec<Length> = centers
            .iter()
            .filter_map(|c| match c.location {
                Location::EdgePoint { edge: f, offset } if f == e => Some(offset),
                _ => None,
            })
            .collect();
        offs.push(Length::ZERO);
        offs.push(edge.weight);
        offs.sort_unstable();
        offs.dedup();
        let mut all = Vec::with_capacity(2 * offs.len());
        for (i, &o) in offs.iter().enumerate() {
            if i > 0 {
                all.push(Length::mid(offs[i - 1], o));
            }
            all.push(o);
        }
        for offset in all {
            let location = tree.at(e, offset)?;
            out.push(Probe {
                answer: k_lnn_at(&inst, &location, k)?,
                location,
                edge: Some(e),
                offset,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lvd::enumerate_centers;
    use crate::tree_space::{generate_random, parse_instance, ProbModel};

    fn instance_a() -> Instance {
        parse_instance(
            "tree 3\nedge 0 1 3\nedge 1 2 4\npoints 3\npoint 0 v 0 0.5\npoint 1 v 1 0.5\npoint 2 v 2 1.0\n",
        )
        .unwrap()
    }

    #[test]
    fn realization_probabilities_sum_to_one() {
        let it = RealizationIterator::new(&[0.3, 1.0, 0.0, 0.55, 0.9]).unwrap();
        assert_eq!(it.free_count(), 3);
        let all: Vec<_> = it.collect();
        assert_eq!(all.len(), 8);
        assert!((all.iter().map(|r| r.1).sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(all.iter().all(|r| r.0.contains(&1) && !r.0.contains(&2)));
        assert!(RealizationIterator::new(&[0.5; 25]).is_err());
    }

    #[test]
    fn instance_a_values() {
        let a = instance_a();
        assert_eq!(enum_threshold(&a, 3.5).unwrap(), 0.5);
        assert_eq!(enum_threshold(&a, 5.0).unwrap(), 0.25);
        assert_eq!(enum_threshold(&a, 100.0).unwrap(), 0.0);
        assert_eq!(enum_threshold_witness(&a, 3.5).unwrap(), 0.5);
        assert_eq!(enum_expected(&a).unwrap(), 3.5);
        assert!(enum_threshold(&a, 0.0).is_err());
    }

    #[test]
    fn two_formulations_agree() {
        for seed in 0..20 {
            let inst = generate_random(2 + seed as usize % 7, 1 + seed as usize % 9, seed, ProbModel::Uniform).unwrap();
            for ell in [0.5, 2.0, 5.0, 11.0] {
                assert_eq!(
                    enum_threshold(&inst, ell).unwrap(),
                    enum_threshold_witness(&inst, ell).unwrap(),
                    "seed {seed} ell {ell}"
                );
            }
        }
    }

    #[test]
    fn naive_centers_of_instance_a() {
        let a = instance_a();
        assert_eq!(naive_centers(&a).unwrap(), enumerate_centers(&a).unwrap());
    }

    #[test]
    fn probes_of_instance_a() {
        let a = instance_a();
        let probes = probe_lnn(&a, 1).unwrap();
        let got: Vec<(usize, f64, PointId)> = probes
            .iter()
            .map(|p| (p.edge.unwrap(), p.offset.to_f64(), p.answer[0]))
            .collect();
        assert_eq!(
            got,
            vec![
                (0, 0.0, 0),
                (0, 0.75, 0),
                (0, 1.5, 0),
                (0, 2.25, 1),
                (0, 3.0, 1),
                (1, 0.0, 1),
                (1, 0.25, 1),
                (1, 0.5, 1),
                (1, 1.25, 1),
                (1, 2.0, 2),
                (1, 3.0, 2),
                (1, 4.0, 2),
            ]
        );
    }

    #[test]
    fn matrix_enumeration() {
        let d = vec![vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]];
        assert_eq!(enum_expected_matrix(&d, &[1.0; 3]).unwrap(), 1.0);
        assert_eq!(enum_threshold_matrix(&d, &[1.0; 3], 1.0).unwrap(), 1.0);
        assert_eq!(enum_threshold_matrix(&d, &[1.0; 3], 1.5).unwrap(), 0.0);
    }
}
