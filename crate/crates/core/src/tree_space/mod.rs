//! Weighted trees, locations on their geometric realization, and instances
//! of existentially uncertain points.

mod format;
mod generate;

pub use format::{parse_instance, serialize_instance};
pub use generate::{generate_random, ProbModel};

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::length::Length;

/// Identifier of a stochastic point as given in the input.
pub type PointId = u32;

const NONE: usize = usize::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    /// Start point of the edge; offsets are measured from here.
    pub u: usize,
    pub v: usize,
    pub weight: Length,
}

/// A place on the tree space: a vertex, or a point strictly inside an edge at
/// `offset` from the edge's start vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Location {
    Vertex(usize),
    EdgePoint { edge: usize, offset: Length },
}

/// A direction leaving a location: along `edge`, toward increasing or
/// decreasing offsets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Direction {
    pub edge: usize,
    pub increasing: bool,
}

/// A positively weighted tree together with a rooted index (root 0) for
/// distance and path queries.
#[derive(Clone, Debug)]
pub struct WeightedTree {
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(usize, usize)>>,
    parent: Vec<usize>,
    parent_edge: Vec<usize>,
    depth: Vec<Length>,
    up: Vec<Vec<usize>>,
    tin: Vec<usize>,
    tout: Vec<usize>,
}

impl WeightedTree {
    /// Builds a tree on `vertex_count` vertices from exactly
    /// `vertex_count - 1` edges.
    pub fn new(vertex_count: usize, edges: Vec<Edge>) -> Result<Self> {
        if vertex_count == 0 {
            return Err(Error::InvalidTree("tree needs at least one vertex".into()));
        }
        if edges.len() != vertex_count - 1 {
            return Err(Error::InvalidTree(format!(
                "expected {} edges, got {}",
                vertex_count - 1,
                edges.len()
            )));
        }
        let mut adjacency = vec![Vec::new(); vertex_count];
        let mut dsu = Dsu::new(vertex_count);
        for (i, e) in edges.iter().enumerate() {
            if e.u >= vertex_count || e.v >= vertex_count {
                return Err(Error::InvalidTree(format!("edge {i}: vertex out of range")));
            }
            if !e.weight.is_positive() {
                return Err(Error::InvalidTree(format!("edge {i}: nonpositive weight")));
            }
            if !dsu.union(e.u, e.v) {
                return Err(Error::InvalidTree(format!("edge {i} closes a cycle")));
            }
            adjacency[e.u].push((e.v, i));
            adjacency[e.v].push((e.u, i));
        }
        Ok(Self::index(edges, adjacency))
    }

    fn index(edges: Vec<Edge>, adjacency: Vec<Vec<(usize, usize)>>) -> Self {
        let t = adjacency.len();
        let mut parent = vec![NONE; t];
        let mut parent_edge = vec![NONE; t];
        let mut depth = vec![Length::ZERO; t];
        let mut tin = vec![0; t];
        let mut tout = vec![0; t];
        let mut timer = 0;
        // Iterative DFS: (vertex, next adjacency slot)
        let mut stack = vec![(0usize, 0usize)];
        parent[0] = 0;
        tin[0] = timer;
        timer += 1;
        while let Some(&mut (v, ref mut slot)) = stack.last_mut() {
            if let Some(&(w, e)) = adjacency[v].get(*slot) {
                *slot += 1;
                if parent[w] == NONE && w != 0 {
                    parent[w] = v;
                    parent_edge[w] = e;
                    depth[w] = depth[v] + edges[e].weight;
                    tin[w] = timer;
                    timer += 1;
                    stack.push((w, 0));
                }
            } else {
                tout[v] = timer;
                stack.pop();
            }
        }
        let mut log = 1;
        while (1 << log) < t {
            log += 1;
        }
        let mut up = vec![parent.clone()];
        for j in 1..log {
            let prev = &up[j - 1];
            let next = (0..t).map(|v| prev[prev[v]]).collect();
            up.push(next);
        }
        WeightedTree {
            edges,
            adjacency,
            parent,
            parent_edge,
            depth,
            up,
            tin,
            tout,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, i: usize) -> &Edge {
        &self.edges[i]
    }

    /// `(neighbor, edge index)` pairs incident to `v`.
    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adjacency[v]
    }

    pub fn total_length(&self) -> Length {
        self.edges.iter().map(|e| e.weight).sum()
    }

    /// Validates a location and brings it into canonical form: edge points
    /// at offset 0 or at the edge length become vertices.
    pub fn canonical(&self, loc: Location) -> Result<Location> {
        match loc {
            Location::Vertex(v) if v < self.vertex_count() => Ok(loc),
            Location::Vertex(v) => Err(Error::InvalidLocation(format!("vertex {v} out of range"))),
            Location::EdgePoint { edge, offset } => {
                let e = self
                    .edges
                    .get(edge)
                    .ok_or_else(|| Error::InvalidLocation(format!("edge {edge} out of range")))?;
                if offset < Length::ZERO || offset > e.weight {
                    Err(Error::InvalidLocation(format!(
                        "offset {offset} outside edge {edge} of length {}",
                        e.weight
                    )))
                } else if offset == Length::ZERO {
                    Ok(Location::Vertex(e.u))
                } else if offset == e.weight {
                    Ok(Location::Vertex(e.v))
                } else {
                    Ok(loc)
                }
            }
        }
    }

    /// The location at `offset` from the start of `edge`, canonicalized.
    pub fn at(&self, edge: usize, offset: Length) -> Result<Location> {
        self.canonical(Location::EdgePoint { edge, offset })
    }

    /// Offset of a location along `edge`, if the location lies on it.
    pub fn offset_on(&self, loc: &Location, edge: usize) -> Option<Length> {
        let e = &self.edges[edge];
        match *loc {
            Location::Vertex(v) if v == e.u => Some(Length::ZERO),
            Location::Vertex(v) if v == e.v => Some(e.weight),
            Location::EdgePoint { edge: f, offset } if f == edge => Some(offset),
            _ => None,
        }
    }

    fn is_ancestor(&self, a: usize, b: usize) -> bool {
        self.tin[a] <= self.tin[b] && self.tout[b] <= self.tout[a]
    }

    fn lca(&self, a: usize, b: usize) -> usize {
        if self.is_ancestor(a, b) {
            return a;
        }
        if self.is_ancestor(b, a) {
            return b;
        }
        let mut a = a;
        for level in self.up.iter().rev() {
            if !self.is_ancestor(level[a], b) {
                a = level[a];
            }
        }
        self.parent[a]
    }

    /// Lower endpoint (in the rooted index) of an edge.
    fn child_of_edge(&self, edge: usize) -> usize {
        let e = &self.edges[edge];
        if self.parent_edge[e.v] == edge {
            e.v
        } else {
            e.u
        }
    }

    /// `(anchor vertex, depth)` where the anchor is the vertex itself or the
    /// lower endpoint of the edge containing the location.
    fn anchor(&self, loc: &Location) -> (usize, Length) {
        match *loc {
            Location::Vertex(v) => (v, self.depth[v]),
            Location::EdgePoint { edge, offset } => {
                let c = self.child_of_edge(edge);
                let e = &self.edges[edge];
                let below = if c == e.v { e.weight - offset } else { offset };
                (c, self.depth[c] - below)
            }
        }
    }

    /// Returns `(distance, depth of the meeting point of the two root paths)`.
    fn dist_and_meet(&self, a: &Location, b: &Location) -> (Length, Length) {
        let (ca, da) = self.anchor(a);
        let (cb, db) = self.anchor(b);
        if let (Location::EdgePoint { edge: ea, .. }, Location::EdgePoint { edge: eb, .. }) = (a, b) {
            if ea == eb {
                return ((da - db).abs(), da.min(db));
            }
        }
        let l = self.lca(ca, cb);
        if matches!(a, Location::EdgePoint { .. }) && l == ca {
            return (db - da, da);
        }
        if matches!(b, Location::EdgePoint { .. }) && l == cb {
            return (da - db, db);
        }
        let dl = self.depth[l];
        (da + db - dl - dl, dl)
    }

    /// Tree-metric distance between two canonical locations.
    pub fn dist(&self, a: &Location, b: &Location) -> Length {
        self.dist_and_meet(a, b).0
    }

    /// Location at distance `s` above `loc` toward the root.
    fn ascend(&self, loc: &Location, s: Length) -> Location {
        let (anchor, d) = self.anchor(loc);
        let target = d - s;
        let start = match *loc {
            Location::EdgePoint { edge, .. } => {
                let p = self.parent[anchor];
                if target >= self.depth[p] {
                    return self.at_depth_on_edge(edge, target);
                }
                p
            }
            Location::Vertex(v) => v,
        };
        if self.depth[start] == target {
            return Location::Vertex(start);
        }
        let mut b = start;
        for level in self.up.iter().rev() {
            let a = level[b];
            if self.depth[a] > target {
                b = a;
            }
        }
        let p = self.parent[b];
        if self.depth[p] == target {
            Location::Vertex(p)
        } else {
            self.at_depth_on_edge(self.parent_edge[b], target)
        }
    }

    fn at_depth_on_edge(&self, edge: usize, target: Length) -> Location {
        let c = self.child_of_edge(edge);
        let p = self.parent[c];
        let e = &self.edges[edge];
        let h = target - self.depth[p];
        let offset = if p == e.u { h } else { e.weight - h };
        self.canonical(Location::EdgePoint { edge, offset })
            .expect("depth lies on the edge")
    }

    /// The location at distance `s` from `a` along the path to `b`.
    /// Requires `0 <= s <= dist(a, b)`.
    pub fn point_along(&self, a: &Location, b: &Location, s: Length) -> Location {
        let (d, meet) = self.dist_and_meet(a, b);
        debug_assert!(s >= Length::ZERO && s <= d);
        let (_, da) = self.anchor(a);
        if s <= da - meet {
            self.ascend(a, s)
        } else {
            self.ascend(b, d - s)
        }
    }

    /// Midpoint of the path between two distinct locations.
    pub fn midpoint(&self, a: &Location, b: &Location) -> Result<Location> {
        let d = self.dist(a, b);
        if d == Length::ZERO {
            return Err(Error::InvalidArgument(
                "midpoint of a zero-length path is undefined".into(),
            ));
        }
        Ok(self.point_along(a, b, d.half()))
    }

    /// Directions available at a location: the incident edges of a vertex,
    /// or both ways along the edge for an interior point.
    pub fn directions_at(&self, loc: &Location) -> Vec<Direction> {
        match *loc {
            Location::Vertex(v) => self.adjacency[v]
                .iter()
                .map(|&(_, e)| Direction {
                    edge: e,
                    increasing: self.edges[e].u == v,
                })
                .collect(),
            Location::EdgePoint { edge, .. } => vec![
                Direction {
                    edge,
                    increasing: false,
                },
                Direction {
                    edge,
                    increasing: true,
                },
            ],
        }
    }
}

pub(crate) struct Dsu(Vec<usize>);

impl Dsu {
    pub(crate) fn new(n: usize) -> Self {
        Dsu((0..n).collect())
    }
    pub(crate) fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut x = x;
        while self.0[x] != r {
            let next = self.0[x];
            self.0[x] = r;
            x = next;
        }
        r
    }
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0[ra] = rb;
        true
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StochasticPoint {
    pub id: PointId,
    pub location: Location,
    pub prob: f64,
}

/// A weighted tree with stochastic points on it.
#[derive(Clone, Debug)]
pub struct Instance {
    tree: WeightedTree,
    points: Vec<StochasticPoint>,
}

impl Instance {
    /// Validates point locations (canonicalizing them), probabilities and
    /// id uniqueness.
    pub fn new(tree: WeightedTree, points: Vec<StochasticPoint>) -> Result<Self> {
        let mut seen = HashMap::with_capacity(points.len());
        let mut out = Vec::with_capacity(points.len());
        for p in points {
            if !(0.0..=1.0).contains(&p.prob) {
                return Err(Error::InvalidArgument(format!(
                    "point {}: probability {} outside [0,1]",
                    p.id, p.prob
                )));
            }
            if seen.insert(p.id, ()).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate point id {}", p.id)));
            }
            out.push(StochasticPoint {
                location: tree.canonical(p.location)?,
                ..p
            });
        }
        Ok(Instance { tree, points: out })
    }

    pub fn tree(&self) -> &WeightedTree {
        &self.tree
    }

    pub fn points(&self) -> &[StochasticPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dist(&self, x: &Location, y: &Location) -> Result<Length> {
        let x = self.tree.canonical(*x)?;
        let y = self.tree.canonical(*y)?;
        Ok(self.tree.dist(&x, &y))
    }

    pub fn midpoint(&self, x: &Location, y: &Location) -> Result<Location> {
        let x = self.tree.canonical(*x)?;
        let y = self.tree.canonical(*y)?;
        self.tree.midpoint(&x, &y)
    }

    /// Distance between the points at indices `i` and `j`.
    pub fn point_dist(&self, i: usize, j: usize) -> Length {
        self.tree.dist(&self.points[i].location, &self.points[j].location)
    }

    /// Merges co-located points into one point with probability
    /// `1 - prod(1 - p)`, keeping the smallest id. Output order follows the
    /// first occurrence of each location.
    pub fn normalize(&self) -> Instance {
        let mut slot: HashMap<Location, usize> = HashMap::with_capacity(self.points.len());
        let mut groups: Vec<Vec<StochasticPoint>> = Vec::new();
        for p in &self.points {
            let g = *slot.entry(p.location).or_insert_with(|| {
                groups.push(Vec::new());
                groups.len() - 1
            });
            groups[g].push(*p);
        }
        let points = groups
            .into_iter()
            .map(|mut g| {
                if g.len() == 1 {
                    return g[0];
                }
                g.sort_by_key(|p| p.id);
                let absent: f64 = g.iter().map(|p| 1.0 - p.prob).product();
                StochasticPoint {
                    id: g[0].id,
                    location: g[0].location,
                    prob: 1.0 - absent,
                }
            })
            .collect();
        Instance {
            tree: self.tree.clone(),
            points,
        }
    }

    /// True when all point locations are pairwise distinct.
    pub fn is_normalized(&self) -> bool {
        let mut seen = std::collections::HashSet::with_capacity(self.points.len());
        self.points.iter().all(|p| seen.insert(p.location))
    }

    pub fn index_of(&self, id: PointId) -> Option<usize> {
        self.points.iter().position(|p| p.id == id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn len(x: f64) -> Length {
        Length::from_input(x).unwrap()
    }

    pub(crate) fn instance_a() -> Instance {
        parse_instance(
            "tree 3\nedge 0 1 3\nedge 1 2 4\npoints 3\npoint 0 v 0 0.5\npoint 1 v 1 0.5\npoint 2 v 2 1.0\n",
        )
        .unwrap()
    }

    fn ep(edge: usize, offset: f64) -> Location {
        Location::EdgePoint {
            edge,
            offset: len(offset),
        }
    }

    #[test]
    fn distances_on_instance_a() {
        let a = instance_a();
        let d = |x, y| a.dist(&x, &y).unwrap().to_f64();
        assert_eq!(d(Location::Vertex(0), Location::Vertex(2)), 7.0);
        assert_eq!(d(ep(0, 1.0), Location::Vertex(1)), 2.0);
        assert_eq!(d(ep(1, 2.5), ep(1, 2.5)), 0.0);
        assert_eq!(d(ep(0, 1.0), ep(1, 2.5)), 4.5);
    }

    #[test]
    fn midpoints_on_instance_a() {
        let a = instance_a();
        assert_eq!(
            a.midpoint(&Location::Vertex(0), &Location::Vertex(1)).unwrap(),
            ep(0, 1.5)
        );
        assert_eq!(
            a.midpoint(&Location::Vertex(0), &Location::Vertex(2)).unwrap(),
            ep(1, 0.5)
        );
        assert_eq!(
            a.midpoint(&Location::Vertex(2), &Location::Vertex(0)).unwrap(),
            ep(1, 0.5)
        );
        assert!(a.midpoint(&ep(1, 1.0), &ep(1, 1.0)).is_err());
    }

    #[test]
    fn midpoint_of_a_single_edge() {
        let tree = WeightedTree::new(
            2,
            vec![Edge {
                u: 0,
                v: 1,
                weight: len(2.0),
            }],
        )
        .unwrap();
        assert_eq!(
            tree.midpoint(&Location::Vertex(0), &Location::Vertex(1)).unwrap(),
            ep(0, 1.0)
        );
    }

    #[test]
    fn midpoint_on_reversed_edge() {
        // edge 1 is listed child-first, so offsets run upward
        let tree = WeightedTree::new(
            3,
            vec![
                Edge { u: 0, v: 1, weight: len(2.0) },
                Edge { u: 2, v: 1, weight: len(6.0) },
            ],
        )
        .unwrap();
        let m = tree.midpoint(&Location::Vertex(0), &Location::Vertex(2)).unwrap();
        assert_eq!(m, ep(1, 4.0));
        assert_eq!(tree.dist(&m, &Location::Vertex(2)), len(2.0) + len(2.0));
    }

    #[test]
    fn canonicalizes_endpoints() {
        let a = instance_a();
        assert_eq!(a.tree().at(0, Length::ZERO).unwrap(), Location::Vertex(0));
        assert_eq!(a.tree().at(1, len(4.0)).unwrap(), Location::Vertex(2));
        assert!(a.tree().at(1, len(4.5)).is_err());
        assert!(a.tree().at(2, len(1.0)).is_err());
    }

    #[test]
    fn rejects_cycles_and_bad_weights() {
        let cyc = WeightedTree::new(
            3,
            vec![
                Edge { u: 0, v: 1, weight: len(1.0) },
                Edge { u: 1, v: 0, weight: len(1.0) },
            ],
        );
        assert!(cyc.is_err());
        let neg = WeightedTree::new(
            2,
            vec![Edge { u: 0, v: 1, weight: len(-1.0) }],
        );
        assert!(neg.is_err());
    }

    #[test]
    fn normalize_merges_colocated_points() {
        let inst = parse_instance(
            "tree 2\nedge 0 1 1\npoints 2\npoint 3 v 0 0.5\npoint 1 v 0 0.5\n",
        )
        .unwrap();
        let n = inst.normalize();
        assert_eq!(n.len(), 1);
        assert_eq!(n.points()[0].id, 1);
        assert_eq!(n.points()[0].prob, 0.75);

        let inst = parse_instance(
            "tree 2\nedge 0 1 1\npoints 3\npoint 0 e 0 0.5 1\npoint 1 e 0 0.5 0.2\npoint 2 e 0 0.5 0.9\n",
        )
        .unwrap();
        let n = inst.normalize();
        assert_eq!(n.len(), 1);
        assert_eq!(n.points()[0].prob, 1.0);

        let a = instance_a();
        assert_eq!(a.normalize().points(), a.points());
    }

    #[test]
    fn directions_at_vertex_follow_edge_start() {
        let a = instance_a();
        let dirs = a.tree().directions_at(&Location::Vertex(1));
        assert!(dirs.contains(&Direction { edge: 0, increasing: false }));
        assert!(dirs.contains(&Direction { edge: 1, increasing: true }));
    }
}
