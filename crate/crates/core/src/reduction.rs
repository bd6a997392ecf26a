//! Reduction of an instance to a rooted tree whose vertices are exactly the
//! point locations plus the branching vertices between them.
//!
//! Edges are split at every interior point, empty leaves are pruned
//! repeatedly, and empty degree-2 vertices are spliced out. Vertices are
//! numbered in DFS preorder from the root, so the subtree of `v` is the index
//! range `v..v + size(v)`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::length::Length;
use crate::tree_space::{Instance, Location, PointId};

/// A piece of an original edge traversed from offset `from` to offset `to`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Segment {
    pub edge: usize,
    pub from: Length,
    pub to: Length,
}

impl Segment {
    pub fn len(&self) -> Length {
        (self.to - self.from).abs()
    }

    pub fn is_empty(&self) -> bool {
        self.from == self.to
    }

    fn reversed(self) -> Segment {
        Segment {
            edge: self.edge,
            from: self.to,
            to: self.from,
        }
    }
}

/// A maximal chain `(b_1, ..., b_k)`: each `b_i` is the only child of
/// `b_{i-1}`, `b_k` has at most one child and `b_1` is the root or an only
/// child.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Chain {
    pub vertices: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct ReducedSpace {
    parent: Vec<usize>,
    children: Vec<Vec<usize>>,
    size: Vec<usize>,
    depth: Vec<Length>,
    ids: Vec<PointId>,
    probs: Vec<f64>,
    point_index: Vec<Option<usize>>,
    location: Vec<Location>,
    segments: Vec<Vec<Segment>>,
    rank: Vec<usize>,
    order: Vec<usize>,
    chain_of: Vec<Option<(usize, usize)>>,
    chains: Vec<Chain>,
    original_vertex_count: usize,
}

/// Reduces a normalized instance. Points are referred to by their index in
/// `instance.points()`.
pub fn reduce(instance: &Instance) -> Result<ReducedSpace> {
    if instance.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    if !instance.is_normalized() {
        return Err(Error::InvalidArgument(
            "reduce needs an instance with distinct point locations".into(),
        ));
    }
    let tree = instance.tree();
    let t = tree.vertex_count();

    // Refined graph: original vertices, then one node per interior point.
    let mut node_point: Vec<Option<usize>> = vec![None; t];
    let mut node_location: Vec<Location> = (0..t).map(Location::Vertex).collect();
    let mut on_edge: Vec<Vec<(Length, usize)>> = vec![Vec::new(); tree.edges().len()];
    for (i, p) in instance.points().iter().enumerate() {
        match p.location {
            Location::Vertex(v) => node_point[v] = Some(i),
            Location::EdgePoint { edge, offset } => {
                on_edge[edge].push((offset, node_point.len()));
                node_point.push(Some(i));
                node_location.push(p.location);
            }
        }
    }
    let nodes = node_point.len();
    let mut adj: Vec<Vec<(usize, Segment)>> = vec![Vec::new(); nodes];
    for (ei, e) in tree.edges().iter().enumerate() {
        let stops = &mut on_edge[ei];
        stops.sort_unstable();
        let mut prev = (Length::ZERO, e.u);
        for &(off, node) in stops.iter().chain(std::iter::once(&(e.weight, e.v))) {
            let seg = Segment {
                edge: ei,
                from: prev.0,
                to: off,
            };
            adj[prev.1].push((node, seg));
            adj[node].push((prev.1, seg.reversed()));
            prev = (off, node);
        }
    }

    // Prune empty leaves.
    let mut degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut alive = vec![true; nodes];
    let mut queue: Vec<usize> = (0..nodes)
        .filter(|&v| degree[v] <= 1 && node_point[v].is_none())
        .collect();
    while let Some(v) = queue.pop() {
        if !alive[v] {
            continue;
        }
        alive[v] = false;
        for &(w, _) in &adj[v] {
            if alive[w] {
                degree[w] -= 1;
                if degree[w] <= 1 && node_point[w].is_none() {
                    queue.push(w);
                }
            }
        }
    }
    let kept: Vec<bool> = (0..nodes)
        .map(|v| alive[v] && (node_point[v].is_some() || degree[v] >= 3))
        .collect();

    let root_point = (0..instance.len())
        .min_by_key(|&i| instance.points()[i].id)
        .expect("nonempty");
    let root_node = (0..nodes)
        .find(|&v| node_point[v] == Some(root_point))
        .expect("root point has a node");

    // Preorder DFS over kept nodes, splicing through empty degree-2 nodes.
    struct Pending {
        node: usize,
        parent: usize,
        via: usize,
        segments: Vec<Segment>,
    }
    let mut parent = Vec::new();
    let mut node_of = Vec::new();
    let mut segments = Vec::new();
    let mut stack = vec![Pending {
        node: root_node,
        parent: 0,
        via: usize::MAX,
        segments: Vec::new(),
    }];
    while let Some(p) = stack.pop() {
        let me = parent.len();
        parent.push(if me == 0 { 0 } else { p.parent });
        node_of.push(p.node);
        segments.push(p.segments);
        for &(first, seg) in adj[p.node].iter().rev() {
            if !alive[first] || first == p.via {
                continue;
            }
            let mut path = vec![seg];
            let (mut prev, mut cur) = (p.node, first);
            while !kept[cur] {
                let &(next, s) = adj[cur]
                    .iter()
                    .find(|&&(w, _)| alive[w] && w != prev)
                    .expect("spliced vertex has two live neighbors");
                path.push(s);
                prev = cur;
                cur = next;
            }
            stack.push(Pending {
                node: cur,
                parent: me,
                via: prev,
                segments: path,
            });
        }
    }

    let count = parent.len();
    let mut children = vec![Vec::new(); count];
    let mut depth = vec![Length::ZERO; count];
    for v in 1..count {
        children[parent[v]].push(v);
        let w: Length = segments[v].iter().map(Segment::len).sum();
        depth[v] = depth[parent[v]] + w;
    }
    let mut size = vec![1; count];
    for v in (1..count).rev() {
        size[parent[v]] += size[v];
    }

    let max_id = instance.points().iter().map(|p| p.id).max().expect("nonempty");
    let mut next_dummy = max_id + 1;
    let mut ids = Vec::with_capacity(count);
    let mut probs = Vec::with_capacity(count);
    let mut point_index = Vec::with_capacity(count);
    let mut location = Vec::with_capacity(count);
    for &node in &node_of {
        match node_point[node] {
            Some(i) => {
                ids.push(instance.points()[i].id);
                probs.push(instance.points()[i].prob);
            }
            None => {
                ids.push(next_dummy);
                next_dummy += 1;
                probs.push(0.0);
            }
        }
        point_index.push(node_point[node]);
        location.push(node_location[node]);
    }

    let mut order: Vec<usize> = (0..count).collect();
    order.sort_unstable_by_key(|&v| (depth[v], ids[v]));
    let mut rank = vec![0; count];
    for (r, &v) in order.iter().enumerate() {
        rank[v] = r;
    }

    let mut space = ReducedSpace {
        parent,
        children,
        size,
        depth,
        ids,
        probs,
        point_index,
        location,
        segments,
        rank,
        order,
        chain_of: vec![None; count],
        chains: Vec::new(),
        original_vertex_count: t,
    };
    space.decompose_chains();
    Ok(space)
}

impl ReducedSpace {
    fn decompose_chains(&mut self) {
        let n = self.len();
        let is_chain: Vec<bool> = (0..n)
            .map(|v| {
                self.children[v].len() <= 1
                    && (v == self.root() || self.children[self.parent[v]].len() == 1)
            })
            .collect();
        for v in 0..n {
            if !is_chain[v] || (v != self.root() && is_chain[self.parent[v]]) {
                continue;
            }
            let mut vertices = vec![v];
            let mut cur = v;
            while let [c] = self.children[cur][..] {
                if !is_chain[c] {
                    break;
                }
                vertices.push(c);
                cur = c;
            }
            let idx = self.chains.len();
            for (i, &b) in vertices.iter().enumerate() {
                self.chain_of[b] = Some((idx, i));
            }
            self.chains.push(Chain { vertices });
        }
    }

    /// Number of vertices (real and dummy points).
    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn root(&self) -> usize {
        0
    }

    /// Parent of `v`; the root is its own parent.
    pub fn parent(&self, v: usize) -> usize {
        self.parent[v]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    pub fn subtree_size(&self, v: usize) -> usize {
        self.size[v]
    }

    /// Vertex index range of the subtree rooted at `v`.
    pub fn subtree(&self, v: usize) -> std::ops::Range<usize> {
        v..v + self.size[v]
    }

    pub fn in_subtree(&self, root: usize, v: usize) -> bool {
        root <= v && v < root + self.size[root]
    }

    pub fn depth(&self, v: usize) -> Length {
        self.depth[v]
    }

    /// Length of the edge from `v` to its parent (zero for the root).
    pub fn edge_weight(&self, v: usize) -> Length {
        self.depth[v] - self.depth[self.parent[v]]
    }

    /// Original-tree pieces of the edge from the parent of `v` down to `v`.
    pub fn segments(&self, v: usize) -> &[Segment] {
        &self.segments[v]
    }

    pub fn id(&self, v: usize) -> PointId {
        self.ids[v]
    }

    pub fn prob(&self, v: usize) -> f64 {
        self.probs[v]
    }

    /// Index of the hosted point in the reduced instance, `None` for dummies.
    pub fn point_index(&self, v: usize) -> Option<usize> {
        self.point_index[v]
    }

    pub fn is_dummy(&self, v: usize) -> bool {
        self.point_index[v].is_none()
    }

    /// Location of `v` in the original tree.
    pub fn location(&self, v: usize) -> Location {
        self.location[v]
    }

    /// Position of `v` in the `(depth, id)` order.
    pub fn prec_rank(&self, v: usize) -> usize {
        self.rank[v]
    }

    /// Vertices sorted by `(depth, id)`.
    pub fn prec_order(&self) -> &[usize] {
        &self.order
    }

    pub fn prec_compare(&self, a: usize, b: usize) -> std::cmp::Ordering {
        self.rank[a].cmp(&self.rank[b])
    }

    pub fn vertex_of_id(&self, id: PointId) -> Option<usize> {
        self.ids.iter().position(|&x| x == id)
    }

    pub fn original_vertex_count(&self) -> usize {
        self.original_vertex_count
    }

    pub fn chains(&self) -> &[Chain] {
        &self.chains
    }

    /// `(chain index, position in chain)` for chain vertices.
    pub fn chain_position(&self, v: usize) -> Option<(usize, usize)> {
        self.chain_of[v]
    }

    pub fn is_chain_vertex(&self, v: usize) -> bool {
        self.chain_of[v].is_some()
    }

    pub fn non_chain_count(&self) -> usize {
        self.chain_of.iter().filter(|c| c.is_none()).count()
    }

    pub fn lca(&self, a: usize, b: usize) -> usize {
        let mut a = a;
        while !self.in_subtree(a, b) {
            a = self.parent[a];
        }
        a
    }

    pub fn dist(&self, a: usize, b: usize) -> Length {
        let l = self.lca(a, b);
        self.depth[a] + self.depth[b] - self.depth[l] - self.depth[l]
    }

    /// Reduced tree in the instance file format (dummies carry probability
    /// 0), followed by a comment block mapping vertices to original
    /// locations.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        writeln!(out, "tree {}", self.len()).unwrap();
        for v in 1..self.len() {
            writeln!(out, "edge {} {} {}", self.parent[v], v, self.edge_weight(v).to_f64()).unwrap();
        }
        writeln!(out, "points {}", self.len()).unwrap();
        for v in 0..self.len() {
            writeln!(out, "point {} v {} {}", self.ids[v], v, self.probs[v]).unwrap();
        }
        writeln!(out, "# backmap").unwrap();
        for v in 0..self.len() {
            let loc = match self.location[v] {
                Location::Vertex(u) => format!("v {u}"),
                Location::EdgePoint { edge, offset } => format!("e {edge} {}", offset.to_f64()),
            };
            let kind = if self.is_dummy(v) { "dummy" } else { "point" };
            writeln!(out, "# {v} {kind} {loc}").unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree_space::{generate_random, parse_instance, ProbModel};

    fn space(text: &str) -> ReducedSpace {
        reduce(&parse_instance(text).unwrap()).unwrap()
    }

    #[test]
    fn path_with_two_interior_points() {
        let s = space("tree 2\nedge 0 1 10\npoints 2\npoint 0 e 0 2 0.3\npoint 1 e 0 7 0.9\n");
        assert_eq!(s.len(), 2);
        assert_eq!(s.edge_weight(1).to_f64(), 5.0);
        assert_eq!(s.id(0), 0);
        assert_eq!(
            s.segments(1),
            &[Segment {
                edge: 0,
                from: Length::from_input(2.0).unwrap(),
                to: Length::from_input(7.0).unwrap()
            }]
        );
    }

    #[test]
    fn instance_a_is_unchanged() {
        let s = space(
            "tree 3\nedge 0 1 3\nedge 1 2 4\npoints 3\npoint 0 v 0 0.5\npoint 1 v 1 0.5\npoint 2 v 2 1.0\n",
        );
        assert_eq!(s.len(), 3);
        assert_eq!(s.location(0), Location::Vertex(0));
        assert_eq!(s.depth(2).to_f64(), 7.0);
        let ids: Vec<_> = s.prec_order().iter().map(|&v| s.id(v)).collect();
        assert_eq!(ids, vec![0, 1, 2]);
        assert_eq!(s.chains().len(), 1);
        assert_eq!(s.chains()[0].vertices, vec![0, 1, 2]);
    }

    #[test]
    fn star_with_points_on_one_arm() {
        let s = space(
            "tree 4\nedge 0 1 5\nedge 0 2 5\nedge 0 3 5\npoints 2\npoint 0 e 0 1 0.5\npoint 1 e 0 4 0.5\n",
        );
        assert_eq!(s.len(), 2);
        assert_eq!(s.dist(0, 1).to_f64(), 3.0);
    }

    #[test]
    fn branching_vertex_becomes_dummy() {
        let s = space(
            "tree 4\nedge 0 1 1\nedge 0 2 2\nedge 0 3 3\npoints 3\npoint 5 v 1 0.5\npoint 2 v 2 0.5\npoint 9 v 3 0.5\n",
        );
        assert_eq!(s.len(), 4);
        assert_eq!(s.id(0), 2);
        let dummy = (0..4).find(|&v| s.is_dummy(v)).unwrap();
        assert_eq!(s.id(dummy), 10);
        assert_eq!(s.prob(dummy), 0.0);
        assert_eq!(s.location(dummy), Location::Vertex(0));
        // star rooted at a leaf: only the root is a chain vertex
        assert_eq!(s.non_chain_count(), 3);
    }

    #[test]
    fn chain_shapes() {
        let path = space(
            "tree 5\nedge 0 1 1\nedge 1 2 1\nedge 2 3 1\nedge 3 4 1\npoints 5\npoint 0 v 0 .5\npoint 1 v 1 .5\npoint 2 v 2 .5\npoint 3 v 3 .5\npoint 4 v 4 .5\n",
        );
        assert_eq!(path.chains().len(), 1);
        assert_eq!(path.chains()[0].vertices.len(), 5);

        let star = space(
            "tree 4\nedge 0 1 1\nedge 0 2 1\nedge 0 3 1\npoints 4\npoint 0 v 0 .5\npoint 1 v 1 .5\npoint 2 v 2 .5\npoint 3 v 3 .5\n",
        );
        assert!(star.chains().is_empty());
        assert_eq!(star.non_chain_count(), 4);

        let single = space("tree 1\npoints 1\npoint 0 v 0 .5\n");
        assert_eq!(single.chains(), &[Chain { vertices: vec![0] }]);
    }

    #[test]
    fn rejects_empty() {
        let inst = parse_instance("tree 2\nedge 0 1 1\npoints 0\n").unwrap();
        assert!(matches!(reduce(&inst), Err(Error::EmptyPointSet)));
    }

    #[test]
    fn random_instances_preserve_distances() {
        for seed in 0..40 {
            let inst = generate_random(2 + seed as usize % 30, 1 + seed as usize % 25, seed, ProbModel::Uniform).unwrap();
            let s = reduce(&inst).unwrap();
            let n = inst.len();
            assert!(s.len() <= 2 * n);
            assert!(s.non_chain_count() <= 7 * (inst.tree().vertex_count() - 1));
            let vertex: Vec<usize> = (0..n)
                .map(|i| (0..s.len()).find(|&v| s.point_index(v) == Some(i)).unwrap())
                .collect();
            for i in 0..n {
                for j in 0..n {
                    assert_eq!(s.dist(vertex[i], vertex[j]), inst.point_dist(i, j));
                }
            }
            for v in 1..s.len() {
                let seg_len: Length = s.segments(v).iter().map(Segment::len).sum();
                assert_eq!(seg_len, s.edge_weight(v));
                assert!(s.edge_weight(v).is_positive());
            }
        }
    }
}
