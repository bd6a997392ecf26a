//! LVD construction by an Euler walk over the original tree.
//!
//! The walk keeps every point's NNP key in an ordered set. Crossing a center
//! changes only the keys of its involved points: arriving from a branch
//! removes that branch's blocking factor from the involved points outside
//! it, and leaving into a branch adds that branch's factor to the points
//! outside it. The first traversal of each edge records its breakpoint list.

use std::collections::{BTreeSet, HashMap};
use std::ops::Range;

use super::nnp::{k_lnn_at, nnp_factors, ranking, LogFactor, NnpKey};
use super::stats::{diagram_stats, DiagramStats};
use super::Center;
use crate::error::{Error, Result};
use crate::length::Length;
use crate::reduction::reduce;
use crate::tree_space::{Direction, Instance, Location, PointId};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Breakpoint {
    pub offset: Length,
    /// Answer exactly at `offset`.
    pub at: u32,
    /// Answer on the open interval up to the next breakpoint.
    pub after: u32,
}

/// Cell decomposition of one edge, in offset order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EdgeList {
    /// Answer at offset 0 and up to the first breakpoint.
    pub start: u32,
    pub breakpoints: Vec<Breakpoint>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lvd {
    k: usize,
    answers: Vec<PointId>,
    edges: Vec<EdgeList>,
    lengths: Option<Vec<Length>>,
}

impl Lvd {
    pub(crate) fn from_parts(
        k: usize,
        answers: Vec<PointId>,
        edges: Vec<EdgeList>,
        lengths: Option<Vec<Length>>,
    ) -> Lvd {
        Lvd {
            k,
            answers,
            edges,
            lengths,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn answer_count(&self) -> usize {
        self.answers.len() / self.k
    }

    pub fn answer(&self, idx: u32) -> &[PointId] {
        let s = idx as usize * self.k;
        &self.answers[s..s + self.k]
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edge_list(&self, edge: usize) -> &EdgeList {
        &self.edges[edge]
    }

    /// Edge lengths, known when the diagram was built rather than parsed.
    pub fn edge_length(&self, edge: usize) -> Option<Length> {
        self.lengths.as_ref().map(|l| l[edge])
    }

    pub fn breakpoint_count(&self) -> usize {
        self.edges.iter().map(|e| e.breakpoints.len()).sum()
    }

    fn check(&self, edge: usize, delta: Length) -> Result<&EdgeList> {
        let list = self
            .edges
            .get(edge)
            .ok_or_else(|| Error::InvalidLocation(format!("edge {edge} out of range")))?;
        let too_long = self.edge_length(edge).is_some_and(|w| delta > w);
        if delta < Length::ZERO || too_long {
            return Err(Error::InvalidLocation(format!("offset {delta} outside edge {edge}")));
        }
        Ok(list)
    }

    /// Answer index at `(edge, delta)`: an exact breakpoint hit gives its
    /// at-point answer, otherwise the after-answer of the last breakpoint
    /// before `delta`.
    pub fn query_index(&self, edge: usize, delta: Length) -> Result<u32> {
        let list = self.check(edge, delta)?;
        let i = list.breakpoints.partition_point(|b| b.offset <= delta);
        Ok(match i.checked_sub(1).map(|j| &list.breakpoints[j]) {
            Some(b) if b.offset == delta => b.at,
            Some(b) => b.after,
            None => list.start,
        })
    }

    pub fn query(&self, edge: usize, delta: Length) -> Result<&[PointId]> {
        Ok(self.answer(self.query_index(edge, delta)?))
    }

    pub fn query_f64(&self, edge: usize, delta: f64) -> Result<&[PointId]> {
        let d = Length::from_f64(delta)
            .ok_or_else(|| Error::InvalidLocation(format!("offset {delta} is not finite")))?;
        self.query(edge, d)
    }

    /// Answer on the open interval just after `delta`.
    pub fn after_index(&self, edge: usize, delta: Length) -> Result<u32> {
        let list = self.check(edge, delta)?;
        let i = list.breakpoints.partition_point(|b| b.offset <= delta);
        Ok(i.checked_sub(1).map_or(list.start, |j| list.breakpoints[j].after))
    }

    /// Answer on the open interval just before `delta`.
    pub fn before_index(&self, edge: usize, delta: Length) -> Result<u32> {
        let list = self.check(edge, delta)?;
        let i = list.breakpoints.partition_point(|b| b.offset < delta);
        Ok(i.checked_sub(1).map_or(list.start, |j| list.breakpoints[j].after))
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
struct Ranked(NnpKey, PointId);

impl Ord for Ranked {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        ranking((self.0, self.1), (o.0, o.1))
    }
}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}

struct Walk<'a> {
    inst: &'a Instance,
    k: usize,
    checked: bool,
    centers: &'a [Center],
    factors: Vec<LogFactor>,
    block: Vec<LogFactor>,
    set: BTreeSet<Ranked>,
    answers: Vec<PointId>,
    answer_ids: HashMap<Vec<PointId>, u32>,
    buf: Vec<PointId>,
}

impl Walk<'_> {
    fn apply(&mut self, i: usize, delta: LogFactor, add: bool) {
        let id = self.inst.points()[i].id;
        self.set.remove(&Ranked(self.factors[i].rank(), id));
        if add {
            self.factors[i] += delta;
        } else {
            self.factors[i] -= delta;
        }
        self.set.insert(Ranked(self.factors[i].rank(), id));
    }

    /// Adds (or removes) the blocking factor of the branch in direction
    /// `dir` to every involved point outside that branch.
    fn cross(&mut self, c: usize, dir: Direction, add: bool) {
        let center = &self.centers[c];
        let mut start = 0usize;
        let mut found = None;
        for (d, pts) in center.branches() {
            if d == dir {
                found = Some(start..start + pts.len());
                break;
            }
            start += pts.len();
        }
        let Some(range) = found else { return };
        let members = center.involved();
        let s = members[range.clone()]
            .iter()
            .fold(LogFactor::ONE, |acc, &i| acc + self.block[i as usize]);
        for (j, &i) in members.iter().enumerate() {
            if !range.contains(&j) {
                self.apply(i as usize, s, add);
            }
        }
    }

    fn current(&mut self) -> u32 {
        self.buf.clear();
        self.buf.extend(self.set.iter().take(self.k).map(|r| r.1));
        if let Some(&idx) = self.answer_ids.get(&self.buf) {
            return idx;
        }
        let idx = self.answer_ids.len() as u32;
        self.answers.extend_from_slice(&self.buf);
        self.answer_ids.insert(self.buf.clone(), idx);
        idx
    }

    fn verify(&self, q: Location, idx: u32) {
        let want = k_lnn_at(self.inst, &q, self.k).expect("valid probe");
        let s = idx as usize * self.k;
        assert_eq!(&self.answers[s..s + self.k], &want[..], "answer mismatch at {q:?}");
    }
}

fn index_centers(centers: &[Center], t: usize, edges: usize) -> (Vec<Range<usize>>, Vec<Range<usize>>) {
    let mut at_vertex = vec![0..0; t];
    let mut on_edge = vec![0..0; edges];
    let mut i = 0;
    while i < centers.len() {
        let mut j = i;
        match centers[i].location {
            Location::Vertex(v) => {
                while j < centers.len() && centers[j].location == Location::Vertex(v) {
                    j += 1;
                }
                at_vertex[v] = i..j;
            }
            Location::EdgePoint { edge, .. } => {
                while j < centers.len()
                    && matches!(centers[j].location, Location::EdgePoint { edge: e, .. } if e == edge)
                {
                    j += 1;
                }
                on_edge[edge] = i..j;
            }
        }
        i = j;
    }
    (at_vertex, on_edge)
}

fn offset_of(c: &Center) -> Length {
    match c.location {
        Location::EdgePoint { offset, .. } => offset,
        Location::Vertex(_) => unreachable!("edge center"),
    }
}

/// Builds the k-LVD of the normalized instance together with its
/// statistics.
pub fn build_lvd(instance: &Instance, k: usize) -> Result<(Lvd, DiagramStats)> {
    build(instance, k, false)
}

/// As [`build_lvd`], additionally asserting every recorded answer and every
/// interval midpoint against the direct k-LNN computation.
pub fn build_lvd_checked(instance: &Instance, k: usize) -> Result<(Lvd, DiagramStats)> {
    build(instance, k, true)
}

fn build(instance: &Instance, k: usize, checked: bool) -> Result<(Lvd, DiagramStats)> {
    let inst = instance.normalize();
    let n = inst.len();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("k = {k} outside 1..={n}")));
    }
    let centers = if n >= 2 {
        super::centers::centers_on(&reduce(&inst)?, inst.tree())
    } else {
        Vec::new()
    };
    let lvd = walk(&inst, k, &centers, checked);
    let stats = diagram_stats(&inst, &lvd, &centers)?;
    Ok((lvd, stats))
}

fn walk(inst: &Instance, k: usize, centers: &[Center], checked: bool) -> Lvd {
    let tree = inst.tree();
    let t = tree.vertex_count();
    let m = tree.edges().len();
    let (at_vertex, on_edge) = index_centers(centers, t, m);

    let start = Location::Vertex(0);
    let factors = nnp_factors(inst, &start);
    let mut w = Walk {
        inst,
        k,
        checked,
        centers,
        set: factors
            .iter()
            .zip(inst.points())
            .map(|(f, p)| Ranked(f.rank(), p.id))
            .collect(),
        factors,
        block: inst.points().iter().map(|p| LogFactor::complement(p.prob)).collect(),
        answers: Vec::new(),
        answer_ids: HashMap::new(),
        buf: Vec::with_capacity(k),
    };
    let mut lists = vec![EdgeList::default(); m];

    // (vertex, next adjacency slot, edge used to reach it)
    let mut stack: Vec<(usize, usize, Option<usize>)> = vec![(0, 0, None)];
    while let Some(&mut (u, ref mut slot, via)) = stack.last_mut() {
        let next = tree.neighbors(u).get(*slot).copied();
        match next {
            Some((_, e)) if Some(e) == via => *slot += 1,
            Some((v, e)) => {
                *slot += 1;
                lists[e] = traverse(&mut w, &at_vertex, &on_edge, u, v, e, true);
                stack.push((v, 0, Some(e)));
            }
            None => {
                stack.pop();
                if let (Some(e), Some(&(p, _, _))) = (via, stack.last()) {
                    traverse(&mut w, &at_vertex, &on_edge, u, p, e, false);
                }
            }
        }
    }

    let lengths = tree.edges().iter().map(|e| e.weight).collect();
    Lvd::from_parts(k, w.answers, lists, Some(lengths))
}

/// Moves the walk from vertex `u` to vertex `v` along edge `e`; when
/// `record` is set, returns the edge's breakpoint list.
fn traverse(
    w: &mut Walk<'_>,
    at_vertex: &[Range<usize>],
    on_edge: &[Range<usize>],
    u: usize,
    v: usize,
    e: usize,
    record: bool,
) -> EdgeList {
    let edge = *w.inst.tree().edge(e);
    let increasing = u == edge.u;
    let forward = Direction { edge: e, increasing };
    let backward = Direction { edge: e, increasing: !increasing };

    // positions in travel order with their at-answers, and the interval
    // answers between consecutive positions
    let mut offsets = Vec::new();
    let mut at = Vec::new();
    let mut between = Vec::new();
    if record {
        offsets.push(if increasing { Length::ZERO } else { edge.weight });
        at.push(w.current());
    }
    for c in at_vertex[u].clone() {
        w.cross(c, forward, true);
    }
    if record {
        between.push(w.current());
    }

    let range = on_edge[e].clone();
    let mut groups: Vec<Range<usize>> = Vec::new();
    let mut i = range.start;
    while i < range.end {
        let mut j = i + 1;
        while j < range.end && offset_of(&w.centers[j]) == offset_of(&w.centers[i]) {
            j += 1;
        }
        groups.push(i..j);
        i = j;
    }
    if !increasing {
        groups.reverse();
    }
    for g in groups {
        for c in g.clone() {
            w.cross(c, backward, false);
        }
        if record {
            offsets.push(offset_of(&w.centers[g.start]));
            at.push(w.current());
        }
        for c in g {
            w.cross(c, forward, true);
        }
        if record {
            between.push(w.current());
        }
    }

    let arrive = Direction {
        edge: e,
        increasing: v == edge.u,
    };
    for c in at_vertex[v].clone() {
        w.cross(c, arrive, false);
    }
    if !record {
        return EdgeList::default();
    }
    offsets.push(if increasing { edge.weight } else { Length::ZERO });
    at.push(w.current());

    if !increasing {
        offsets.reverse();
        at.reverse();
        between.reverse();
    }
    if w.checked {
        let tree = w.inst.tree();
        for (j, &off) in offsets.iter().enumerate() {
            w.verify(tree.at(e, off).expect("on edge"), at[j]);
        }
        for j in 0..between.len() {
            let mid = Length::mid(offsets[j], offsets[j + 1]);
            w.verify(tree.at(e, mid).expect("on edge"), between[j]);
        }
    }

    let last = offsets.len() - 1;
    let mut list = EdgeList {
        start: at[0],
        breakpoints: Vec::new(),
    };
    let mut running = at[0];
    if between[0] != at[0] {
        list.breakpoints.push(Breakpoint {
            offset: offsets[0],
            at: at[0],
            after: between[0],
        });
        running = between[0];
    }
    for j in 1..last {
        if at[j] != running || between[j] != running {
            list.breakpoints.push(Breakpoint {
                offset: offsets[j],
                at: at[j],
                after: between[j],
            });
            running = between[j];
        }
    }
    if at[last] != running {
        list.breakpoints.push(Breakpoint {
            offset: offsets[last],
            at: at[last],
            after: at[last],
        });
    }
    list
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree_space::{generate_random, parse_instance, ProbModel};

    fn len(x: f64) -> Length {
        Length::from_input(x).unwrap()
    }

    fn instance_a() -> Instance {
        parse_instance(
            "tree 3\nedge 0 1 3\nedge 1 2 4\npoints 3\npoint 0 v 0 0.5\npoint 1 v 1 0.5\npoint 2 v 2 1.0\n",
        )
        .unwrap()
    }

    // A tiny change in one probability removes a whole cell.
    #[test]
    fn diagram_is_unstable_under_perturbation() {
        let build = |p: &str| {
            let text = format!("tree 2\nedge 0 1 2\npoints 2\npoint 0 v 0 {p}\npoint 1 v 1 1.0\n");
            build_lvd_checked(&parse_instance(&text).unwrap(), 1).unwrap()
        };
        let (lvd, stats) = build("0.5");
        assert_eq!(stats.cell_count, 2);
        assert_eq!(lvd.query(0, len(0.5)).unwrap(), &[0]);
        let (lvd, stats) = build("0.4999999999");
        assert_eq!(stats.cell_count, 1);
        assert_eq!(lvd.query(0, len(0.5)).unwrap(), &[1]);
    }

    #[test]
    fn instance_a_one_lvd() {
        let (lvd, stats) = build_lvd_checked(&instance_a(), 1).unwrap();
        let q = |e, d| lvd.query(e, len(d)).unwrap().to_vec();
        assert_eq!(q(0, 0.0), vec![0]);
        assert_eq!(q(0, 1.0), vec![0]);
        assert_eq!(q(0, 1.5), vec![0]);
        assert_eq!(q(0, 2.0), vec![1]);
        assert_eq!(q(0, 3.0), vec![1]);
        assert_eq!(q(1, 0.5), vec![1]);
        assert_eq!(q(1, 1.99), vec![1]);
        assert_eq!(q(1, 2.0), vec![2]);
        assert_eq!(q(1, 4.0), vec![2]);
        assert_eq!(stats.cell_count, 3);
        assert!(lvd.query(1, len(4.5)).is_err());
        assert!(lvd.query(2, len(0.0)).is_err());
    }

    #[test]
    fn single_point_is_one_cell() {
        let inst = parse_instance("tree 3\nedge 0 1 1\nedge 1 2 1\npoints 1\npoint 4 e 1 0.5 0.2\n").unwrap();
        let (lvd, stats) = build_lvd(&inst, 1).unwrap();
        assert_eq!(lvd.answer_count(), 1);
        assert_eq!(lvd.query(0, len(0.3)).unwrap(), &[4]);
        assert_eq!(stats.cell_count, 1);
        assert!(build_lvd(&inst, 2).is_err());
    }

    #[test]
    fn random_instances_pass_checked_build() {
        for seed in 0..30 {
            let inst = generate_random(2 + seed as usize % 9, 2 + seed as usize % 14, seed, ProbModel::Uniform).unwrap();
            for k in [1, 2, 3] {
                if k <= inst.len() {
                    build_lvd_checked(&inst, k).unwrap();
                }
            }
        }
    }
}
