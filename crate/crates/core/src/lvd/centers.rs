//! Center enumeration on the reduced tree.
//!
//! A depth-first walk carries one distance-sorted list of all points. Moving
//! across a reduced edge splits the list into the points below and above
//! the edge, shifts both by the edge weight in opposite directions and
//! merges them back, so every vertex sees its own sorted list in `O(n)`.
//! Vertex centers are equal-distance groups spanning two or more branches.
//! Centers inside an edge pair a distance group below it (`a`, measured
//! from the lower end) with one above it (`b`, from the upper end) whenever
//! `|a - b| < w`; a sliding window over the groups finds all such pairs.

use smallvec::SmallVec;

use super::Center;
use crate::error::{Error, Result};
use crate::length::Length;
use crate::reduction::{reduce, ReducedSpace, Segment};
use crate::tree_space::{Direction, Instance, Location, WeightedTree};

type Entry = (Length, u32);

fn toward(seg: &Segment) -> Direction {
    Direction {
        edge: seg.edge,
        increasing: seg.to > seg.from,
    }
}

fn back_along(seg: &Segment) -> Direction {
    Direction {
        edge: seg.edge,
        increasing: seg.from > seg.to,
    }
}

/// Location at distance `y` (strictly inside) from the upper end of the
/// reduced edge above `c`, with the directions toward `c` and back up.
fn locate(space: &ReducedSpace, tree: &WeightedTree, c: usize, y: Length) -> (Location, Direction, Direction) {
    let segs = space.segments(c);
    let mut cum = Length::ZERO;
    for (i, s) in segs.iter().enumerate() {
        let l = s.len();
        if y < cum + l {
            let into = y - cum;
            if into == Length::ZERO {
                let loc = tree.at(s.edge, s.from).expect("segment start lies on its edge");
                debug_assert!(matches!(loc, Location::Vertex(_)));
                return (loc, toward(s), back_along(&segs[i - 1]));
            }
            let offset = if s.to > s.from { s.from + into } else { s.from - into };
            let dir = toward(s);
            let back = Direction {
                edge: s.edge,
                increasing: !dir.increasing,
            };
            return (Location::EdgePoint { edge: s.edge, offset }, dir, back);
        }
        cum += l;
    }
    unreachable!("offset lies inside the reduced edge")
}

/// Start indices of equal-distance runs, plus the end.
fn group_starts(list: &[Entry], out: &mut Vec<usize>) {
    out.clear();
    for i in 0..list.len() {
        if i == 0 || list[i].0 != list[i - 1].0 {
            out.push(i);
        }
    }
    out.push(list.len());
}

struct Walker<'a> {
    space: &'a ReducedSpace,
    tree: &'a WeightedTree,
    list: Vec<Entry>,
    inside: Vec<Entry>,
    outside: Vec<Entry>,
    gin: Vec<usize>,
    gout: Vec<usize>,
    out: Vec<Center>,
}

impl Walker<'_> {
    fn point(&self, v: u32) -> u32 {
        self.space.point_index(v as usize).expect("only real points are listed") as u32
    }

    fn split(&mut self, c: usize) {
        self.inside.clear();
        self.outside.clear();
        for &e in &self.list {
            if self.space.in_subtree(c, e.1 as usize) {
                self.inside.push(e);
            } else {
                self.outside.push(e);
            }
        }
    }

    /// Rebuilds the list from `inside` shifted by `din` and `outside` by `dout`.
    fn merge(&mut self, din: Length, dout: Length) {
        self.list.clear();
        let (mut i, mut j) = (0, 0);
        while i < self.inside.len() || j < self.outside.len() {
            let a = self.inside.get(i).map(|e| (e.0 + din, e.1));
            let b = self.outside.get(j).map(|e| (e.0 + dout, e.1));
            match (a, b) {
                (Some(x), Some(y)) if x.0 <= y.0 => {
                    self.list.push(x);
                    i += 1;
                }
                (Some(x), None) => {
                    self.list.push(x);
                    i += 1;
                }
                (_, Some(y)) => {
                    self.list.push(y);
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }
    }

    fn vertex_centers(&mut self, v: usize) {
        let space = self.space;
        let children = space.children(v);
        let mut starts = std::mem::take(&mut self.gin);
        group_starts(&self.list, &mut starts);
        for g in starts.windows(2) {
            let (lo, hi) = (g[0], g[1]);
            let d = self.list[lo].0;
            if hi - lo < 2 || d == Length::ZERO {
                continue;
            }
            // branch key: child position, or children.len() for the parent side
            let mut keyed: SmallVec<[(usize, u32); 8]> = self.list[lo..hi]
                .iter()
                .map(|&(_, u)| {
                    let u = u as usize;
                    let b = if space.in_subtree(v, u) {
                        children.partition_point(|&c| c <= u) - 1
                    } else {
                        children.len()
                    };
                    (b, self.point(u as u32))
                })
                .collect();
            keyed.sort_unstable();
            if keyed[0].0 == keyed[keyed.len() - 1].0 {
                continue;
            }
            let mut groups: Vec<(Direction, Vec<u32>)> = Vec::new();
            for &(b, p) in &keyed {
                let dir = if b == children.len() {
                    back_along(space.segments(v).last().expect("non-root has an edge"))
                } else {
                    toward(&space.segments(children[b])[0])
                };
                match groups.last_mut() {
                    Some(last) if last.0 == dir => last.1.push(p),
                    _ => groups.push((dir, vec![p])),
                }
            }
            self.out.push(Center::new(space.location(v), d, lo as u32, groups));
        }
        self.gin = starts;
    }

    /// Centers strictly inside the reduced edge above `c`; `inside` holds
    /// distances from the parent, `outside` likewise.
    fn edge_centers(&mut self, c: usize) {
        let w = self.space.edge_weight(c);
        let mut gin = std::mem::take(&mut self.gin);
        let mut gout = std::mem::take(&mut self.gout);
        group_starts(&self.inside, &mut gin);
        group_starts(&self.outside, &mut gout);
        let nout = gout.len() - 1;
        let (mut lo, mut hi) = (0, 0);
        for gi in gin.windows(2) {
            // distance of this group from c
            let a = self.inside[gi[0]].0 - w;
            while lo < nout && self.outside[gout[lo]].0 <= a - w {
                lo += 1;
            }
            while hi < nout && self.outside[gout[hi]].0 < a + w {
                hi += 1;
            }
            for go in lo..hi {
                let b = self.outside[gout[go]].0;
                let from_top = (w + a - b).half();
                let (location, down, up) = locate(self.space, self.tree, c, from_top);
                let below: Vec<u32> = self.inside[gi[0]..gi[1]].iter().map(|e| self.point(e.1)).collect();
                let above: Vec<u32> = self.outside[gout[go]..gout[go + 1]]
                    .iter()
                    .map(|e| self.point(e.1))
                    .collect();
                let diameter = (a + b + w).half();
                let depth = (gi[0] + gout[go]) as u32;
                self.out.push(Center::new(location, diameter, depth, [(down, below), (up, above)]));
            }
        }
        self.gin = gin;
        self.gout = gout;
    }
}

/// All centers of a normalized instance, sorted by location then diameter.
pub fn enumerate_centers(instance: &Instance) -> Result<Vec<Center>> {
    if !instance.is_normalized() {
        return Err(Error::InvalidArgument("center enumeration needs a normalized instance".into()));
    }
    if instance.len() < 2 {
        return Ok(Vec::new());
    }
    let space = reduce(instance)?;
    Ok(centers_on(&space, instance.tree()))
}

pub(crate) fn centers_on(space: &ReducedSpace, tree: &WeightedTree) -> Vec<Center> {
    let mut list: Vec<Entry> = (0..space.len())
        .filter(|&v| !space.is_dummy(v))
        .map(|v| (space.depth(v), v as u32))
        .collect();
    list.sort_unstable();
    let mut w = Walker {
        space,
        tree,
        list,
        inside: Vec::new(),
        outside: Vec::new(),
        gin: Vec::new(),
        gout: Vec::new(),
        out: Vec::new(),
    };

    // (vertex, next child slot)
    let mut stack = vec![(space.root(), 0usize)];
    w.vertex_centers(space.root());
    while let Some(&mut (v, ref mut slot)) = stack.last_mut() {
        if let Some(&c) = space.children(v).get(*slot) {
            *slot += 1;
            let wt = space.edge_weight(c);
            w.split(c);
            w.edge_centers(c);
            w.merge(-wt, wt);
            w.vertex_centers(c);
            stack.push((c, 0));
        } else {
            stack.pop();
            if v != space.root() {
                let wt = space.edge_weight(v);
                w.split(v);
                w.merge(wt, -wt);
            }
        }
    }
    let mut out = w.out;
    out.sort_unstable_by(|a, b| (a.location, a.diameter).cmp(&(b.location, b.diameter)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree_space::parse_instance;

    fn len(x: f64) -> Length {
        Length::from_input(x).unwrap()
    }

    #[test]
    fn instance_a_has_three_centers() {
        let a = parse_instance(
            "tree 3\nedge 0 1 3\nedge 1 2 4\npoints 3\npoint 0 v 0 0.5\npoint 1 v 1 0.5\npoint 2 v 2 1.0\n",
        )
        .unwrap();
        let cs = enumerate_centers(&a).unwrap();
        let summary: Vec<_> = cs
            .iter()
            .map(|c| (c.location, c.diameter, c.involved_ids(&a), c.degree()))
            .collect();
        let ep = |edge, off| Location::EdgePoint { edge, offset: len(off) };
        assert_eq!(
            summary,
            vec![
                (ep(0, 1.5), len(1.5), vec![0, 1], 2),
                (ep(1, 0.5), len(3.5), vec![0, 2], 2),
                (ep(1, 2.0), len(2.0), vec![1, 2], 2),
            ]
        );
        assert_eq!(cs[1].depth, 1);
    }

    #[test]
    fn star_hub_center() {
        let s = parse_instance(
            "tree 5\nedge 0 1 2\nedge 0 2 2\nedge 0 3 2\nedge 0 4 2\npoints 4\npoint 0 v 1 .5\npoint 1 v 2 .5\npoint 2 v 3 .5\npoint 3 v 4 .5\n",
        )
        .unwrap();
        let cs = enumerate_centers(&s).unwrap();
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0].location, Location::Vertex(0));
        assert_eq!(cs[0].diameter, len(2.0));
        assert_eq!(cs[0].degree(), 4);
        assert_eq!(cs[0].involved_count(), 4);
        assert_eq!(cs[0].depth, 0);
    }

    #[test]
    fn two_points_one_center() {
        let s = parse_instance("tree 2\nedge 0 1 4\npoints 2\npoint 3 e 0 1 .5\npoint 1 v 1 .5\n").unwrap();
        let cs = enumerate_centers(&s).unwrap();
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0].location, Location::EdgePoint { edge: 0, offset: len(2.5) });
    }

    #[test]
    fn center_across_a_spliced_vertex() {
        // points on two different edges; the midpoint is the shared vertex
        let s = parse_instance(
            "tree 3\nedge 0 1 2\nedge 1 2 2\npoints 2\npoint 0 e 0 1 .5\npoint 1 e 1 1 .5\n",
        )
        .unwrap();
        let cs = enumerate_centers(&s).unwrap();
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0].location, Location::Vertex(1));
        let dirs: Vec<_> = cs[0].branches().map(|b| b.0).collect();
        assert_eq!(
            dirs,
            vec![Direction { edge: 0, increasing: false }, Direction { edge: 1, increasing: true }]
        );
    }
}
