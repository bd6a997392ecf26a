use super::{Center, Lvd};
use crate::error::{Error, Result};
use crate::length::Length;
use crate::tree_space::{Dsu, Instance, Location};

/// A center on a cell boundary with an involved point in its answer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CriticalCenter {
    pub location: Location,
    pub diameter: Length,
    pub degree: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiagramStats {
    /// |Ψ|: maximal connected regions of constant answer.
    pub cell_count: usize,
    pub critical: Vec<CriticalCenter>,
    /// Degree sum over critical centers.
    pub xi: usize,
    pub center_count: usize,
    /// Entry `d - 1` is the degree sum over centers of depth below `d`, for
    /// `d` in `1..=n`.
    pub shallow_degree_sums: Vec<u64>,
    /// Involved-point count of each center, in center order.
    pub involved_counts: Vec<usize>,
}

impl DiagramStats {
    /// Degree sum over centers with fewer than `d` strictly closer points.
    pub fn shallow_degree_sum(&self, d: usize) -> u64 {
        match d {
            0 => 0,
            d => self.shallow_degree_sums[(d - 1).min(self.shallow_degree_sums.len() - 1)],
        }
    }
}

/// Statistics of `lvd`, which must have been built from `instance` (or its
/// normalization) with `centers` its center set.
pub fn diagram_stats(instance: &Instance, lvd: &Lvd, centers: &[Center]) -> Result<DiagramStats> {
    let inst = instance.normalize();
    let tree = inst.tree();
    let n = inst.len();
    let m = tree.edges().len();
    if lvd.edge_count() != m || lvd.k() > n.max(1) {
        return Err(Error::InvalidArgument("diagram does not match the instance".into()));
    }
    for (e, edge) in tree.edges().iter().enumerate() {
        if lvd.edge_length(e).is_some_and(|w| w != edge.weight) {
            return Err(Error::InvalidArgument(format!("edge {e} length differs from the instance")));
        }
    }

    // Pieces: vertices first, then per edge its interior breakpoints and
    // open intervals.
    let t = tree.vertex_count();
    let mut dsu_size = t;
    let mut pieces = Vec::with_capacity(m);
    for e in 0..m {
        let edge = tree.edge(e);
        let interior: Vec<Length> = lvd
            .edge_list(e)
            .breakpoints
            .iter()
            .map(|b| b.offset)
            .filter(|&o| o > Length::ZERO && o < edge.weight)
            .collect();
        pieces.push((dsu_size, interior.clone()));
        dsu_size += 2 * interior.len() + 1;
    }
    let mut dsu = Dsu::new(dsu_size);
    let mut vertex_answer = vec![None; t];
    for (e, (base, interior)) in pieces.iter().enumerate() {
        let edge = tree.edge(e);
        let ends = [lvd.query_index(e, Length::ZERO)?, lvd.query_index(e, edge.weight)?];
        for (v, a) in [edge.u, edge.v].into_iter().zip(ends) {
            match vertex_answer[v] {
                None => vertex_answer[v] = Some(a),
                Some(b) if b != a => {
                    return Err(Error::InvalidArgument(format!("inconsistent answers at vertex {v}")))
                }
                _ => {}
            }
        }
        // node, answer of each piece in offset order
        let mut seq = vec![(edge.u, ends[0])];
        let mut node = *base;
        let mut left = Length::ZERO;
        for &o in interior {
            seq.push((node, lvd.after_index(e, left)?));
            seq.push((node + 1, lvd.query_index(e, o)?));
            node += 2;
            left = o;
        }
        seq.push((node, lvd.after_index(e, left)?));
        seq.push((edge.v, ends[1]));
        for w in seq.windows(2) {
            if w[0].1 == w[1].1 {
                dsu.union(w[0].0, w[1].0);
            }
        }
    }
    let cell_count = (0..dsu_size).filter(|&x| dsu.find(x) == x).count();

    let mut critical = Vec::new();
    let mut shallow = vec![0u64; n.max(1)];
    for c in centers {
        let deg = c.degree();
        if (c.depth as usize) < shallow.len() {
            shallow[c.depth as usize] += deg as u64;
        }
        let (at, adjacent) = match c.location {
            Location::EdgePoint { edge, offset } => (
                lvd.query_index(edge, offset)?,
                vec![lvd.before_index(edge, offset)?, lvd.after_index(edge, offset)?],
            ),
            Location::Vertex(v) => {
                let mut adj = Vec::new();
                for &(_, e) in tree.neighbors(v) {
                    let edge = tree.edge(e);
                    adj.push(if v == edge.u {
                        lvd.after_index(e, Length::ZERO)?
                    } else {
                        lvd.before_index(e, edge.weight)?
                    });
                }
                let at = vertex_answer[v].ok_or_else(|| Error::InvalidArgument("isolated center".into()))?;
                (at, adj)
            }
        };
        let answer = lvd.answer(at);
        let on_boundary = adjacent.iter().any(|&a| a != at);
        let involved_in_answer = c
            .involved()
            .iter()
            .any(|&i| inst.points().get(i as usize).is_some_and(|p| answer.contains(&p.id)));
        if on_boundary && involved_in_answer {
            critical.push(CriticalCenter {
                location: c.location,
                diameter: c.diameter,
                degree: deg,
            });
        }
    }
    for d in 1..shallow.len() {
        shallow[d] += shallow[d - 1];
    }
    Ok(DiagramStats {
        cell_count,
        xi: critical.iter().map(|c| c.degree).sum(),
        critical,
        center_count: centers.len(),
        shallow_degree_sums: shallow,
        involved_counts: centers.iter().map(|c| c.involved_count()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::super::build_lvd;
    use crate::length::Length;
    use crate::tree_space::{parse_instance, Location};

    #[test]
    fn instance_a_statistics() {
        let a = parse_instance(
            "tree 3\nedge 0 1 3\nedge 1 2 4\npoints 3\npoint 0 v 0 0.5\npoint 1 v 1 0.5\npoint 2 v 2 1.0\n",
        )
        .unwrap();
        let (_, s) = build_lvd(&a, 1).unwrap();
        let len = |x| Length::from_input(x).unwrap();
        let crit: Vec<_> = s.critical.iter().map(|c| c.location).collect();
        assert_eq!(
            crit,
            vec![
                Location::EdgePoint { edge: 0, offset: len(1.5) },
                Location::EdgePoint { edge: 1, offset: len(2.0) },
            ]
        );
        assert_eq!(s.xi, 4);
        assert_eq!(s.cell_count, 3);
        assert_eq!(s.center_count, 3);
        assert_eq!(s.shallow_degree_sum(2), 6);
        assert_eq!(s.shallow_degree_sum(1), 4);
        assert_eq!(s.involved_counts, vec![2, 2, 2]);
    }
}
