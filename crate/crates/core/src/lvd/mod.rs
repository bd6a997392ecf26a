//! k most-likely nearest-neighbor search through the most-likely Voronoi
//! diagram (LVD) of the tree space.

mod build;
mod centers;
mod format;
mod nnp;
mod stats;

pub use build::{build_lvd, build_lvd_checked, Breakpoint, EdgeList, Lvd};
pub use centers::enumerate_centers;
pub use format::{parse_lvd, serialize_lvd};
pub use nnp::{k_lnn_at, nnp, nnp_by_id, nnp_factors, ranking, LogFactor, NnpKey};
pub use stats::{diagram_stats, CriticalCenter, DiagramStats};

use smallvec::SmallVec;

use crate::length::Length;
use crate::tree_space::{Direction, Instance, Location, PointId};

/// An equivalence class of pair midpoints sharing a location and a common
/// distance (the diameter) to the points involved.
///
/// Involved points are indices into the instance's point list, grouped by
/// branch: the component of the space minus the center that contains them,
/// named by the direction leaving the center toward it. Branches are sorted
/// by direction and points within a branch ascend.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Center {
    pub location: Location,
    pub diameter: Length,
    /// Number of points strictly closer to the location than the diameter.
    pub depth: u32,
    members: SmallVec<[u32; 4]>,
    branches: SmallVec<[(Direction, u32); 2]>,
}

impl Center {
    /// Builds a center from `(direction, point indices)` groups, one per
    /// branch, in any order.
    pub fn new(
        location: Location,
        diameter: Length,
        depth: u32,
        groups: impl IntoIterator<Item = (Direction, Vec<u32>)>,
    ) -> Center {
        let mut groups: Vec<(Direction, Vec<u32>)> = groups.into_iter().collect();
        groups.sort_unstable_by_key(|g| g.0);
        let mut members = SmallVec::new();
        let mut branches = SmallVec::new();
        for (dir, mut pts) in groups {
            pts.sort_unstable();
            members.extend(pts);
            branches.push((dir, members.len() as u32));
        }
        Center {
            location,
            diameter,
            depth,
            members,
            branches,
        }
    }

    pub fn degree(&self) -> usize {
        self.branches.len()
    }

    /// `m_c`: number of involved points.
    pub fn involved_count(&self) -> usize {
        self.members.len()
    }

    /// Involved point indices, grouped by branch.
    pub fn involved(&self) -> &[u32] {
        &self.members
    }

    pub fn branches(&self) -> impl Iterator<Item = (Direction, &[u32])> + '_ {
        let mut start = 0usize;
        self.branches.iter().map(move |&(dir, end)| {
            let s = start;
            start = end as usize;
            (dir, &self.members[s..end as usize])
        })
    }

    /// Involved points of the branch leaving in direction `dir`, if any.
    pub fn branch(&self, dir: Direction) -> Option<&[u32]> {
        self.branches().find(|b| b.0 == dir).map(|b| b.1)
    }

    /// Sorted ids of the involved points.
    pub fn involved_ids(&self, instance: &Instance) -> Vec<PointId> {
        let mut ids: Vec<PointId> = self
            .members
            .iter()
            .map(|&i| instance.points()[i as usize].id)
            .collect();
        ids.sort_unstable();
        ids
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn center_groups_are_canonical() {
        let d = |edge, increasing| Direction { edge, increasing };
        let a = Center::new(
            Location::Vertex(0),
            Length::ZERO,
            0,
            vec![(d(2, true), vec![5, 1]), (d(0, false), vec![3])],
        );
        let b = Center::new(
            Location::Vertex(0),
            Length::ZERO,
            0,
            vec![(d(0, false), vec![3]), (d(2, true), vec![1, 5])],
        );
        assert_eq!(a, b);
        assert_eq!(a.degree(), 2);
        assert_eq!(a.involved(), &[3, 1, 5]);
        assert_eq!(a.branch(d(2, true)), Some(&[1, 5][..]));
        assert_eq!(a.branch(d(1, true)), None);
    }
}
