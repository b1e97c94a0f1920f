//! Minimal-communication distributed recovery.
//!
//! Every missing data leaf is recovered by the lowest present vertex above it
//! whose downward missing-vertex path reaches the leaf. That vertex receives
//! the fragment of every first present vertex found on its other downward
//! paths and XORs them with its own fragment. Present leaves recover locally.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::tree::{Subset, TreeShape, VertexId};
use crate::{Error, Result};

/// One fragment sent from `from` (a present vertex) to the recovering vertex `to`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Transfer {
    pub from: VertexId,
    pub to: VertexId,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RecoverySchedule {
    /// Missing leaf → vertex recovering it.
    pub assignments: BTreeMap<VertexId, VertexId>,
    /// Fragment transfers, grouped by recovering vertex in processing order.
    pub transfers: Vec<Transfer>,
    /// Present non-leaf vertices that recover nothing and can be released.
    pub discarded: Vec<VertexId>,
}

impl RecoverySchedule {
    /// Total number of communicated fragments.
    pub fn total_cost(&self) -> usize {
        self.transfers.len()
    }

    /// Fragments communicated to the vertex recovering `leaf` (0 when local).
    pub fn cost_for_leaf(&self, leaf: VertexId) -> usize {
        match self.assignments.get(&leaf) {
            Some(x) => self.transfers.iter().filter(|t| t.to == *x).count(),
            None => 0,
        }
    }
}

/// Result of walking every downward path from a present vertex.
struct Sweep {
    /// First present vertices reached (heap ids), left paths first.
    frontier: Vec<usize>,
    /// Missing leaves reached (heap ids).
    missing_leaves: Vec<usize>,
}

fn sweep_below(subset: &Subset, shape: TreeShape, heap: usize, out: &mut Sweep) {
    let mut stack = vec![2 * heap + 1, 2 * heap];
    while let Some(h) = stack.pop() {
        if subset.contains_heap(h) {
            out.frontier.push(h);
        } else if shape.is_leaf_heap(h) {
            out.missing_leaves.push(h);
        } else {
            stack.push(2 * h + 1);
            stack.push(2 * h);
        }
    }
}

/// Plans the minimal-communication recovery of every missing data leaf.
///
/// Present vertices are processed in (layer ascending, index ascending)
/// order; inside a vertex the left path is walked before the right one.
/// Fails with [`Error::NonDecodable`] when fewer vertices recover than there
/// are missing leaves.
pub fn plan_recovery(subset: &Subset) -> Result<RecoverySchedule> {
    let shape = subset.shape();
    let missing = shape
        .layer_heaps(1)
        .filter(|&h| !subset.contains_heap(h))
        .count();
    let mut schedule = RecoverySchedule::default();
    let mut recovering = 0usize;
    for layer in 2..=shape.layers() {
        for x in shape.layer_heaps(layer) {
            if !subset.contains_heap(x) {
                continue;
            }
            let mut sweep = Sweep {
                frontier: Vec::new(),
                missing_leaves: Vec::new(),
            };
            sweep_below(subset, shape, x, &mut sweep);
            let xv = shape.vertex(x);
            match sweep.missing_leaves.as_slice() {
                [] => schedule.discarded.push(xv),
                [leaf] => {
                    recovering += 1;
                    schedule.assignments.insert(shape.vertex(*leaf), xv);
                    schedule
                        .transfers
                        .extend(sweep.frontier.iter().map(|&z| Transfer {
                            from: shape.vertex(z),
                            to: xv,
                        }));
                }
                // Recovers at most one of them, so the count below falls short.
                _ => recovering += 1,
            }
        }
    }
    if recovering < missing {
        return Err(Error::NonDecodable);
    }
    Ok(schedule)
}

/// Total communication cost of the minimal schedule, or `None` when the
/// subset is not decodable. Allocation-light variant of [`plan_recovery`].
pub fn recovery_cost(subset: &Subset) -> Option<usize> {
    let shape = subset.shape();
    let mut cost = 0usize;
    let mut stack = Vec::with_capacity(shape.layers() as usize * 2);
    // Every missing leaf must be reached exactly once, by its lowest present ancestor.
    let mut reached = 0usize;
    let mut missing = 0usize;
    for h in shape.layer_heaps(1) {
        if !subset.contains_heap(h) {
            missing += 1;
        }
    }
    if missing == 0 {
        return Some(0);
    }
    for x in (1..shape.first_leaf()).rev() {
        if !subset.contains_heap(x) {
            continue;
        }
        let mut leaves = 0usize;
        let mut tops = 0usize;
        stack.clear();
        stack.push(2 * x);
        stack.push(2 * x + 1);
        while let Some(h) = stack.pop() {
            if subset.contains_heap(h) {
                tops += 1;
            } else if shape.is_leaf_heap(h) {
                leaves += 1;
            } else {
                stack.push(2 * h);
                stack.push(2 * h + 1);
            }
        }
        match leaves {
            0 => {}
            1 => {
                reached += 1;
                cost += tops;
            }
            _ => return None,
        }
    }
    (reached == missing).then_some(cost)
}

/// Communication cost for recovering the data fragment at `leaf`, or `None`
/// when the subset is not decodable.
pub fn leaf_cost(subset: &Subset, leaf: VertexId) -> Option<usize> {
    let shape = subset.shape();
    if !crate::tree::is_decodable(subset) {
        return None;
    }
    let mut h = shape.heap_id(leaf);
    if subset.contains_heap(h) {
        return Some(0);
    }
    while !subset.contains_heap(h) {
        h /= 2;
    }
    let mut sweep = Sweep {
        frontier: Vec::new(),
        missing_leaves: Vec::new(),
    };
    sweep_below(subset, shape, h, &mut sweep);
    Some(sweep.frontier.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn subset(d: u32, vs: &[(u32, u32)]) -> Subset {
        let shape = TreeShape::new(d).unwrap();
        Subset::from_vertices(shape, vs.iter().map(|&(l, i)| VertexId::new(l, i))).unwrap()
    }

    #[test]
    fn all_leaves_present_costs_nothing() {
        let s = plan_recovery(&subset(2, &[(1, 1), (1, 2)])).unwrap();
        assert!(s.assignments.is_empty());
        assert_eq!(s.total_cost(), 0);
    }

    #[test]
    fn root_recovers_right_leaf() {
        let s = plan_recovery(&subset(2, &[(2, 1), (1, 1)])).unwrap();
        assert_eq!(s.assignments[&VertexId::leaf(2)], VertexId::new(2, 1));
        assert_eq!(
            s.transfers,
            vec![Transfer {
                from: VertexId::leaf(1),
                to: VertexId::new(2, 1)
            }]
        );
        assert_eq!(s.total_cost(), 1);
    }

    #[test]
    fn redundant_root_is_discarded() {
        let s = plan_recovery(&subset(2, &[(2, 1), (1, 1), (1, 2)])).unwrap();
        assert_eq!(s.total_cost(), 0);
        assert_eq!(s.discarded, vec![VertexId::new(2, 1)]);
    }

    #[test]
    fn worst_case_root_plus_seven_leaves() {
        let mut vs: Vec<(u32, u32)> = (1..=8).filter(|&j| j != 5).map(|j| (1, j)).collect();
        vs.push((4, 1));
        let s = plan_recovery(&subset(4, &vs)).unwrap();
        assert_eq!(s.total_cost(), 7);
        assert_eq!(s.assignments[&VertexId::leaf(5)], VertexId::new(4, 1));
        assert!(s.transfers.iter().all(|t| t.from.layer == 1));
    }

    #[test]
    fn non_decodable_is_detected() {
        assert!(matches!(
            plan_recovery(&subset(2, &[(2, 1)])),
            Err(Error::NonDecodable)
        ));
        // Root present, both layer-2 vertices missing, two leaves missing on one side.
        assert!(plan_recovery(&subset(3, &[(3, 1), (1, 3), (1, 4)])).is_err());
        assert_eq!(recovery_cost(&subset(3, &[(3, 1), (1, 3), (1, 4)])), None);
    }

    #[test]
    fn each_source_uploads_at_most_once() {
        let s = plan_recovery(&subset(3, &[(3, 1), (2, 1), (1, 1), (1, 4)])).unwrap();
        let mut sources: Vec<VertexId> = s.transfers.iter().map(|t| t.from).collect();
        sources.sort();
        sources.dedup();
        assert_eq!(sources.len(), s.transfers.len());
        assert_eq!(
            recovery_cost(&subset(3, &[(3, 1), (2, 1), (1, 1), (1, 4)])),
            Some(s.total_cost())
        );
    }

    #[test]
    fn leaf_cost_matches_schedule() {
        let sub = subset(3, &[(3, 1), (2, 1), (1, 1), (1, 4)]);
        let s = plan_recovery(&sub).unwrap();
        for j in 1..=4 {
            let leaf = VertexId::leaf(j);
            assert_eq!(leaf_cost(&sub, leaf), Some(s.cost_for_leaf(leaf)));
        }
    }
}
