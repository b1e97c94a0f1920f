//! Diagonal covers and the principal l-health of a multiset.
//!
//! A diagonal is a downward path ending at a leaf; a diagonal cover splits
//! all `2k - 1` vertices into `k` disjoint diagonals. A subset decodes iff
//! some cover has a present vertex on every diagonal.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

use crate::combinatorics::binomial;
use crate::tree::{Multiset, Subset, TreeShape, VertexId};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Diagonal {
    /// Vertices from the top of the diagonal down to its leaf.
    pub vertices: Vec<VertexId>,
    /// Total multiset weight of the vertices.
    pub weight: u64,
}

impl Diagonal {
    pub fn leaf(&self) -> VertexId {
        *self.vertices.last().expect("a diagonal is never empty")
    }

    pub fn top(&self) -> VertexId {
        self.vertices[0]
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }
}

/// `k` diagonals partitioning the tree, ordered by leaf index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DiagonalCover {
    pub diagonals: Vec<Diagonal>,
}

impl DiagonalCover {
    /// Builds a cover from each vertex's diagonal label, where label `j`
    /// (0-based) is the diagonal ending at leaf `j + 1`. `owner` is indexed by heap id.
    pub(crate) fn from_owner(
        shape: TreeShape,
        owner: &[usize],
        weights: &dyn Fn(usize) -> u64,
    ) -> Self {
        let k = shape.leaves();
        let mut diagonals: Vec<Diagonal> = (0..k)
            .map(|_| Diagonal {
                vertices: Vec::new(),
                weight: 0,
            })
            .collect();
        // Root first, so each diagonal lists top to bottom.
        for h in 1..=shape.vertex_count() {
            let g = &mut diagonals[owner[h]];
            g.vertices.push(shape.vertex(h));
            g.weight += weights(h);
        }
        DiagonalCover { diagonals }
    }

    /// Builds the cover in which every non-leaf vertex joins the diagonal of
    /// its mate child; `left_mate[h]` is true when heap id `h` follows its left child.
    pub fn from_mates(shape: TreeShape, left_mate: &[bool], ms: Option<&Multiset>) -> Self {
        let m = shape.vertex_count();
        let mut owner = vec![0usize; m + 1];
        let first = shape.first_leaf();
        for h in (1..=m).rev() {
            owner[h] = if shape.is_leaf_heap(h) {
                h - first
            } else if left_mate[h] {
                owner[2 * h]
            } else {
                owner[2 * h + 1]
            };
        }
        let w = |h: usize| ms.map_or(0, |ms| ms.weight_heap(h));
        DiagonalCover::from_owner(shape, &owner, &w)
    }

    /// Diagonal weights `w_1..w_k`.
    pub fn weight_profile(&self) -> Vec<u64> {
        self.diagonals.iter().map(|g| g.weight).collect()
    }

    /// Diagonal sizes, sorted descending.
    pub fn size_profile(&self) -> Vec<usize> {
        let mut sizes: Vec<usize> = self.diagonals.iter().map(Diagonal::len).collect();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        sizes
    }

    /// True when the diagonals are disjoint downward paths covering `shape`,
    /// each ending at a distinct leaf.
    pub fn is_valid(&self, shape: TreeShape) -> bool {
        let mut seen = vec![false; shape.vertex_count() + 1];
        if self.diagonals.len() != shape.leaves() {
            return false;
        }
        for g in &self.diagonals {
            if g.is_empty() || g.leaf().layer != 1 {
                return false;
            }
            for pair in g.vertices.windows(2) {
                if shape.parent(pair[1]) != Some(pair[0]) {
                    return false;
                }
            }
            for &v in &g.vertices {
                if !shape.contains(v) {
                    return false;
                }
                let h = shape.heap_id(v);
                if std::mem::replace(&mut seen[h], true) {
                    return false;
                }
            }
        }
        seen[1..].iter().all(|&s| s)
    }
}

/// Expected diagonal sizes: one of size `d` and `2^(d-i-1)` of size `i` for `i < d`.
pub fn expected_size_profile(shape: TreeShape) -> Vec<usize> {
    let d = shape.layers() as usize;
    let mut sizes = vec![d];
    for i in (1..d).rev() {
        sizes.extend(std::iter::repeat_n(i, 1 << (d - i - 1)));
    }
    sizes
}

/// Cover certifying decodability: each leaf's diagonal runs up to its lowest
/// present ancestor, then diagonals are extended upward to absorb the rest.
/// Returns `None` when no such cover exists.
pub fn decoding_cover(subset: &Subset) -> Option<DiagonalCover> {
    let shape = subset.shape();
    let m = shape.vertex_count();
    const FREE: usize = usize::MAX;
    let mut owner = vec![FREE; m + 1];
    let first = shape.first_leaf();
    for leaf in shape.layer_heaps(1) {
        let label = leaf - first;
        let mut h = leaf;
        loop {
            if owner[h] != FREE {
                return None;
            }
            owner[h] = label;
            if subset.contains_heap(h) {
                break;
            }
            if h == 1 {
                // Missing-vertex path from a leaf to the root.
                return None;
            }
            h /= 2;
        }
    }
    for h in (1..first).rev() {
        if owner[h] == FREE {
            // The left child tops its diagonal, since h is still unassigned.
            owner[h] = owner[2 * h];
        }
    }
    let w = |h: usize| u64::from(subset.contains_heap(h));
    Some(DiagonalCover::from_owner(shape, &owner, &w))
}

/// Decodability through the diagonal-cover characterisation.
pub fn decodable_via_cover(subset: &Subset) -> bool {
    decoding_cover(subset).is_some()
}

/// Principal diagonal cover: diagonals grow upward and every vertex joins the
/// lighter of its two children's diagonals (the right one on ties).
pub fn principal_cover(ms: &Multiset) -> DiagonalCover {
    let shape = ms.shape();
    let m = shape.vertex_count();
    let first = shape.first_leaf();
    let mut owner = vec![0usize; m + 1];
    let mut diag_weight = vec![0u64; shape.leaves()];
    for leaf in shape.layer_heaps(1) {
        owner[leaf] = leaf - first;
        diag_weight[leaf - first] = ms.weight_heap(leaf);
    }
    for layer in 2..=shape.layers() {
        for h in shape.layer_heaps(layer) {
            let y = owner[2 * h];
            let z = owner[2 * h + 1];
            let g = if diag_weight[y] < diag_weight[z] {
                y
            } else {
                z
            };
            owner[h] = g;
            diag_weight[g] += ms.weight_heap(h);
        }
    }
    let w = |h: usize| ms.weight_heap(h);
    DiagonalCover::from_owner(shape, &owner, &w)
}

/// Exact average, over the diagonals, of the probability that a diagonal
/// keeps non-zero weight after `l` uniformly chosen elements (without
/// replacement) are lost from a multiset of weight `n`.
pub fn cover_survival_ratio(profile: &[u64], n: u64, l: u64) -> Result<BigRational> {
    if l > n {
        return Err(Error::InvalidLoss { l, n });
    }
    let k = profile.len() as u64;
    if k == 0 {
        return Err(Error::invalid("empty weight profile"));
    }
    // Each diagonal empties with probability C(n - w, l - w) / C(n, l).
    let emptied: BigUint = profile
        .iter()
        .filter(|&&w| w <= l)
        .map(|&w| binomial(n - w, l - w))
        .sum();
    let total = binomial(n, l) * k;
    let lost = BigRational::new(BigInt::from(emptied), BigInt::from(total));
    Ok(BigRational::from_integer(1.into()) - lost)
}

pub fn cover_survival_prob(profile: &[u64], n: u64, l: u64) -> Result<f64> {
    Ok(cover_survival_ratio(profile, n, l)?
        .to_f64()
        .unwrap_or(f64::NAN))
}

/// Principal l-health of `ms`.
pub fn principal_l_health(ms: &Multiset, l: u64) -> Result<f64> {
    let cover = principal_cover(ms);
    cover_survival_prob(&cover.weight_profile(), ms.total(), l)
}

/// Objective minimised by principal covers: `sum_j C(n - w_j, l - w_j)`.
pub fn emptying_count(profile: &[u64], n: u64, l: u64) -> BigUint {
    profile
        .iter()
        .filter(|&&w| w <= l)
        .map(|&w| binomial(n - w, l - w))
        .fold(BigUint::zero(), |acc, x| acc + x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ms(rows: &[&[u64]]) -> Multiset {
        Multiset::from_layers(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn cover_decodability_examples() {
        let shape = TreeShape::new(2).unwrap();
        let both = Subset::from_vertices(shape, [VertexId::leaf(1), VertexId::leaf(2)]).unwrap();
        assert!(decodable_via_cover(&both));
        let root = Subset::from_vertices(shape, [shape.root()]).unwrap();
        assert!(!decodable_via_cover(&root));
        let cover = decoding_cover(&both).unwrap();
        assert!(cover.is_valid(shape));
        assert!(cover.weight_profile().iter().all(|&w| w > 0));
    }

    #[test]
    fn principal_cover_two_leaves() {
        let m = ms(&[&[1, 3], &[2]]);
        let cover = principal_cover(&m);
        assert_eq!(
            cover.diagonals[0].vertices,
            vec![VertexId::new(2, 1), VertexId::leaf(1)]
        );
        assert_eq!(cover.diagonals[1].vertices, vec![VertexId::leaf(2)]);
        assert_eq!(cover.weight_profile(), vec![3, 3]);
        assert_eq!(principal_l_health(&m, 2).unwrap(), 1.0);
    }

    #[test]
    fn ties_go_right() {
        let m = ms(&[&[2, 2], &[1]]);
        let cover = principal_cover(&m);
        assert_eq!(
            cover.diagonals[1].vertices,
            vec![VertexId::new(2, 1), VertexId::leaf(2)]
        );
    }

    #[test]
    fn zero_weights_still_produce_a_cover() {
        let shape = TreeShape::new(4).unwrap();
        let cover = principal_cover(&Multiset::empty(shape));
        assert!(cover.is_valid(shape));
        assert!(cover.weight_profile().iter().all(|&w| w == 0));
        assert_eq!(cover.size_profile(), expected_size_profile(shape));
    }

    #[test]
    fn survival_examples() {
        assert_eq!(cover_survival_prob(&[2, 1], 3, 0).unwrap(), 1.0);
        let r = cover_survival_ratio(&[2, 1], 3, 1).unwrap();
        assert_eq!(r, BigRational::new(5.into(), 6.into()));
        assert_eq!(cover_survival_prob(&[2, 1], 3, 3).unwrap(), 0.0);
        assert!(matches!(
            cover_survival_prob(&[2, 1], 3, 4),
            Err(Error::InvalidLoss { l: 4, n: 3 })
        ));
    }

    #[test]
    fn size_profile_formula() {
        let shape = TreeShape::new(4).unwrap();
        assert_eq!(expected_size_profile(shape), vec![4, 3, 2, 2, 1, 1, 1, 1]);
    }
}
