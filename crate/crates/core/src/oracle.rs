//! Brute-force reference implementations used to check the fast paths.
//!
//! Everything here is exponential in the tree size and meant for small trees
//! only (at most 7 layers, usually far fewer).

use std::collections::HashMap;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::Zero;

use crate::health::{cover_survival_ratio, DiagonalCover};
use crate::nonuniform::{decode_prob_q, LayerProbs, SelectionDistribution};
use crate::recovery::plan_recovery;
use crate::tree::{Multiset, Subset, TreeShape, VertexId};
use crate::{Error, Result};

/// `[S(n,0), ..., S(n,n)]` by enumerating restricted-growth strings.
pub fn set_partition_counts(n: usize) -> Vec<u64> {
    let mut counts = vec![0u64; n + 1];
    fn walk(pos: usize, n: usize, blocks: usize, counts: &mut [u64]) {
        if pos == n {
            counts[blocks] += 1;
            return;
        }
        for b in 0..=blocks {
            walk(pos + 1, n, blocks.max(b + 1), counts);
        }
    }
    walk(0, n, 0, &mut counts);
    counts
}

/// Generator row of heap id `h` as a bitmask over the `k` data fragments.
pub fn generator_row(shape: TreeShape, heap: usize) -> u64 {
    assert!(
        shape.leaves() <= 64,
        "generator rows are limited to 64 leaves"
    );
    let (lo, hi) = shape.leaf_span(shape.vertex(heap));
    let width = hi - lo + 1;
    let ones = if width == 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    };
    ones << (lo - 1)
}

/// GF(2) rank of a set of bit rows.
pub fn gf2_rank(rows: impl IntoIterator<Item = u64>) -> usize {
    let mut basis = [0u64; 64];
    let mut rank = 0;
    for mut row in rows {
        while row != 0 {
            let top = 63 - row.leading_zeros() as usize;
            if basis[top] == 0 {
                basis[top] = row;
                rank += 1;
                break;
            }
            row ^= basis[top];
        }
    }
    rank
}

/// Decodability by Gaussian elimination of the selected generator rows.
pub fn rank_oracle_decodable(subset: &Subset) -> bool {
    let shape = subset.shape();
    let rows = (1..=shape.vertex_count())
        .filter(|&h| subset.contains_heap(h))
        .map(|h| generator_row(shape, h));
    gf2_rank(rows) == shape.leaves()
}

/// Decodable subsets of each size, counted exhaustively.
pub fn decodable_counts_by_size(d: u32) -> Vec<u64> {
    let shape = TreeShape::new(d).unwrap();
    let m = shape.vertex_count();
    assert!(m <= 31, "exhaustive enumeration limited to 5 layers");
    let mut counts = vec![0u64; m + 1];
    for mask in 0u64..(1 << m) {
        if rank_oracle_decodable(&Subset::from_mask(shape, mask)) {
            counts[mask.count_ones() as usize] += 1;
        }
    }
    counts
}

/// Exact probability that `n` ordered uniform draws over all vertices have a
/// decodable support, by enumerating every draw sequence.
pub fn uniform_draw_probability(d: u32, n: u64) -> BigRational {
    let shape = TreeShape::new(d).unwrap();
    let m = shape.vertex_count();
    let mut cache: HashMap<u64, bool> = HashMap::new();
    let mut seq = vec![0usize; n as usize];
    let mut hits = BigUint::zero();
    let mut total = BigUint::zero();
    loop {
        let mask = seq.iter().fold(0u64, |acc, &v| acc | (1 << v));
        let ok = *cache
            .entry(mask)
            .or_insert_with(|| rank_oracle_decodable(&Subset::from_mask(shape, mask)));
        total += 1u32;
        if ok {
            hits += 1u32;
        }
        // Odometer increment.
        let mut pos = 0;
        while pos < seq.len() {
            seq[pos] += 1;
            if seq[pos] < m {
                break;
            }
            seq[pos] = 0;
            pos += 1;
        }
        if pos == seq.len() {
            break;
        }
    }
    BigRational::new(BigInt::from(hits), BigInt::from(total))
}

/// Probability of a presence pattern under independent per-layer inclusion.
fn pattern_weight(shape: TreeShape, p: &LayerProbs, mask: u64, skip: &[usize]) -> f64 {
    (1..=shape.vertex_count())
        .filter(|h| !skip.contains(h))
        .map(|h| {
            let pi = p.get(shape.heap_layer(h));
            if mask >> (h - 1) & 1 == 1 {
                pi
            } else {
                1.0 - pi
            }
        })
        .product()
}

fn patterns(p: &LayerProbs) -> (TreeShape, impl Iterator<Item = (Subset, f64)> + '_) {
    let shape = TreeShape::new(p.layers()).unwrap();
    let m = shape.vertex_count();
    assert!(m <= 20, "pattern enumeration limited to 4 layers");
    let iter = (0u64..(1 << m)).map(move |mask| {
        (
            Subset::from_mask(shape, mask),
            pattern_weight(shape, p, mask, &[]),
        )
    });
    (shape, iter)
}

/// `Q_d` as a sum over all presence patterns with a decodable support.
pub fn bernoulli_decode_prob(p: &LayerProbs) -> f64 {
    let (_, iter) = patterns(p);
    iter.filter(|(s, _)| rank_oracle_decodable(s))
        .map(|(_, w)| w)
        .sum()
}

/// Probability that the tree does not decode alone but does once its root is supplied.
pub fn bernoulli_needs_root_prob(p: &LayerProbs) -> f64 {
    let (shape, iter) = patterns(p);
    iter.filter(|(s, _)| {
        let mut with_root = s.clone();
        with_root.insert(shape.root());
        !rank_oracle_decodable(s) && rank_oracle_decodable(&with_root)
    })
    .map(|(_, w)| w)
    .sum()
}

/// Present vertices with no present ancestor.
fn top_count(s: &Subset) -> usize {
    let shape = s.shape();
    (1..=shape.vertex_count())
        .filter(|&h| s.contains_heap(h))
        .filter(|&h| {
            let mut a = h / 2;
            while a >= 1 {
                if s.contains_heap(a) {
                    return false;
                }
                a /= 2;
            }
            true
        })
        .count()
}

/// `Pr[decodable and N present vertices with no present ancestor]` for `N = 0..=k`.
pub fn bernoulli_top_count_dist(p: &LayerProbs) -> Vec<f64> {
    let (shape, iter) = patterns(p);
    let mut dist = vec![0.0; shape.leaves() + 1];
    for (s, w) in iter {
        if rank_oracle_decodable(&s) {
            dist[top_count(&s)] += w;
        }
    }
    dist
}

/// `Pr[decodable and leaf (1,1) costs N fragments]` for `N = 0..k-1`.
pub fn bernoulli_leaf_cost_dist(p: &LayerProbs) -> Vec<f64> {
    let (shape, iter) = patterns(p);
    let mut dist = vec![0.0; shape.leaves()];
    for (s, w) in iter {
        if let Ok(plan) = plan_recovery(&s) {
            dist[plan.cost_for_leaf(VertexId::leaf(1))] += w;
        }
    }
    dist
}

/// Leaf (1,1) cost distribution, jointly with decodability, conditioned on the
/// root being present and every vertex strictly between the root and that
/// leaf, and the leaf itself, being missing.
pub fn bernoulli_root_recovery_cost_dist(p: &LayerProbs) -> Vec<f64> {
    let shape = TreeShape::new(p.layers()).unwrap();
    assert!(shape.layers() >= 2);
    let m = shape.vertex_count();
    // Left spine below the root: heap ids 2, 4, 8, ..., first_leaf.
    let spine: Vec<usize> = std::iter::successors(Some(2usize), |&h| Some(2 * h))
        .take_while(|&h| h <= m)
        .collect();
    let mut fixed = spine.clone();
    fixed.push(1);
    let mut dist = vec![0.0; shape.leaves()];
    for mask in 0u64..(1 << m) {
        if mask & 1 == 0 || spine.iter().any(|&h| mask >> (h - 1) & 1 == 1) {
            continue;
        }
        let s = Subset::from_mask(shape, mask);
        if let Ok(plan) = plan_recovery(&s) {
            dist[plan.cost_for_leaf(VertexId::leaf(1))] += pattern_weight(shape, p, mask, &fixed);
        }
    }
    dist
}

/// Highest `Q_d` over every composition of `n` into `d` per-layer counts.
pub fn best_composition(d: u32, n: u64) -> f64 {
    fn walk(counts: &mut Vec<u64>, d: usize, left: u64, best: &mut f64) {
        if counts.len() + 1 == d {
            counts.push(left);
            let q = decode_prob_q(&SelectionDistribution::new(counts.clone()).unwrap().probs());
            *best = best.max(q);
            counts.pop();
            return;
        }
        for c in 0..=left {
            counts.push(c);
            walk(counts, d, left - c, best);
            counts.pop();
        }
    }
    let mut best = 0.0;
    walk(&mut Vec::new(), d as usize, n, &mut best);
    best
}

/// Minimum total transfers over all ways to pick `k` distinct present
/// vertices, one per data fragment, where a vertex recovers its fragment by
/// XORing its own fragment with fragments received from other present vertices.
pub fn min_cost_bruteforce(subset: &Subset) -> Result<usize> {
    let shape = subset.shape();
    if shape.layers() > 4 {
        return Err(Error::invalid("brute-force cost limited to 4 layers"));
    }
    let present: Vec<usize> = (1..=shape.vertex_count())
        .filter(|&h| subset.contains_heap(h))
        .collect();
    let rows: Vec<u64> = present.iter().map(|&h| generator_row(shape, h)).collect();
    let np = present.len();
    // Smallest subset of present vertices reaching each XOR value, per excluded vertex.
    let mut sums = vec![0u64; 1 << np];
    for mask in 1usize..(1 << np) {
        let low = mask.trailing_zeros() as usize;
        sums[mask] = sums[mask & (mask - 1)] ^ rows[low];
    }
    let k = shape.leaves();
    const NONE: usize = usize::MAX;
    // cost[x][y]: transfers vertex x needs to recover leaf y.
    let mut cost = vec![vec![NONE; k]; np];
    for (x, row) in cost.iter_mut().enumerate() {
        for mask in 0usize..(1 << np) {
            if mask >> x & 1 == 1 {
                continue;
            }
            let target = sums[mask] ^ rows[x];
            if target.count_ones() == 1 {
                let y = target.trailing_zeros() as usize;
                row[y] = row[y].min(mask.count_ones() as usize);
            }
        }
    }
    // Assign leaves in order to distinct recovering vertices.
    let mut best = vec![NONE; 1 << np];
    best[0] = 0;
    for y in 0..k {
        let mut next = vec![NONE; 1 << np];
        for used in 0usize..(1 << np) {
            if best[used] == NONE || used.count_ones() as usize != y {
                continue;
            }
            for (x, row) in cost.iter().enumerate() {
                if used >> x & 1 == 0 && row[y] != NONE {
                    let slot = &mut next[used | 1 << x];
                    *slot = (*slot).min(best[used] + row[y]);
                }
            }
        }
        best = next;
    }
    best.into_iter()
        .min()
        .filter(|&c| c != NONE)
        .ok_or(Error::NonDecodable)
}

/// Every diagonal cover of `shape`, one per choice of mate child at each non-leaf vertex.
pub fn all_covers(shape: TreeShape, ms: Option<&Multiset>) -> Vec<DiagonalCover> {
    let internal = shape.first_leaf() - 1;
    assert!(internal <= 20, "cover enumeration limited to 5 layers");
    (0u64..(1 << internal))
        .map(|choice| {
            let mut left = vec![false; shape.vertex_count() + 1];
            for (h, slot) in left.iter_mut().enumerate().take(internal + 1).skip(1) {
                *slot = choice >> (h - 1) & 1 == 1;
            }
            DiagonalCover::from_mates(shape, &left, ms)
        })
        .collect()
}

/// Largest survival average over every diagonal cover of `ms`.
pub fn best_cover_survival(ms: &Multiset, l: u64) -> Result<BigRational> {
    let mut best: Option<BigRational> = None;
    for cover in all_covers(ms.shape(), Some(ms)) {
        let r = cover_survival_ratio(&cover.weight_profile(), ms.total(), l)?;
        if best.as_ref().is_none_or(|b| r > *b) {
            best = Some(r);
        }
    }
    Ok(best.expect("a tree has at least one cover"))
}

/// Calls `f` with every `l`-subset of `0..n`, as a sorted index list.
pub fn for_each_combination(n: usize, l: usize, mut f: impl FnMut(&[usize])) {
    if l > n {
        return;
    }
    let mut idx: Vec<usize> = (0..l).collect();
    loop {
        f(&idx);
        let Some(i) = (0..l).rev().find(|&i| idx[i] != i + n - l) else {
            return;
        };
        idx[i] += 1;
        for j in i + 1..l {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Average fraction of diagonals left non-empty after losing `l` of the `n`
/// labelled elements, enumerating every loss set. Element `e` belongs to the
/// diagonal whose cumulative weight range contains it.
pub fn cover_survival_by_enumeration(profile: &[u64], l: u64) -> BigRational {
    let owner: Vec<usize> = profile
        .iter()
        .enumerate()
        .flat_map(|(j, &w)| std::iter::repeat_n(j, w as usize))
        .collect();
    let n = owner.len();
    let k = profile.len();
    let mut alive_total = 0u64;
    let mut sets = 0u64;
    for_each_combination(n, l as usize, |lost| {
        let mut left = profile.to_vec();
        for &e in lost {
            left[owner[e]] -= 1;
        }
        alive_total += left.iter().filter(|&&w| w > 0).count() as u64;
        sets += 1;
    });
    BigRational::new(BigInt::from(alive_total), BigInt::from(sets * k as u64))
}

/// Probability that the support stays decodable after losing `l` uniformly
/// chosen elements, enumerating every loss set.
pub fn survival_by_enumeration(ms: &Multiset, l: u64) -> BigRational {
    let shape = ms.shape();
    let elements: Vec<usize> = (1..=shape.vertex_count())
        .flat_map(|h| std::iter::repeat_n(h, ms.weight_heap(h) as usize))
        .collect();
    let mut ok = 0u64;
    let mut sets = 0u64;
    for_each_combination(elements.len(), l as usize, |lost| {
        let mut left = vec![0u64; shape.vertex_count() + 1];
        for &h in &elements {
            left[h] += 1;
        }
        for &e in lost {
            left[elements[e]] -= 1;
        }
        let mask = (1..=shape.vertex_count())
            .filter(|&h| left[h] > 0)
            .fold(0u64, |acc, h| acc | 1 << (h - 1));
        if rank_oracle_decodable(&Subset::from_mask(shape, mask)) {
            ok += 1;
        }
        sets += 1;
    });
    if sets == 0 {
        return BigRational::zero();
    }
    BigRational::new(BigInt::from(ok), BigInt::from(sets))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_counts() {
        assert_eq!(set_partition_counts(0), vec![1]);
        assert_eq!(set_partition_counts(4), vec![0, 1, 7, 6, 1]);
    }

    #[test]
    fn generator_rows() {
        let shape = TreeShape::new(3).unwrap();
        assert_eq!(generator_row(shape, 1), 0b1111);
        assert_eq!(generator_row(shape, 3), 0b1100);
        assert_eq!(generator_row(shape, 4), 0b0001);
        assert_eq!(gf2_rank([0b11, 0b01, 0b10]), 2);
    }

    #[test]
    fn rank_oracle_example() {
        let shape = TreeShape::new(3).unwrap();
        let s = Subset::from_vertices(
            shape,
            [
                VertexId::new(2, 1),
                VertexId::new(2, 2),
                VertexId::leaf(1),
                VertexId::leaf(3),
            ],
        )
        .unwrap();
        assert!(rank_oracle_decodable(&s));
    }

    #[test]
    fn brute_force_cost_examples() {
        let shape = TreeShape::new(2).unwrap();
        let s = Subset::from_vertices(shape, [shape.root(), VertexId::leaf(1)]).unwrap();
        assert_eq!(min_cost_bruteforce(&s).unwrap(), 1);
        assert_eq!(min_cost_bruteforce(&Subset::full(shape)).unwrap(), 0);
        let root = Subset::from_vertices(shape, [shape.root()]).unwrap();
        assert!(matches!(
            min_cost_bruteforce(&root),
            Err(Error::NonDecodable)
        ));
    }

    #[test]
    fn combinations() {
        let mut seen = Vec::new();
        for_each_combination(4, 2, |c| seen.push(c.to_vec()));
        assert_eq!(seen.len(), 6);
        assert_eq!(seen[0], vec![0, 1]);
        assert_eq!(seen[5], vec![2, 3]);
        let mut empty = 0;
        for_each_combination(3, 0, |_| empty += 1);
        assert_eq!(empty, 1);
    }

    #[test]
    fn cover_count() {
        let shape = TreeShape::new(3).unwrap();
        let covers = all_covers(shape, None);
        assert_eq!(covers.len(), 8);
        assert!(covers.iter().all(|c| c.is_valid(shape)));
    }
}
