//! Exact distribution of per-fragment recovery communication cost under the
//! per-layer inclusion model.
//!
//! Three families of tables are built bottom-up over subtree height `i`:
//!
//! - `F_i(N)`: the subtree decodes and has exactly `N` present vertices with no
//!   present ancestor.
//! - `A_i(N)`: the subtree decodes and the fixed leaf costs `N` fragments,
//!   given that the root is present and a missing-vertex path joins one of its
//!   children to that leaf.
//! - `P_i(N)`: the subtree decodes and the fixed leaf costs `N` fragments.
//!
//! By symmetry the fixed leaf is always leaf `(1, 1)`.

use serde::Serialize;

use crate::nonuniform::{decode_probs, LayerProbs};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CostTables {
    p: LayerProbs,
    q: Vec<f64>,
    // Row i-1 holds subtree height i.
    f: Vec<Vec<f64>>,
    a: Vec<Vec<f64>>,
    joint: Vec<Vec<f64>>,
}

fn leaves(d: u32) -> usize {
    1 << (d - 1)
}

/// `F_i(N)` for `i = 1..=d`; row `i-1` has entries `N = 0..=2^(i-1)` (`N = 0` is always 0).
pub fn compute_f(p: &LayerProbs) -> Vec<Vec<f64>> {
    let d = p.layers();
    let q = decode_probs(p).all_q().to_vec();
    let mut f: Vec<Vec<f64>> = Vec::with_capacity(d as usize);
    f.push(vec![0.0, p.get(1)]);
    // prod holds prod_{j<i} (1 - p_j) Q_j.
    let mut prod = 1.0;
    for i in 2..=d {
        prod *= (1.0 - p.get(i - 1)) * q[i as usize - 2];
        let pi = p.get(i);
        let prev = &f[i as usize - 2];
        let width = leaves(i);
        let mut row = vec![0.0; width + 1];
        let q_below = q[i as usize - 2];
        row[1] = pi * (q_below * q_below + (1u64 << (i - 1)) as f64 * prod);
        for n in 2..=width {
            let mut acc = 0.0;
            for l in 1..n {
                if l < prev.len() && n - l < prev.len() {
                    acc += prev[l] * prev[n - l];
                }
            }
            row[n] = (1.0 - pi) * acc;
        }
        f.push(row);
    }
    f
}

/// `A_i(N)` for `i = 1..=d`, each row on `N = 0..k-1`. Row 0 (`i = 1`) is all zero.
pub fn compute_a(p: &LayerProbs, f: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = p.layers();
    let k = leaves(d);
    let mut a = vec![vec![0.0; k]; d as usize];
    if d >= 2 {
        a[1][1] = p.get(1);
    }
    for i in 3..=d as usize {
        let f_below = &f[i - 2];
        let span = 1usize << (i - 2);
        for n in 0..k {
            let mut acc = 0.0;
            for l in 1..=span.min(n) {
                acc += f_below[l] * a[i - 2][n - l];
            }
            a[i - 1][n] = acc;
        }
    }
    a
}

/// `P_i(N)` for `i = 1..=d`, each row on `N = 0..k-1`.
pub fn compute_p(p: &LayerProbs, a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = p.layers();
    let k = leaves(d);
    let q = decode_probs(p).all_q().to_vec();
    let mut joint = vec![vec![0.0; k]; d as usize];
    joint[0][0] = p.get(1);
    let mut missing_path = 1.0;
    for i in 2..=d as usize {
        missing_path *= 1.0 - p.get(i as u32 - 1);
        let pi = p.get(i as u32);
        let root_and_path = pi * missing_path;
        // For each j < i: 2^(j-1) * prod_{l < i, l != j} Q_l.
        let partition_weight: Vec<f64> = (1..i)
            .map(|j| {
                let others: f64 = (1..i).filter(|&l| l != j).map(|l| q[l - 1]).product();
                (1u64 << (j - 1)) as f64 * others
            })
            .collect();
        for n in 0..k {
            let both = q[i - 2] * joint[i - 2][n];
            let by_root = a[i - 1][n] * root_and_path;
            let by_other: f64 = (1..i)
                .map(|j| partition_weight[j - 1] * joint[j - 1][n])
                .sum();
            joint[i - 1][n] = both + by_root + root_and_path * by_other;
        }
    }
    joint
}

impl CostTables {
    pub fn new(p: &LayerProbs) -> Self {
        let f = compute_f(p);
        let a = compute_a(p, &f);
        let joint = compute_p(p, &a);
        CostTables {
            p: p.clone(),
            q: decode_probs(p).all_q().to_vec(),
            f,
            a,
            joint,
        }
    }

    pub fn layers(&self) -> u32 {
        self.p.layers()
    }

    pub fn probs(&self) -> &LayerProbs {
        &self.p
    }

    /// `Q_i`.
    pub fn q(&self, i: u32) -> f64 {
        self.q[i as usize - 1]
    }

    /// `F_i(N)`; zero outside `N in [1, 2^(i-1)]`.
    pub fn f(&self, i: u32, n: usize) -> f64 {
        self.f[i as usize - 1].get(n).copied().unwrap_or(0.0)
    }

    /// `A_i(N)`; zero outside `N in [0, k-1]`.
    pub fn a(&self, i: u32, n: usize) -> f64 {
        self.a[i as usize - 1].get(n).copied().unwrap_or(0.0)
    }

    /// `P_i(N)`; zero outside `N in [0, k-1]`.
    pub fn p(&self, i: u32, n: usize) -> f64 {
        self.joint[i as usize - 1].get(n).copied().unwrap_or(0.0)
    }

    /// The row `P_d(0..k)`.
    pub fn joint_row(&self) -> &[f64] {
        &self.joint[self.joint.len() - 1]
    }
}

/// Expected total cost and the conditional per-fragment cost distribution.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CostSummary {
    /// Expected number of fragments communicated per decodable instance.
    pub expected: f64,
    /// `C_d(N) = P_d(N) / Q_d` for `N = 0..k-1`.
    pub per_fragment: Vec<f64>,
    /// `Q_d`.
    pub decode_prob: f64,
}

/// Expected total recovery cost conditioned on decodability.
pub fn expected_cost(p: &LayerProbs) -> Result<CostSummary> {
    let tables = CostTables::new(p);
    let d = p.layers();
    let qd = tables.q(d);
    if qd <= 0.0 {
        return Err(Error::DegenerateModel);
    }
    let row = tables.joint_row();
    let mean: f64 = row.iter().enumerate().map(|(n, &x)| n as f64 * x).sum();
    Ok(CostSummary {
        expected: leaves(d) as f64 * mean / qd,
        per_fragment: row.iter().map(|x| x / qd).collect(),
        decode_prob: qd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;

    fn probs(p: &[f64]) -> LayerProbs {
        LayerProbs::new(p.to_vec()).unwrap()
    }

    #[test]
    fn full_presence() {
        let t = CostTables::new(&probs(&[1.0, 1.0, 1.0, 1.0]));
        for i in 1..=4 {
            assert_eq!(t.f(i, 1), 1.0);
            for n in 2..8 {
                assert_eq!(t.f(i, n), 0.0);
            }
        }
        assert_eq!(t.p(4, 0), 1.0);
        assert!((1..8).all(|n| t.p(4, n) == 0.0));
        assert_eq!(expected_cost(&probs(&[1.0; 4])).unwrap().expected, 0.0);
    }

    #[test]
    fn two_layer_half() {
        let t = CostTables::new(&probs(&[0.5, 0.5]));
        assert!((t.f(2, 1) - 3.0 / 8.0).abs() < 1e-15);
        assert!((t.f(2, 2) - 1.0 / 8.0).abs() < 1e-15);
        assert!((t.f(2, 1) + t.f(2, 2) - 0.5).abs() < 1e-15);
        assert!((t.p(2, 0) - 3.0 / 8.0).abs() < 1e-15);
        assert!((t.p(2, 1) - 1.0 / 8.0).abs() < 1e-15);
        assert_eq!(t.a(2, 0), 0.0);
        assert!((expected_cost(&probs(&[0.5, 0.5])).unwrap().expected - 0.5).abs() < 1e-15);
    }

    #[test]
    fn base_cases() {
        let t = CostTables::new(&probs(&[0.3, 0.6, 0.2]));
        assert_eq!(t.a(2, 1), 0.3);
        assert_eq!(t.p(1, 0), 0.3);
        assert!((1..4).all(|n| t.p(1, n) == 0.0));
    }

    #[test]
    fn three_layer_a_example() {
        let t = CostTables::new(&probs(&[0.5, 0.5, 0.5]));
        assert!((t.a(3, 2) - 3.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_model() {
        assert!(matches!(
            expected_cost(&probs(&[0.0, 0.0])),
            Err(Error::DegenerateModel)
        ));
    }

    #[test]
    fn tables_match_pattern_enumeration() {
        for p in [
            vec![0.5, 0.5],
            vec![0.8, 0.3],
            vec![0.5, 0.5, 0.5],
            vec![0.9, 0.35, 0.6],
        ] {
            let lp = probs(&p);
            let t = CostTables::new(&lp);
            let d = lp.layers();
            for i in 1..=d {
                let sub = lp.prefix(i);
                let f = oracle::bernoulli_top_count_dist(&sub);
                let joint = oracle::bernoulli_leaf_cost_dist(&sub);
                for n in 0..f.len() {
                    assert!((t.f(i, n) - f[n]).abs() < 1e-12, "F_{i}({n}) {p:?}");
                }
                for n in 0..joint.len() {
                    assert!((t.p(i, n) - joint[n]).abs() < 1e-12, "P_{i}({n}) {p:?}");
                }
                if i >= 2 {
                    let a = oracle::bernoulli_root_recovery_cost_dist(&sub);
                    for n in 0..a.len() {
                        assert!((t.a(i, n) - a[n]).abs() < 1e-12, "A_{i}({n}) {p:?}");
                    }
                }
            }
        }
    }
}
