//! Exact counting of decodable subsets and exact decoding probabilities under
//! uniform i.i.d. selection of tree vertices, plus the replication baseline.
//!
//! All counts are arbitrary-precision; probabilities are formed as exact
//! rationals and only converted to `f64` at the end.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

/// `S(a, b)`, the number of partitions of an `a`-set into `b` non-empty blocks.
pub fn stirling2(a: u64, b: u64) -> BigUint {
    if b > a {
        return BigUint::zero();
    }
    stirling2_row(a, b).pop().unwrap_or_default()
}

/// `[S(n, 0), S(n, 1), ..., S(n, max_b)]`, via `S(a,b) = b S(a-1,b) + S(a-1,b-1)`.
pub fn stirling2_row(n: u64, max_b: u64) -> Vec<BigUint> {
    let width = max_b as usize + 1;
    let mut row = vec![BigUint::zero(); width];
    row[0] = BigUint::one();
    for a in 1..=n {
        let top = (a as usize).min(width - 1);
        for b in (1..=top).rev() {
            let prev = std::mem::take(&mut row[b]);
            row[b] = prev * BigUint::from(b as u64) + &row[b - 1];
        }
        row[0] = BigUint::zero();
    }
    row
}

pub fn factorial(n: u64) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, i| acc * i)
}

pub fn binomial(n: u64, r: u64) -> BigUint {
    if r > n {
        return BigUint::zero();
    }
    let r = r.min(n - r);
    (0..r).fold(BigUint::one(), |acc, i| acc * (n - i) / (i + 1))
}

/// Counts of decodable subsets of a `d`-layer tree, split by whether the root
/// is essential: `D_{d,j} = t_{d,j} + r_{d,j}` for subsets of size `2^(d-1) + j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecodableCounts {
    layers: u32,
    total: Vec<BigUint>,
    root_essential: Vec<BigUint>,
    other: Vec<BigUint>,
}

impl DecodableCounts {
    pub fn layers(&self) -> u32 {
        self.layers
    }

    /// Number of `j` values, `2^(d-1)`.
    pub fn len(&self) -> usize {
        self.total.len()
    }

    pub fn is_empty(&self) -> bool {
        self.total.is_empty()
    }

    /// `D_{d,j}`; zero outside `[0, 2^(d-1) - 1]`.
    pub fn decodable(&self, j: i64) -> BigUint {
        at(&self.total, j)
    }

    /// `t_{d,j}`: subsets containing the root that do not decode without it.
    pub fn root_essential(&self, j: i64) -> BigUint {
        at(&self.root_essential, j)
    }

    /// `r_{d,j}`: all other decodable subsets.
    pub fn other(&self, j: i64) -> BigUint {
        at(&self.other, j)
    }

    /// Number of decodable subsets with exactly `size` vertices.
    pub fn by_size(&self, size: u64) -> BigUint {
        let k = 1i64 << (self.layers - 1);
        self.decodable(size as i64 - k)
    }
}

fn at(v: &[BigUint], j: i64) -> BigUint {
    usize::try_from(j)
        .ok()
        .and_then(|j| v.get(j))
        .cloned()
        .unwrap_or_default()
}

/// Builds the `D/t/r` tables bottom-up from `d = 1`.
pub fn count_decodable(d: u32) -> DecodableCounts {
    assert!(d >= 1, "a tree has at least one layer");
    let mut cur = DecodableCounts {
        layers: 1,
        total: vec![BigUint::one()],
        root_essential: vec![BigUint::one()],
        other: vec![BigUint::zero()],
    };
    for layer in 2..=d {
        let width = 1usize << (layer - 1);
        let mut other = vec![BigUint::zero(); width];
        let mut root_essential = vec![BigUint::zero(); width];
        for j in 0..width as i64 {
            let mut r = BigUint::zero();
            let mut t = BigUint::zero();
            for l in 0..=j {
                let dl = cur.decodable(l);
                if dl.is_zero() {
                    continue;
                }
                r += &dl * cur.decodable(j - l);
                r += &dl * cur.decodable(j - l - 1);
                t += &dl * cur.root_essential(j - l);
            }
            other[j as usize] = r;
            root_essential[j as usize] = t * 2u32;
        }
        let total = other
            .iter()
            .zip(&root_essential)
            .map(|(r, t)| r + t)
            .collect();
        cur = DecodableCounts {
            layers: layer,
            total,
            root_essential,
            other,
        };
    }
    cur
}

fn ratio(num: BigUint, den: BigUint) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Exact probability that `n` i.i.d. uniform draws over the `2^d - 1`
/// vertices form a decodable subset.
pub fn uniform_decode_ratio(d: u32, n: u64) -> BigRational {
    let counts = count_decodable(d);
    uniform_decode_ratio_with(&counts, n)
}

/// As [`uniform_decode_ratio`], reusing precomputed counts.
pub fn uniform_decode_ratio_with(counts: &DecodableCounts, n: u64) -> BigRational {
    let d = counts.layers();
    let k = 1u64 << (d - 1);
    let m = (1u64 << d) - 1;
    if n < k {
        return BigRational::zero();
    }
    let max_size = m.min(n);
    let stirling = stirling2_row(n, max_size);
    let mut num = BigUint::zero();
    let mut fact = factorial(k);
    for size in k..=max_size {
        if size > k {
            fact *= size;
        }
        let dj = counts.by_size(size);
        if dj.is_zero() {
            continue;
        }
        num += dj * &stirling[size as usize] * &fact;
    }
    ratio(num, BigUint::from(m).pow(n as u32))
}

pub fn uniform_decode_prob(d: u32, n: u64) -> f64 {
    uniform_decode_ratio(d, n).to_f64().unwrap_or(f64::NAN)
}

/// Exact coupon-collector probability that `n` uniform draws over `k` data
/// fragments see every fragment: `S(n,k) k! / k^n`.
pub fn replication_decode_ratio(k: u64, n: u64) -> BigRational {
    if k == 0 {
        return BigRational::one();
    }
    if n < k {
        return BigRational::zero();
    }
    ratio(
        stirling2(n, k) * factorial(k),
        BigUint::from(k).pow(n as u32),
    )
}

pub fn replication_decode_prob(k: u64, n: u64) -> f64 {
    replication_decode_ratio(k, n).to_f64().unwrap_or(f64::NAN)
}
