//! Triple U-statistics of shot histograms.
//!
//! A kernel on outcome triples is either a function of the equality pattern
//! (symmetric), an arbitrary function of the three symbols, or a sum of
//! products of equality indicators on the A and B halves of joint outcomes
//! ([`DeltaKernel`]). The last form is contracted against the histogram in
//! `O(d_A d_B)` per term, so bipartite schemes never loop over shot triples.

use crate::error::{Error, Result};
use crate::observables::{DiagonalObservable, Rule};
use crate::permgroup::set_partitions;

/// `n (n-1) ... (n-k+1)` as a float.
fn falling_u(n: u64, k: u64) -> f64 {
    (0..k).map(|i| n.saturating_sub(i) as f64).product()
}

fn binom3(n: u64) -> f64 {
    falling_u(n, 3) / 6.0
}

fn total(counts: &[u64]) -> Result<u64> {
    let n: u64 = counts.iter().sum();
    if n < 3 {
        return Err(Error::TooFewShots(n as usize));
    }
    Ok(n)
}

/// Symmetric U-statistic `binom(N,3)^{-1} sum_{i<j<k} O(s_i, s_j, s_k)` for a
/// kernel given by its values `[O(wt=1), O(wt=2), O(wt=3)]`, from the histogram.
pub fn u_statistic_symmetric(counts: &[u64], by_weight: [f64; 3]) -> Result<f64> {
    let n = total(counts)?;
    let all_equal: f64 = counts.iter().map(|&c| binom3(c)).sum();
    let two_equal: f64 = counts
        .iter()
        .map(|&c| falling_u(c, 2) / 2.0 * (n - c) as f64)
        .sum();
    let triples = binom3(n);
    let distinct = triples - all_equal - two_equal;
    Ok((by_weight[2] * all_equal + by_weight[1] * two_equal + by_weight[0] * distinct) / triples)
}

/// Exact-probability analogue of [`u_statistic_symmetric`]: `sum_s O(s) p_{s1} p_{s2} p_{s3}`.
pub fn expectation_symmetric(probs: &[f64], by_weight: [f64; 3]) -> f64 {
    let s2: f64 = probs.iter().map(|p| p * p).sum();
    let s3: f64 = probs.iter().map(|p| p * p * p).sum();
    let two = 3.0 * (s2 - s3);
    let distinct = 1.0 - s3 - two;
    by_weight[2] * s3 + by_weight[1] * two + by_weight[0] * distinct
}

/// Number of ordered distinct shot triples realising the outcome triple `(x, y, z)`.
fn ordered_multiplicity(counts: &[u64], x: usize, y: usize, z: usize) -> f64 {
    let (a, b, c) = (counts[x], counts[y], counts[z]);
    match (x == y, x == z, y == z) {
        (true, true, _) => falling_u(a, 3),
        (true, false, _) => falling_u(a, 2) * c as f64,
        (false, true, _) => falling_u(a, 2) * b as f64,
        (false, false, true) => a as f64 * falling_u(b, 2),
        _ => (a * b * c) as f64,
    }
}

/// Ordered U-statistic `1/(N(N-1)(N-2)) sum_{i != j != k} O(s_i, s_j, s_k)` by a
/// loop over the support of the histogram.
pub fn u_statistic_ordered<F>(counts: &[u64], coeff: F) -> Result<f64>
where
    F: Fn(usize, usize, usize) -> f64,
{
    let n = total(counts)?;
    let support: Vec<usize> = (0..counts.len()).filter(|&s| counts[s] > 0).collect();
    let mut acc = 0.0;
    for &x in &support {
        for &y in &support {
            for &z in &support {
                let m = ordered_multiplicity(counts, x, y, z);
                if m > 0.0 {
                    acc += m * coeff(x, y, z);
                }
            }
        }
    }
    Ok(acc / falling_u(n, 3))
}

/// Exact-probability analogue of [`u_statistic_ordered`].
pub fn expectation_ordered<F>(probs: &[f64], coeff: F) -> f64
where
    F: Fn(usize, usize, usize) -> f64,
{
    let support: Vec<usize> = (0..probs.len()).filter(|&s| probs[s] > 0.0).collect();
    let mut acc = 0.0;
    for &x in &support {
        for &y in &support {
            let pxy = probs[x] * probs[y];
            for &z in &support {
                acc += pxy * probs[z] * coeff(x, y, z);
            }
        }
    }
    acc
}

/// `u_statistic_triples(counts, coeff, symmetric)`: the symmetric closed form
/// evaluates `coeff` on one representative per equality class.
pub fn u_statistic_triples<F>(counts: &[u64], coeff: F, symmetric: bool) -> Result<f64>
where
    F: Fn(&[usize; 3]) -> f64,
{
    if symmetric {
        let w = [coeff(&[0, 1, 2]), coeff(&[0, 0, 1]), coeff(&[0, 0, 0])];
        u_statistic_symmetric(counts, w)
    } else {
        u_statistic_ordered(counts, |x, y, z| coeff(&[x, y, z]))
    }
}

/// Brute-force U-statistic over all ordered distinct triples of an explicit shot list.
pub fn u_statistic_brute<F>(shots: &[usize], coeff: F) -> Result<f64>
where
    F: Fn(&[usize; 3]) -> f64,
{
    let n = shots.len();
    if n < 3 {
        return Err(Error::TooFewShots(n));
    }
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if i != j && j != k && i != k {
                    acc += coeff(&[shots[i], shots[j], shots[k]]);
                }
            }
        }
    }
    Ok(acc / falling_u(n as u64, 3))
}

/// Equality pattern on three positions (restricted growth string) with a weight.
pub type DeltaTerm = ([u8; 3], f64);

/// Kernel `sum_{(P_A, P_B)} w [a const on P_A] [b const on P_B]` on joint outcomes `(a, b)`.
#[derive(Clone, Debug, Default)]
pub struct DeltaKernel {
    terms: Vec<([u8; 3], [u8; 3], f64)>,
}

/// Indicator expansion of a single-party diagonal observable.
pub fn delta_terms(o: &DiagonalObservable) -> Vec<DeltaTerm> {
    match *o.rule() {
        Rule::Weight(_) => {
            let (alpha, beta, gamma) = o.delta_form().expect("weight rule");
            vec![
                ([0, 0, 0], alpha),
                ([0, 0, 1], beta),
                ([0, 1, 0], beta),
                ([0, 1, 1], beta),
                ([0, 1, 2], gamma),
            ]
        }
        Rule::PairDelta { i, j, alpha, beta } => {
            let mut p = [0u8, 1, 2];
            p[j] = p[i];
            // renormalize to a restricted growth string
            let rgs = normalize(p);
            vec![(rgs, alpha), ([0, 1, 2], beta)]
        }
    }
}

/// Constant kernel `1` on one side.
pub const TRIVIAL: [DeltaTerm; 1] = [([0, 1, 2], 1.0)];

fn normalize(p: [u8; 3]) -> [u8; 3] {
    let mut map = [u8::MAX; 4];
    let mut next = 0;
    let mut out = [0; 3];
    for (k, &x) in p.iter().enumerate() {
        if map[x as usize] == u8::MAX {
            map[x as usize] = next;
            next += 1;
        }
        out[k] = map[x as usize];
    }
    out
}

/// Finest common coarsening of two set partitions.
fn join(a: &[u8; 3], b: &[u8; 3]) -> [u8; 3] {
    let mut parent = [0usize, 1, 2];
    fn find(p: &mut [usize; 3], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        r
    }
    for i in 0..3 {
        for j in 0..3 {
            if a[i] == a[j] || b[i] == b[j] {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut p = [0u8; 3];
    for (i, slot) in p.iter_mut().enumerate() {
        *slot = find(&mut parent, i) as u8;
    }
    normalize(p)
}

/// Joint histogram (or probability table) over `d_A x d_B` outcomes with marginals.
#[derive(Clone, Debug)]
pub struct JointTable {
    da: usize,
    db: usize,
    n: Vec<f64>,
    row: Vec<f64>,
    col: Vec<f64>,
    total: f64,
}

impl JointTable {
    /// From values indexed `a d_B + b`.
    pub fn new(values: &[f64], da: usize, db: usize) -> Result<Self> {
        if values.len() != da * db {
            return Err(Error::SizeMismatch {
                expected: da * db,
                got: values.len(),
            });
        }
        let mut row = vec![0.0; da];
        let mut col = vec![0.0; db];
        for a in 0..da {
            for b in 0..db {
                row[a] += values[a * db + b];
                col[b] += values[a * db + b];
            }
        }
        let total = row.iter().sum();
        Ok(Self {
            da,
            db,
            n: values.to_vec(),
            row,
            col,
            total,
        })
    }

    pub fn from_counts(counts: &[u64], da: usize, db: usize) -> Result<Self> {
        let v: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        Self::new(&v, da, db)
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// `sum` over tuples constant on the blocks of `j` of `[a const on pa][b const on pb]`.
    fn contract(&self, pa: &[u8; 3], pb: &[u8; 3], j: &[u8; 3]) -> f64 {
        let va = join(pa, j);
        let vb = join(pb, j);
        // one edge per block of j, joining its A-vertex and B-vertex
        let mut edges: Vec<(u8, u8)> = Vec::with_capacity(3);
        let mut seen = [false; 3];
        for k in 0..3 {
            if !seen[j[k] as usize] {
                seen[j[k] as usize] = true;
                edges.push((va[k], vb[k]));
            }
        }
        let deg = |side: usize, v: u8| {
            edges
                .iter()
                .filter(|e| if side == 0 { e.0 == v } else { e.1 == v })
                .count()
        };
        let hub_a = edges.iter().map(|e| e.0).find(|&v| deg(0, v) >= 2);
        let hub_b = edges.iter().map(|e| e.1).find(|&v| deg(1, v) >= 2);
        let ra = if hub_a.is_some() { self.da } else { 1 };
        let rb = if hub_b.is_some() { self.db } else { 1 };
        let mut acc = 0.0;
        for a in 0..ra {
            for b in 0..rb {
                let mut prod = 1.0;
                for &(ea, eb) in &edges {
                    let on_a = hub_a == Some(ea);
                    let on_b = hub_b == Some(eb);
                    prod *= match (on_a, on_b) {
                        (true, true) => self.n[a * self.db + b],
                        (true, false) => self.row[a],
                        (false, true) => self.col[b],
                        (false, false) => self.total,
                    };
                    if prod == 0.0 {
                        break;
                    }
                }
                acc += prod;
            }
        }
        acc
    }
}

impl DeltaKernel {
    /// `O_A (x) O_B` from the indicator expansions of each side.
    pub fn product(a: &[DeltaTerm], b: &[DeltaTerm]) -> Self {
        let mut terms = Vec::with_capacity(a.len() * b.len());
        for (pa, wa) in a {
            for (pb, wb) in b {
                if wa * wb != 0.0 {
                    terms.push((*pa, *pb, wa * wb));
                }
            }
        }
        Self { terms }
    }

    /// Value on one ordered triple of joint outcomes.
    pub fn evaluate(&self, a: [usize; 3], b: [usize; 3]) -> f64 {
        let holds = |p: &[u8; 3], s: &[usize; 3]| {
            (0..3).all(|i| (0..3).all(|k| p[i] != p[k] || s[i] == s[k]))
        };
        self.terms
            .iter()
            .filter(|(pa, pb, _)| holds(pa, &a) && holds(pb, &b))
            .map(|t| t.2)
            .sum()
    }

    /// Ordered-distinct U-statistic of a joint shot histogram.
    pub fn u_statistic(&self, table: &JointTable) -> Result<f64> {
        let n = table.total.round() as u64;
        if n < 3 {
            return Err(Error::TooFewShots(n as usize));
        }
        // Moebius inversion over coincidences of shot indices
        let mut acc = 0.0;
        for j in set_partitions(3) {
            let j = [j[0], j[1], j[2]];
            let blocks = *j.iter().max().unwrap() + 1;
            let mu = match blocks {
                3 => 1.0,
                2 => -1.0,
                _ => 2.0,
            };
            for (pa, pb, w) in &self.terms {
                acc += mu * w * table.contract(pa, pb, &j);
            }
        }
        Ok(acc / falling_u(n, 3))
    }

    /// Exact expectation `sum O(s) p(s1) p(s2) p(s3)` for a probability table.
    pub fn expectation(&self, table: &JointTable) -> f64 {
        self.terms
            .iter()
            .map(|(pa, pb, w)| w * table.contract(pa, pb, &[0, 1, 2]))
            .sum()
    }
}
