//! Symmetric groups S_t for t <= 6: permutations, cycle types, set partitions
//! of copy indices, and the diagonal matrix elements of permutation operators.
//!
//! Permutations act on tensor copies through `W_pi |s_1..s_t> = |s_pi(1)..s_pi(t)>`,
//! so `W_(1,2,3) |a1 a2 a3> = |a2 a3 a1>`. Cycle notation is 1-based for I/O and
//! 0-based internally.

use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported number of copies.
pub const MAX_T: usize = 6;

fn check_t(t: usize) -> Result<()> {
    if (1..=MAX_T).contains(&t) {
        Ok(())
    } else {
        Err(Error::CopiesOutOfRange(t))
    }
}

/// A bijection on `{0, .., t-1}`; `mapping[i]` is the image of `i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Permutation {
    mapping: Vec<usize>,
}

impl Permutation {
    pub fn new(mapping: Vec<usize>) -> Result<Self> {
        let t = mapping.len();
        check_t(t)?;
        let mut seen = [false; MAX_T];
        for &m in &mapping {
            if m >= t || seen[m] {
                return Err(Error::InvalidPermutation(mapping));
            }
            seen[m] = true;
        }
        Ok(Self { mapping })
    }

    pub fn identity(t: usize) -> Self {
        Self {
            mapping: (0..t).collect(),
        }
    }

    /// Builds a permutation from 1-based cycles, e.g. `&[&[1, 4, 6], &[3, 5]]`.
    pub fn from_cycles(t: usize, cycles: &[&[usize]]) -> Result<Self> {
        check_t(t)?;
        let mut mapping: Vec<usize> = (0..t).collect();
        let mut used = [false; MAX_T];
        for cyc in cycles {
            for (k, &x) in cyc.iter().enumerate() {
                if x == 0 || x > t || used[x - 1] {
                    return Err(Error::Parse(format!("bad cycle element {x} for t={t}")));
                }
                used[x - 1] = true;
                let next = cyc[(k + 1) % cyc.len()];
                if next == 0 || next > t {
                    return Err(Error::Parse(format!("bad cycle element {next} for t={t}")));
                }
                mapping[x - 1] = next - 1;
            }
        }
        Self::new(mapping)
    }

    /// Parses cycle notation such as `"(1,4,6)(3,5)"` or `"()"`.
    pub fn parse(t: usize, text: &str) -> Result<Self> {
        let mut cycles: Vec<Vec<usize>> = Vec::new();
        let mut rest = text.trim();
        while !rest.is_empty() {
            let open = rest
                .strip_prefix('(')
                .ok_or_else(|| Error::Parse(format!("expected '(' in {text:?}")))?;
            let close = open
                .find(')')
                .ok_or_else(|| Error::Parse(format!("unclosed cycle in {text:?}")))?;
            let body = open[..close].trim();
            if !body.is_empty() {
                let cyc = body
                    .split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<usize>().map_err(|e| Error::Parse(e.to_string())))
                    .collect::<Result<Vec<_>>>()?;
                cycles.push(cyc);
            }
            rest = open[close + 1..].trim_start();
        }
        let refs: Vec<&[usize]> = cycles.iter().map(|c| c.as_slice()).collect();
        Self::from_cycles(t, &refs)
    }

    pub fn size(&self) -> usize {
        self.mapping.len()
    }

    pub fn mapping(&self) -> &[usize] {
        &self.mapping
    }

    #[inline]
    pub fn apply(&self, i: usize) -> usize {
        self.mapping[i]
    }

    /// `(self . other)(i) = self(other(i))`.
    pub fn compose(&self, other: &Permutation) -> Permutation {
        assert_eq!(self.size(), other.size(), "compose: size mismatch");
        Permutation {
            mapping: other.mapping.iter().map(|&j| self.mapping[j]).collect(),
        }
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.size()];
        for (i, &m) in self.mapping.iter().enumerate() {
            inv[m] = i;
        }
        Permutation { mapping: inv }
    }

    pub fn is_identity(&self) -> bool {
        self.mapping.iter().enumerate().all(|(i, &m)| i == m)
    }

    /// Cycles including fixed points, smallest element first, sorted by first element.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let t = self.size();
        let mut seen = [false; MAX_T];
        let mut out = Vec::new();
        for start in 0..t {
            if seen[start] {
                continue;
            }
            let mut cyc = vec![start];
            seen[start] = true;
            let mut j = self.mapping[start];
            while j != start {
                seen[j] = true;
                cyc.push(j);
                j = self.mapping[j];
            }
            out.push(cyc);
        }
        out
    }

    pub fn num_cycles(&self) -> usize {
        let t = self.size();
        let mut seen = [false; MAX_T];
        let mut n = 0;
        for start in 0..t {
            if seen[start] {
                continue;
            }
            n += 1;
            let mut j = start;
            while !seen[j] {
                seen[j] = true;
                j = self.mapping[j];
            }
        }
        n
    }

    /// True when every cycle of `self` lies inside one block of `blocks`
    /// (a restricted growth labelling of copy indices).
    #[inline]
    pub fn respects(&self, blocks: &[u8]) -> bool {
        self.mapping
            .iter()
            .enumerate()
            .all(|(i, &m)| blocks[i] == blocks[m])
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cycles: Vec<_> = self.cycles().into_iter().filter(|c| c.len() > 1).collect();
        if cycles.is_empty() {
            return write!(f, "()");
        }
        for c in cycles {
            let body: Vec<String> = c.iter().map(|x| (x + 1).to_string()).collect();
            write!(f, "({})", body.join(","))?;
        }
        Ok(())
    }
}

/// Integer partition stored as a non-increasing list of positive parts.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Partition {
    parts: Vec<usize>,
}

impl Partition {
    /// Sorts the parts; rejects zero parts and empty input.
    pub fn new(mut parts: Vec<usize>) -> Result<Self> {
        if parts.is_empty() || parts.contains(&0) {
            return Err(Error::InvalidPartition(parts));
        }
        parts.sort_unstable_by(|a, b| b.cmp(a));
        Ok(Self { parts })
    }

    pub fn parts(&self) -> &[usize] {
        &self.parts
    }

    pub fn total(&self) -> usize {
        self.parts.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Canonical representative: consecutive blocks, each an increasing cycle.
    pub fn representative(&self) -> Permutation {
        let t = self.total();
        let mut mapping = vec![0; t];
        let mut start = 0;
        for &p in &self.parts {
            for k in 0..p {
                mapping[start + k] = start + (k + 1) % p;
            }
            start += p;
        }
        Permutation { mapping }
    }

    /// Compact label such as `[321]` (parts are single digits for t <= 6).
    pub fn label(&self) -> String {
        let body: String = self.parts.iter().map(|p| p.to_string()).collect();
        format!("[{body}]")
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let body: Vec<String> = self.parts.iter().map(|p| p.to_string()).collect();
        write!(f, "[{}]", body.join(","))
    }
}

/// All partitions of `t`, sorted lexicographically ascending:
/// `[1,1,1] < [2,1] < [3]`. Row/column order of the embedding tables.
pub fn partitions(t: usize) -> Vec<Partition> {
    fn rec(rem: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rem == 0 {
            out.push(cur.clone());
            return;
        }
        for p in (1..=rem.min(max)).rev() {
            cur.push(p);
            rec(rem - p, p, cur, out);
            cur.pop();
        }
    }
    let mut raw = Vec::new();
    rec(t, t, &mut Vec::new(), &mut raw);
    raw.sort();
    raw.into_iter().map(|parts| Partition { parts }).collect()
}

/// A length-t string of symbols below `d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct OutcomeString {
    symbols: Vec<usize>,
}

impl OutcomeString {
    pub fn new(symbols: Vec<usize>, d: usize) -> Result<Self> {
        check_t(symbols.len())?;
        if let Some(&s) = symbols.iter().find(|&&s| s >= d) {
            return Err(Error::SymbolOutOfRange { symbol: s, d });
        }
        Ok(Self { symbols })
    }

    pub fn symbols(&self) -> &[usize] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// Restricted growth labelling of the equality pattern of `symbols`.
pub fn pattern_of(symbols: &[usize]) -> Vec<u8> {
    let mut seen: Vec<usize> = Vec::with_capacity(symbols.len());
    symbols
        .iter()
        .map(|s| match seen.iter().position(|x| x == s) {
            Some(k) => k as u8,
            None => {
                seen.push(*s);
                (seen.len() - 1) as u8
            }
        })
        .collect()
}

/// Number of blocks of a restricted growth labelling.
pub fn num_blocks(blocks: &[u8]) -> usize {
    blocks.iter().map(|&b| b as usize + 1).max().unwrap_or(0)
}

/// Block sizes of a labelling as a partition.
pub fn block_type(blocks: &[u8]) -> Partition {
    let mut sizes = vec![0usize; num_blocks(blocks)];
    for &b in blocks {
        sizes[b as usize] += 1;
    }
    Partition::new(sizes).expect("non-empty labelling")
}

/// All set partitions of `{0..t-1}` as restricted growth strings (Bell(t) of them).
pub fn set_partitions(t: usize) -> Vec<Vec<u8>> {
    fn rec(i: usize, t: usize, max: u8, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if i == t {
            out.push(cur.clone());
            return;
        }
        for b in 0..=max {
            cur.push(b);
            rec(i + 1, t, if b == max { max + 1 } else { max }, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if t == 0 {
        return out;
    }
    rec(0, t, 0, &mut Vec::with_capacity(t), &mut out);
    out
}

/// Permutation whose cycles are the blocks of `blocks`, increasing within each cycle.
pub fn blocks_to_permutation(blocks: &[u8]) -> Permutation {
    let t = blocks.len();
    let mut mapping = vec![0; t];
    for b in 0..num_blocks(blocks) as u8 {
        let idx: Vec<usize> = (0..t).filter(|&i| blocks[i] == b).collect();
        for k in 0..idx.len() {
            mapping[idx[k]] = idx[(k + 1) % idx.len()];
        }
    }
    Permutation { mapping }
}

/// All t! permutations in lexicographic order of their mapping; identity first.
pub fn enumerate_group(t: usize) -> Result<Vec<Permutation>> {
    check_t(t)?;
    let mut cur: Vec<usize> = (0..t).collect();
    let mut out = Vec::new();
    loop {
        out.push(Permutation {
            mapping: cur.clone(),
        });
        // next lexicographic permutation
        let Some(i) = (0..t.saturating_sub(1))
            .rev()
            .find(|&i| cur[i] < cur[i + 1])
        else {
            break;
        };
        let j = (i + 1..t).rev().find(|&j| cur[j] > cur[i]).unwrap();
        cur.swap(i, j);
        cur[i + 1..].reverse();
    }
    Ok(out)
}

/// Cycle lengths of `p` as a partition.
pub fn cycle_type(p: &Permutation) -> Partition {
    Partition::new(p.cycles().iter().map(|c| c.len()).collect()).expect("t >= 1")
}

/// `omega(s)`: the permutation cycling equal-symbol positions in increasing order,
/// together with its cycle type `lambda(s)`.
pub fn string_class(s: &OutcomeString) -> (Permutation, Partition) {
    let blocks = pattern_of(s.symbols());
    (blocks_to_permutation(&blocks), block_type(&blocks))
}

/// True when every cycle of `pi` lies inside a cycle of `omega`, i.e. `omega`
/// can be built by merging cycles of `pi`.
pub fn embeds(pi: &Permutation, omega: &Permutation) -> Result<bool> {
    if pi.size() != omega.size() {
        return Err(Error::SizeMismatch {
            expected: omega.size(),
            got: pi.size(),
        });
    }
    let mut label = [0u8; MAX_T];
    for (k, c) in omega.cycles().iter().enumerate() {
        for &i in c {
            label[i] = k as u8;
        }
    }
    Ok(pi.respects(&label[..pi.size()]))
}

/// `<s| W_pi |s>`, which is 1 exactly when `pi` embeds into `omega(s)`.
pub fn matrix_element(pi: &Permutation, s: &OutcomeString) -> u8 {
    assert_eq!(pi.size(), s.len(), "matrix_element: size mismatch");
    let sym = s.symbols();
    u8::from((0..sym.len()).all(|i| sym[pi.apply(i)] == sym[i]))
}

/// Number of permutations of cycle type `xi` embedding into a fixed permutation of type `lam`.
pub fn embedding_constant(xi: &Partition, lam: &Partition) -> Result<u64> {
    embedding_constant_with(xi, &lam.representative())
}

/// Same count against an explicit representative `sigma`.
pub fn embedding_constant_with(xi: &Partition, sigma: &Permutation) -> Result<u64> {
    if xi.total() != sigma.size() {
        return Err(Error::SizeMismatch {
            expected: sigma.size(),
            got: xi.total(),
        });
    }
    let mut n = 0;
    for p in enumerate_group(sigma.size())? {
        if cycle_type(&p) == *xi && embeds(&p, sigma)? {
            n += 1;
        }
    }
    Ok(n)
}

/// `T_lambda = prod lambda_i!`.
pub fn symmetry_factor(lam: &Partition) -> u64 {
    lam.parts().iter().map(|&p| factorial(p)).product()
}

pub fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

/// Full gamma table for S_t, rows xi and columns lambda in [`partitions`] order.
pub fn gamma_table(t: usize) -> Result<Vec<Vec<u64>>> {
    check_t(t)?;
    let parts = partitions(t);
    let group = enumerate_group(t)?;
    let types: Vec<Partition> = group.iter().map(cycle_type).collect();
    let mut table = vec![vec![0u64; parts.len()]; parts.len()];
    for (c, lam) in parts.iter().enumerate() {
        let sigma = lam.representative();
        for (p, ty) in group.iter().zip(&types) {
            if embeds(p, &sigma)? {
                let r = parts.iter().position(|x| x == ty).unwrap();
                table[r][c] += 1;
            }
        }
    }
    Ok(table)
}

/// CSV rendering of [`gamma_table`]: header row of lambda labels, one row per xi.
pub fn gamma_table_csv(t: usize) -> Result<String> {
    let parts = partitions(t);
    let table = gamma_table(t)?;
    let mut out = String::from("xi");
    for p in &parts {
        out.push(',');
        out.push_str(&p.label());
    }
    out.push('\n');
    for (r, row) in table.iter().enumerate() {
        out.push_str(&parts[r].label());
        for v in row {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Cached group data: elements, conjugacy classes and the product-class table.
#[derive(Clone, Debug)]
pub struct Group {
    t: usize,
    elements: Vec<Permutation>,
    index: HashMap<Vec<usize>, usize>,
    classes: Vec<Partition>,
    class_of: Vec<usize>,
    class_sizes: Vec<usize>,
    identity_class: usize,
    product_classes: Vec<u8>,
    inverse_index: Vec<usize>,
}

impl Group {
    /// Shared instance for `t`, built on first use.
    pub fn cached(t: usize) -> Result<&'static Group> {
        static CACHE: [OnceLock<Group>; MAX_T] = [const { OnceLock::new() }; MAX_T];
        check_t(t)?;
        Ok(CACHE[t - 1].get_or_init(|| Group::new(t).expect("valid t")))
    }

    pub fn new(t: usize) -> Result<Self> {
        let elements = enumerate_group(t)?;
        let classes = partitions(t);
        let index: HashMap<Vec<usize>, usize> = elements
            .iter()
            .enumerate()
            .map(|(i, p)| (p.mapping.clone(), i))
            .collect();
        let class_of: Vec<usize> = elements
            .iter()
            .map(|p| {
                let ty = cycle_type(p);
                classes.iter().position(|c| *c == ty).unwrap()
            })
            .collect();
        let mut class_sizes = vec![0; classes.len()];
        for &c in &class_of {
            class_sizes[c] += 1;
        }
        let identity_class = class_of[0];
        let n = elements.len();
        let mut product_classes = vec![0u8; n * n];
        for i in 0..n {
            for j in 0..n {
                let p = elements[i].compose(&elements[j]);
                product_classes[i * n + j] = class_of[index[&p.mapping]] as u8;
            }
        }
        let inverse_index = elements
            .iter()
            .map(|p| index[&p.inverse().mapping])
            .collect();
        Ok(Self {
            t,
            elements,
            index,
            classes,
            class_of,
            class_sizes,
            identity_class,
            product_classes,
            inverse_index,
        })
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[Permutation] {
        &self.elements
    }

    pub fn element(&self, i: usize) -> &Permutation {
        &self.elements[i]
    }

    pub fn index_of(&self, p: &Permutation) -> usize {
        self.index[&p.mapping]
    }

    pub fn classes(&self) -> &[Partition] {
        &self.classes
    }

    pub fn class_of(&self, i: usize) -> usize {
        self.class_of[i]
    }

    pub fn class_index(&self, lam: &Partition) -> Option<usize> {
        self.classes.iter().position(|c| c == lam)
    }

    pub fn class_sizes(&self) -> &[usize] {
        &self.class_sizes
    }

    pub fn identity_class(&self) -> usize {
        self.identity_class
    }

    /// Class of the product `elements[i] . elements[j]`.
    #[inline]
    pub fn product_class(&self, i: usize, j: usize) -> usize {
        self.product_classes[i * self.elements.len() + j] as usize
    }

    /// Row `i` of the product-class table.
    pub fn product_class_row(&self, i: usize) -> &[u8] {
        let n = self.elements.len();
        &self.product_classes[i * n..(i + 1) * n]
    }

    pub fn inverse_index(&self, i: usize) -> usize {
        self.inverse_index[i]
    }

    /// Number of cycles of elements of class `c`.
    pub fn class_cycles(&self, c: usize) -> usize {
        self.classes[c].len()
    }

    /// Structure constants `c[a][b][g] = #{(x, y) : x in a, y in b, x y = z_g}` for a fixed `z_g`.
    pub fn structure_constants(&self) -> Vec<Vec<Vec<u64>>> {
        let k = self.classes.len();
        let mut c = vec![vec![vec![0u64; k]; k]; k];
        for (g, lam) in self.classes.iter().enumerate() {
            let z = lam.representative();
            for (xi, x) in self.elements.iter().enumerate() {
                let y = x.inverse().compose(&z);
                let yi = self.index_of(&y);
                c[self.class_of[xi]][self.class_of[yi]][g] += 1;
            }
        }
        c
    }
}
