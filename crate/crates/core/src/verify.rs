//! Golden verification suites shared by the command-line tool and the acceptance harness.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_rational::BigRational;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::variance::{
    class_tally, delta3_exact, delta_brute, gamma3_exact, gamma_brute, gamma_pure,
    gamma_pure_exact, gamma_pure_symmetric, tally_coefficients, within_bounds,
};
use crate::observables::{
    cyclic_pair, nogo_witness, o_corr, verify_bilocal, verify_corr, verify_global,
    verify_o_minus_minus, verify_o_plus, PROJECTION_TOL,
};
use crate::permgroup::{gamma_table, partitions, Permutation};
use crate::qstate::{self, bell_state, haar_pure, random_mixed};
use crate::rng::{derive_seed, RandomSource};
use crate::weingarten::{projection_criterion, PermutationCombination, ProjectionReport};

/// One named comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub expected: f64,
    /// Allowed `|value - expected|` relative to `max(1, |expected|)`.
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    pub fn close(name: impl Into<String>, value: f64, expected: f64, tolerance: f64) -> Self {
        let pass = (value - expected).abs() <= tolerance * expected.abs().max(1.0);
        Self {
            name: name.into(),
            value,
            expected,
            tolerance,
            pass,
        }
    }

    pub fn exact(name: impl Into<String>, value: f64, expected: f64) -> Self {
        Self {
            name: name.into(),
            value,
            expected,
            tolerance: 0.0,
            pass: value == expected,
        }
    }

    fn projection(name: impl Into<String>, r: &ProjectionReport) -> Self {
        Self {
            name: name.into(),
            value: r.max_residual / r.scale,
            expected: 0.0,
            tolerance: PROJECTION_TOL,
            pass: r.pass,
        }
    }

    /// `|value - expected|`.
    pub fn residual(&self) -> f64 {
        (self.value - self.expected).abs()
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: value={:.12e} expected={:.12e} residual={:.3e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.expected,
            self.residual()
        )
    }
}

/// Available suites.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SuiteKind {
    Twirl,
    Tables,
    Nogo,
    Variance,
    Bell,
}

impl SuiteKind {
    pub const ALL: [SuiteKind; 5] = [
        SuiteKind::Twirl,
        SuiteKind::Tables,
        SuiteKind::Nogo,
        SuiteKind::Variance,
        SuiteKind::Bell,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SuiteKind::Twirl => "twirl",
            SuiteKind::Tables => "tables",
            SuiteKind::Nogo => "nogo",
            SuiteKind::Variance => "variance",
            SuiteKind::Bell => "bell",
        }
    }
}

impl FromStr for SuiteKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SuiteKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Parse(format!("unknown verification kind '{s}'")))
    }
}

/// Result of a suite.
#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub kind: SuiteKind,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }
}

/// Runs a suite with the default parameters.
pub fn run_suite(kind: SuiteKind, seed: u64) -> Result<SuiteReport> {
    let checks = match kind {
        SuiteKind::Twirl => twirl_checks(2..=5)?,
        SuiteKind::Tables => table_checks()?,
        SuiteKind::Nogo => nogo_checks(2..=5, 50, seed)?,
        SuiteKind::Variance => variance_checks(seed)?,
        SuiteKind::Bell => bell_checks(2..=6, 3)?,
    };
    Ok(SuiteReport { kind, checks })
}

fn single(p: &str, c: f64) -> Result<PermutationCombination> {
    let mut comb = PermutationCombination::zero(3, 1)?;
    comb.add(&Permutation::parse(3, p)?, c);
    Ok(comb)
}

/// Twirl identities of every post-processing observable for `d` in `dims`.
pub fn twirl_checks(dims: std::ops::RangeInclusive<usize>) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for d in dims {
        out.push(Check::projection(
            format!("Phi3(O_+) = M_+ d={d}"),
            &verify_o_plus(d)?,
        ));
        let (oa, ob) = o_corr(d, d)?;
        let ra = projection_criterion(
            &oa.inner_products(),
            &single("(1,2)", 1.0)?,
            &[d],
            PROJECTION_TOL,
        );
        let rb = projection_criterion(
            &ob.inner_products(),
            &single("(2,3)", 1.0)?,
            &[d],
            PROJECTION_TOL,
        );
        out.push(Check::projection(
            format!("Phi3_A(O_A) = W_(12) d={d}"),
            &ra,
        ));
        out.push(Check::projection(
            format!("Phi3_B(O_B) = W_(23) d={d}"),
            &rb,
        ));
        out.push(Check::projection(
            format!("Phi3_A x Phi3_B(O_A x O_B) = M_c d={d}"),
            &verify_corr(d, d)?,
        ));
        out.push(Check::projection(
            format!("Phi3_AB(O_+^AB) = M_+^AB d={d}x{d}"),
            &verify_global(d, d)?,
        ));
        out.push(Check::projection(
            format!("Phi3_A x Phi3_B(O_+ x O_+) = M_++ d={d}"),
            &verify_bilocal(d, d)?,
        ));
        out.push(Check::projection(
            format!("Phi3_A x Phi3_B(O_--) = M_-- d={d}"),
            &verify_o_minus_minus(d)?,
        ));
    }
    Ok(out)
}

/// Embedding constants `gamma_{xi, lambda}` (rows `xi`, columns `lambda`, classes in
/// lexicographic order of their parts).
pub const GOLDEN_GAMMA_S3: [[u64; 3]; 3] = [[1, 1, 1], [0, 1, 3], [0, 0, 2]];
pub const GOLDEN_GAMMA_S4: [[u64; 5]; 5] = [
    [1, 1, 1, 1, 1],
    [0, 1, 2, 3, 6],
    [0, 0, 1, 0, 3],
    [0, 0, 0, 2, 8],
    [0, 0, 0, 0, 6],
];
pub const GOLDEN_GAMMA_S5: [[u64; 7]; 7] = [
    [1, 1, 1, 1, 1, 1, 1],
    [0, 1, 2, 3, 4, 6, 10],
    [0, 0, 1, 0, 3, 3, 15],
    [0, 0, 0, 2, 2, 8, 20],
    [0, 0, 0, 0, 2, 0, 20],
    [0, 0, 0, 0, 0, 6, 30],
    [0, 0, 0, 0, 0, 0, 24],
];
pub const GOLDEN_GAMMA_S6: [[u64; 11]; 11] = [
    [1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1],
    [0, 1, 2, 3, 3, 4, 6, 6, 7, 10, 15],
    [0, 0, 1, 3, 0, 3, 9, 3, 9, 15, 45],
    [0, 0, 0, 1, 0, 0, 0, 0, 3, 0, 15],
    [0, 0, 0, 0, 2, 2, 4, 8, 8, 20, 40],
    [0, 0, 0, 0, 0, 2, 12, 0, 8, 20, 120],
    [0, 0, 0, 0, 0, 0, 4, 0, 0, 0, 40],
    [0, 0, 0, 0, 0, 0, 0, 6, 6, 30, 90],
    [0, 0, 0, 0, 0, 0, 0, 0, 6, 0, 90],
    [0, 0, 0, 0, 0, 0, 0, 0, 0, 24, 144],
    [0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 120],
];

/// Golden embedding table for `t = 3..6` as nested vectors.
pub fn golden_gamma(t: usize) -> Result<Vec<Vec<u64>>> {
    fn v<const N: usize>(m: &[[u64; N]; N]) -> Vec<Vec<u64>> {
        m.iter().map(|r| r.to_vec()).collect()
    }
    Ok(match t {
        3 => v(&GOLDEN_GAMMA_S3),
        4 => v(&GOLDEN_GAMMA_S4),
        5 => v(&GOLDEN_GAMMA_S5),
        6 => v(&GOLDEN_GAMMA_S6),
        _ => return Err(Error::CopiesOutOfRange(t)),
    })
}

/// One tally coefficient: `((w1, w2), k, value)`.
pub type TallyEntry = ((usize, usize), usize, u64);

/// Coefficients of `O(w1) O(w2) A_d^k` in `sum_a Q_t(a) T(a)`, keyed `((w1, w2), k)`.
pub fn golden_tally(t: usize) -> Result<Vec<TallyEntry>> {
    Ok(match t {
        3 => vec![((1, 1), 3, 1), ((2, 2), 2, 6), ((3, 3), 1, 6)],
        4 => vec![
            ((1, 1), 4, 1),
            ((1, 1), 3, 2),
            ((1, 2), 3, 8),
            ((2, 2), 3, 2),
            ((2, 2), 2, 24),
            ((2, 3), 2, 12),
            ((3, 3), 1, 24),
        ],
        5 => vec![
            ((1, 1), 5, 1),
            ((1, 1), 4, 8),
            ((1, 1), 3, 8),
            ((1, 2), 4, 12),
            ((1, 2), 3, 56),
            ((2, 2), 3, 44),
            ((2, 2), 2, 120),
            ((1, 3), 3, 12),
            ((2, 3), 2, 120),
            ((3, 3), 1, 120),
        ],
        6 => vec![
            ((1, 1), 6, 1),
            ((1, 1), 5, 18),
            ((1, 1), 4, 72),
            ((1, 1), 3, 48),
            ((1, 2), 5, 12),
            ((1, 2), 4, 180),
            ((1, 2), 3, 432),
            ((2, 2), 4, 36),
            ((2, 2), 3, 504),
            ((2, 2), 2, 756),
            ((1, 3), 4, 12),
            ((1, 3), 3, 144),
            ((2, 3), 3, 72),
            ((2, 3), 2, 1008),
            ((3, 3), 2, 36),
            ((3, 3), 1, 720),
        ],
        _ => return Err(Error::CopiesOutOfRange(t)),
    })
}

/// `(lambda parts, #patterns of type lambda, T_lambda)` per row of the class tables.
pub fn golden_rows(t: usize) -> Result<Vec<(Vec<usize>, u64, u64)>> {
    let rows: &[(&[usize], u64, u64)] = match t {
        3 => &[(&[1, 1, 1], 1, 1), (&[2, 1], 3, 2), (&[3], 1, 6)],
        4 => &[
            (&[1, 1, 1, 1], 1, 1),
            (&[2, 1, 1], 6, 2),
            (&[2, 2], 3, 4),
            (&[3, 1], 4, 6),
            (&[4], 1, 24),
        ],
        5 => &[
            (&[1, 1, 1, 1, 1], 1, 1),
            (&[2, 1, 1, 1], 10, 2),
            (&[2, 2, 1], 15, 4),
            (&[3, 1, 1], 10, 6),
            (&[3, 2], 10, 12),
            (&[4, 1], 5, 24),
            (&[5], 1, 120),
        ],
        6 => &[
            (&[1, 1, 1, 1, 1, 1], 1, 1),
            (&[2, 1, 1, 1, 1], 15, 2),
            (&[2, 2, 1, 1], 45, 4),
            (&[2, 2, 2], 15, 8),
            (&[3, 1, 1, 1], 20, 6),
            (&[3, 2, 1], 60, 12),
            (&[3, 3], 10, 36),
            (&[4, 1, 1], 15, 24),
            (&[4, 2], 15, 48),
            (&[5, 1], 6, 120),
            (&[6], 1, 720),
        ],
        _ => return Err(Error::CopiesOutOfRange(t)),
    };
    Ok(rows
        .iter()
        .map(|(p, c, tl)| (p.to_vec(), *c, *tl))
        .collect())
}

/// Regenerated embedding tables and class tallies versus the golden integers.
pub fn table_checks() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for t in 3..=6 {
        let got = gamma_table(t)?;
        let want = golden_gamma(t)?;
        let bad = got
            .iter()
            .flatten()
            .zip(want.iter().flatten())
            .filter(|(a, b)| a != b)
            .count();
        out.push(Check::exact(
            format!("gamma table S{t}: mismatched cells"),
            bad as f64,
            0.0,
        ));

        let rows = class_tally(t)?;
        let mut bad_rows = 0;
        for (parts, count, t_lambda) in golden_rows(t)? {
            let r = rows.iter().find(|r| r.lambda.parts() == parts.as_slice());
            if r.is_none_or(|r| r.lambda_count != count || r.t_lambda != t_lambda) {
                bad_rows += 1;
            }
        }
        bad_rows += rows.len().abs_diff(golden_rows(t)?.len());
        out.push(Check::exact(
            format!("class table Q{t}: mismatched rows"),
            bad_rows as f64,
            0.0,
        ));

        let got: BTreeMap<_, _> = tally_coefficients(&rows);
        let want: BTreeMap<_, _> = golden_tally(t)?
            .into_iter()
            .map(|(w, k, c)| ((w, k), c))
            .collect();
        let keys: std::collections::BTreeSet<_> = got.keys().chain(want.keys()).collect();
        let bad = keys.iter().filter(|k| got.get(k) != want.get(k)).count();
        out.push(Check::exact(
            format!("class tally Q{t}: mismatched coefficients"),
            bad as f64,
            0.0,
        ));
    }
    out.push(Check::exact(
        "class counts of S6",
        partitions(6).len() as f64,
        11.0,
    ));
    Ok(out)
}

/// No-go witness values `2 d^4`, `d^2 + d^6` and equal diagonal inner products.
pub fn nogo_checks(
    dims: std::ops::RangeInclusive<usize>,
    samples: usize,
    seed: u64,
) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for d in dims {
        let mut rng = RandomSource::new(derive_seed(seed, &[d as u64, 7]));
        let r = nogo_witness(d, samples, &mut rng)?;
        let df = d as f64;
        out.push(Check::exact(
            format!("Tr[M_neg (W0 x W0)] = 2d^4 d={d}"),
            r.target_same,
            2.0 * df.powi(4),
        ));
        out.push(Check::exact(
            format!("Tr[M_neg (W0 x W1)] = d^2+d^6 d={d}"),
            r.target_opposite,
            df.powi(2) + df.powi(6),
        ));
        out.push(Check::close(
            format!("diagonal O: |Tr[O(W0xW0)] - Tr[O(W0xW1)]| over {samples} samples d={d}"),
            r.max_diagonal_difference,
            0.0,
            1e-12,
        ));
    }
    Ok(out)
}

/// Pure-state closed forms versus brute force, exact Gamma_3 / Delta_3 versus brute force.
pub fn variance_checks(seed: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let mut rng = RandomSource::new(derive_seed(seed, &[3]));
    for d in 2..=4 {
        let closed = gamma_pure(d)?;
        let exact = gamma_pure_exact(d);
        let rho = haar_pure(d, &mut rng)?;
        for t in 3..=6 {
            let brute = gamma_brute(&rho, t)?;
            out.push(Check::close(
                format!("Gamma_{t} brute = closed form d={d}"),
                brute,
                closed.get(t),
                1e-9,
            ));
            let sym: BigRational = gamma_pure_symmetric(d, t)?;
            out.push(Check::exact(
                format!("Gamma_{t} symmetric-subspace count = closed form d={d} (exact)"),
                (sym == exact[t - 3]) as u8 as f64,
                1.0,
            ));
        }
        out.push(Check::exact(
            format!("Gamma bounds d={d}"),
            within_bounds(d, &closed.values) as u8 as f64,
            1.0,
        ));
    }
    for d in 2..=3 {
        let mut worst = 0.0f64;
        for k in 0..20 {
            let rho = random_mixed(d, 1, 1 + k % d, &mut rng)?;
            let b = gamma_brute(&rho, 3)?;
            worst = worst.max((gamma3_exact(&rho) - b).abs() / b.abs().max(1.0));
        }
        out.push(Check::close(
            format!("Gamma_3 exact = brute, 20 mixed states d={d} (max rel)"),
            worst,
            0.0,
            1e-8,
        ));
    }
    let mut worst = 0.0f64;
    for k in 0..20 {
        let rho = random_mixed(2, 2, 2 + k % 3, &mut rng)?;
        let b = delta_brute(&rho, 3)?;
        worst = worst.max((delta3_exact(&rho)? - b).abs() / b.abs().max(1.0));
    }
    out.push(Check::close(
        "Delta_3 exact = brute, 20 mixed states 2x2 (max rel)",
        worst,
        0.0,
        1e-8,
    ));
    Ok(out)
}

/// `Tr[(W_0 x W_0) Psi^{(x)3}]` and `Tr[(W_0 x W_1) Psi^{(x)3}]` for the maximally
/// entangled state, by the Schmidt path and (for `d <= dense_max`) dense contraction.
pub fn bell_values(d: usize, dense: bool) -> Result<(f64, f64)> {
    let (w0, w1) = cyclic_pair();
    let rho = bell_state(d)?;
    let f = |a: &Permutation, b: &Permutation| -> Result<f64> {
        Ok(if dense {
            qstate::permutation_expectation_dense(&rho, a, b)?.re
        } else {
            qstate::permutation_expectation(&rho, a, b)?.re
        })
    };
    Ok((f(&w0, &w0)?, f(&w0, &w1)?))
}

pub fn bell_checks(dims: std::ops::RangeInclusive<usize>, dense_max: usize) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for d in dims {
        let df = d as f64;
        let mut paths = vec![("Schmidt", false)];
        if d <= dense_max {
            paths.push(("dense", true));
        }
        for (label, dense) in paths {
            let (same, opp) = bell_values(d, dense)?;
            out.push(Check::close(
                format!("Tr[(W0 x W0) Psi^3] = Tr Psi^3 = 1 ({label}) d={d}"),
                same,
                1.0,
                1e-10,
            ));
            out.push(Check::close(
                format!("Tr[(W0 x W1) Psi^3] = 1/d^2 ({label}) d={d}"),
                opp,
                1.0 / (df * df),
                1e-10,
            ));
        }
    }
    Ok(out)
}
