//! Randomized-measurement protocol engines.
//!
//! Each round draws Haar unitaries, forms Born probabilities (computational or
//! Bell basis), samples `N_M` shots and applies a triple U-statistic with the
//! scheme's post-processing observable. Exact mode (`N_M = inf`) replaces the
//! U-statistic by its expectation under the exact probabilities. Composite
//! schemes combine two independently budgeted base runs.

pub mod model;
pub mod ustat;
pub mod variance;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::observables::{self, o_corr, o_minus_minus, o_plus, BellObservable};
use crate::parallel::{map_rounds, Execution};
use crate::qstate::{self, DensityMatrix};
use crate::rng::{derive_seed, RandomSource};

pub use model::{ErrorModel, VariancePoint};
pub use ustat::{
    delta_terms, expectation_ordered, expectation_symmetric, u_statistic_brute,
    u_statistic_ordered, u_statistic_symmetric, u_statistic_triples, DeltaKernel, JointTable,
};
pub use variance::*;

/// Measurement scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// `U rho U^dagger` on the whole system, `O_+`; targets `Tr rho^3`.
    Single,
    /// `U_A (x) U_B`, `O_+ (x) O_+`; targets `Tr rho^3 + Tr (rho^{T_B})^3`.
    Bilocal,
    /// `U_AB`, `O_+^{AB}`; targets `Tr rho_AB^3`.
    Global,
    /// `U_A (x) U_B` then Bell measurement, `O_--`; targets `Tr[(M_- (x) M_-) rho^{(x)3}]`.
    Bell,
    /// `U_A (x) U_B`, `O_A (x) O_B`; targets `Tr[rho_AB (rho_A (x) rho_B)]`.
    Correlation,
    /// Bilocal minus global; targets `Tr (rho^{T_B})^3`.
    Neg,
    /// `(M_++ - M_--)/4` from bilocal and Bell runs; targets `Tr (rho^{T_B})^3`.
    NegBell,
}

impl Scheme {
    pub const ALL: [Scheme; 7] = [
        Scheme::Single,
        Scheme::Bilocal,
        Scheme::Global,
        Scheme::Bell,
        Scheme::Correlation,
        Scheme::Neg,
        Scheme::NegBell,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Single => "single",
            Scheme::Bilocal => "bilocal",
            Scheme::Global => "global",
            Scheme::Bell => "bell",
            Scheme::Correlation => "correlation",
            Scheme::Neg => "neg",
            Scheme::NegBell => "neg_bell",
        }
    }

    /// Identifier of the estimated quantity.
    pub fn target(self) -> &'static str {
        match self {
            Scheme::Single | Scheme::Global => "tr_rho3",
            Scheme::Bilocal => "tr_rho3_plus_tr_pt3",
            Scheme::Bell => "tr_mm_rho3",
            Scheme::Correlation => "tr_rho_ab_rho_a_rho_b",
            Scheme::Neg | Scheme::NegBell => "tr_pt3",
        }
    }

    pub fn is_composite(self) -> bool {
        matches!(self, Scheme::Neg | Scheme::NegBell)
    }

    pub fn is_bipartite(self) -> bool {
        self != Scheme::Single
    }

    /// `(base scheme, weight, uses auxiliary budget)` per component.
    pub fn components(self) -> Vec<(Scheme, f64, bool)> {
        match self {
            Scheme::Neg => vec![(Scheme::Bilocal, 1.0, true), (Scheme::Global, -1.0, false)],
            Scheme::NegBell => vec![(Scheme::Bilocal, 0.5, true), (Scheme::Bell, -0.25, false)],
            s => vec![(s, 1.0, false)],
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Parse(format!("unknown scheme '{s}'")))
    }
}

/// Shots per round: a finite count or the exact-probability limit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Shots {
    Finite(u64),
    Exact,
}

impl Shots {
    pub fn finite(self) -> Option<u64> {
        match self {
            Shots::Finite(n) => Some(n),
            Shots::Exact => None,
        }
    }

    pub fn is_exact(self) -> bool {
        self == Shots::Exact
    }
}

impl fmt::Display for Shots {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shots::Finite(n) => write!(f, "{n}"),
            Shots::Exact => f.write_str("inf"),
        }
    }
}

impl FromStr for Shots {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        if matches!(t.as_str(), "inf" | "infinity" | "exact" | "∞") {
            return Ok(Shots::Exact);
        }
        t.parse::<u64>()
            .map(Shots::Finite)
            .map_err(|_| Error::Parse(format!("invalid shot count '{s}'")))
    }
}

impl Serialize for Shots {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Shots::Finite(n) => s.serialize_u64(*n),
            Shots::Exact => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Shots {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            N(u64),
            S(String),
        }
        match Repr::deserialize(d)? {
            Repr::N(n) => Ok(Shots::Finite(n)),
            Repr::S(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Number of rounds and shots per round.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub n_u: u64,
    pub n_m: Shots,
}

/// Full protocol configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub scheme: Scheme,
    pub d_a: usize,
    /// 1 for the single scheme.
    pub d_b: usize,
    pub n_u: u64,
    pub n_m: Shots,
    pub seed: u64,
    /// Bilocal budget `(N_U', N_M')` of composite schemes; defaults to `(N_U, N_M)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aux: Option<Budget>,
    #[serde(default)]
    pub execution: Execution,
}

impl ProtocolConfig {
    pub fn new(scheme: Scheme, d_a: usize, d_b: usize, n_u: u64, n_m: Shots, seed: u64) -> Self {
        Self {
            scheme,
            d_a,
            d_b,
            n_u,
            n_m,
            seed,
            aux: None,
            execution: Execution::default(),
        }
    }

    /// Dimensions taken from the state: the single scheme treats it as one system.
    pub fn for_state(
        scheme: Scheme,
        rho: &DensityMatrix,
        n_u: u64,
        n_m: Shots,
        seed: u64,
    ) -> Result<Self> {
        let (da, db) = if scheme.is_bipartite() {
            rho.dims()?
        } else {
            (rho.dim(), 1)
        };
        Ok(Self::new(scheme, da, db, n_u, n_m, seed))
    }

    pub fn with_aux(mut self, n_u: u64, n_m: Shots) -> Self {
        self.aux = Some(Budget { n_u, n_m });
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn main_budget(&self) -> Budget {
        Budget {
            n_u: self.n_u,
            n_m: self.n_m,
        }
    }

    pub fn aux_budget(&self) -> Budget {
        self.aux.unwrap_or_else(|| self.main_budget())
    }

    fn budgets(&self) -> Vec<Budget> {
        if self.scheme.is_composite() {
            vec![self.main_budget(), self.aux_budget()]
        } else {
            vec![self.main_budget()]
        }
    }

    /// True when some budget uses `N_M` in `{3, 4, 5}`, where the U-statistic prefactors are large.
    pub fn degenerate(&self) -> bool {
        self.budgets()
            .iter()
            .any(|b| matches!(b.n_m, Shots::Finite(3..=5)))
    }

    /// Checks the invariants of the configuration.
    pub fn validate(&self) -> Result<()> {
        for b in self.budgets() {
            if b.n_u < 1 {
                return Err(Error::InvalidParameter("N_U must be at least 1".into()));
            }
            if let Shots::Finite(n) = b.n_m {
                if n < 3 {
                    return Err(Error::TooFewShots(n as usize));
                }
            }
        }
        if self.d_a < 2 {
            return Err(Error::InvalidParameter(format!(
                "d_A={} must be >= 2",
                self.d_a
            )));
        }
        match self.scheme {
            Scheme::Single => {
                if self.d_b != 1 {
                    return Err(Error::InvalidParameter("single scheme uses d_B = 1".into()));
                }
            }
            s => {
                if self.d_b < 2 {
                    return Err(Error::InvalidParameter(format!(
                        "d_B={} must be >= 2",
                        self.d_b
                    )));
                }
                if matches!(s, Scheme::Bell | Scheme::NegBell) && self.d_a != self.d_b {
                    return Err(Error::SchemeMismatch(
                        "Bell measurement needs d_A = d_B".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Checks that `rho` fits the scheme and dimensions.
    pub fn check_state(&self, rho: &DensityMatrix) -> Result<()> {
        if rho.dim() != self.d_a * self.d_b {
            return Err(Error::DimensionMismatch(format!(
                "state of dimension {} for d_A x d_B = {} x {}",
                rho.dim(),
                self.d_a,
                self.d_b
            )));
        }
        if self.scheme.is_bipartite() {
            let dims = rho.dims()?;
            if dims != (self.d_a, self.d_b) {
                return Err(Error::SchemeMismatch(format!(
                    "state bipartition {dims:?} differs from ({}, {})",
                    self.d_a, self.d_b
                )));
            }
        }
        Ok(())
    }
}

enum Kernel {
    /// Half the symmetric `O_+` U-statistic on the joint alphabet.
    PlusHalf([f64; 3]),
    /// Scaled ordered U-statistic of a product delta kernel.
    Delta(DeltaKernel, f64),
    /// Ordered U-statistic over Bell labels, with an optional coefficient cache.
    Bell(Box<BellObservable>, Option<Vec<f64>>),
}

/// Prepared single-scheme round evaluator.
pub struct RoundEngine {
    scheme: Scheme,
    da: usize,
    db: usize,
    n_m: Shots,
    kernel: Kernel,
}

const BELL_CACHE_LIMIT: usize = 1 << 20;

impl RoundEngine {
    /// Builds the post-processing observable of a base scheme.
    pub fn new(scheme: Scheme, da: usize, db: usize, n_m: Shots) -> Result<Self> {
        let kernel = match scheme {
            Scheme::Single | Scheme::Global => {
                let o = o_plus(da * db)?;
                match *o.rule() {
                    observables::Rule::Weight(w) => Kernel::PlusHalf(w),
                    _ => unreachable!("O_+ is a weight rule"),
                }
            }
            Scheme::Bilocal => {
                let k =
                    DeltaKernel::product(&delta_terms(&o_plus(da)?), &delta_terms(&o_plus(db)?));
                Kernel::Delta(k, 0.5)
            }
            Scheme::Correlation => {
                let (a, b) = o_corr(da, db)?;
                Kernel::Delta(
                    DeltaKernel::product(&delta_terms(&a), &delta_terms(&b)),
                    1.0,
                )
            }
            Scheme::Bell => {
                if da != db {
                    return Err(Error::SchemeMismatch(
                        "Bell measurement needs d_A = d_B".into(),
                    ));
                }
                let o = o_minus_minus(da)?;
                let l = da * da;
                let cache = (l * l * l <= BELL_CACHE_LIMIT).then(|| {
                    let mut c = Vec::with_capacity(l * l * l);
                    for x in 0..l {
                        for y in 0..l {
                            for z in 0..l {
                                c.push(o.coefficient_indices(x, y, z));
                            }
                        }
                    }
                    c
                });
                Kernel::Bell(Box::new(o), cache)
            }
            s => return Err(Error::SchemeMismatch(format!("{s} is a composite scheme"))),
        };
        Ok(Self {
            scheme,
            da,
            db,
            n_m,
            kernel,
        })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Outcome probabilities after the round's random unitaries.
    pub fn probabilities(&self, rho: &DensityMatrix, rng: &mut RandomSource) -> Result<Vec<f64>> {
        match self.scheme {
            Scheme::Single | Scheme::Global => {
                let u = qstate::haar_unitary(self.da * self.db, rng);
                qstate::born_probabilities(rho, &[&u])
            }
            Scheme::Bell => {
                let (ua, ub) = self.local_unitaries(rng);
                qstate::bell_probabilities(rho, &ua, &ub)
            }
            _ => {
                let (ua, ub) = self.local_unitaries(rng);
                qstate::born_probabilities(rho, &[&ua, &ub])
            }
        }
    }

    fn local_unitaries(&self, rng: &mut RandomSource) -> (CMatrix, CMatrix) {
        let ua = qstate::haar_unitary(self.da, rng);
        let ub = qstate::haar_unitary(self.db, rng);
        (ua, ub)
    }

    /// Post-processed value of a shot histogram.
    pub fn value_from_counts(&self, counts: &[u64]) -> Result<f64> {
        match &self.kernel {
            Kernel::PlusHalf(w) => Ok(0.5 * u_statistic_symmetric(counts, *w)?),
            Kernel::Delta(k, s) => {
                Ok(s * k.u_statistic(&JointTable::from_counts(counts, self.da, self.db)?)?)
            }
            Kernel::Bell(o, cache) => {
                let l = self.da * self.da;
                match cache {
                    Some(c) => u_statistic_ordered(counts, |x, y, z| c[(x * l + y) * l + z]),
                    None => u_statistic_ordered(counts, |x, y, z| o.coefficient_indices(x, y, z)),
                }
            }
        }
    }

    /// Exact-mode value `sum_s O(s) p(s1) p(s2) p(s3)`.
    pub fn value_from_probabilities(&self, probs: &[f64]) -> Result<f64> {
        match &self.kernel {
            Kernel::PlusHalf(w) => Ok(0.5 * expectation_symmetric(probs, *w)),
            Kernel::Delta(k, s) => {
                Ok(s * k.expectation(&JointTable::new(probs, self.da, self.db)?))
            }
            Kernel::Bell(o, cache) => {
                let l = self.da * self.da;
                Ok(match cache {
                    Some(c) => expectation_ordered(probs, |x, y, z| c[(x * l + y) * l + z]),
                    None => expectation_ordered(probs, |x, y, z| o.coefficient_indices(x, y, z)),
                })
            }
        }
    }

    /// One round: unitaries, probabilities, shots (unless exact), U-statistic.
    pub fn round(&self, rho: &DensityMatrix, rng: &mut RandomSource) -> Result<f64> {
        let probs = self.probabilities(rho, rng)?;
        match self.n_m {
            Shots::Exact => self.value_from_probabilities(&probs),
            Shots::Finite(n) => {
                let counts = qstate::sample_counts(&probs, n, rng);
                self.value_from_counts(&counts)
            }
        }
    }
}

/// Seed of component `k` of a configuration.
pub fn component_seed(seed: u64, k: usize) -> u64 {
    derive_seed(seed, &[k as u64])
}

/// One round of every component of `config`: round `r` of component `k` draws
/// from stream `r` keyed by [`component_seed`]. Values are returned per component.
pub fn run_round(rho: &DensityMatrix, config: &ProtocolConfig, round: u64) -> Result<Vec<f64>> {
    config.validate()?;
    config.check_state(rho)?;
    let budgets = [config.aux_budget(), config.main_budget()];
    config
        .scheme
        .components()
        .into_iter()
        .enumerate()
        .map(|(k, (base, _, aux))| {
            let b = if aux { budgets[0] } else { budgets[1] };
            let engine = RoundEngine::new(base, config.d_a, config.d_b, b.n_m)?;
            let mut rng = RandomSource::with_stream(component_seed(config.seed, k), round);
            engine.round(rho, &mut rng)
        })
        .collect()
}

/// Summary of one base-scheme run inside an estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentResult {
    pub scheme: Scheme,
    pub weight: f64,
    pub n_u: u64,
    pub n_m: Shots,
    pub per_round: Vec<f64>,
    pub mean: f64,
    pub std_error: f64,
}

/// Result of [`estimate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub config: ProtocolConfig,
    pub target: String,
    /// Per-round values of a base scheme; empty for composites (see `components`).
    pub per_round: Vec<f64>,
    pub mean: f64,
    pub std_error: f64,
    pub oracle: Option<f64>,
    /// Set when some `N_M` lies in `{3, 4, 5}`.
    pub degenerate: bool,
    pub components: Vec<ComponentResult>,
}

impl EstimateResult {
    /// JSON with or without the per-round arrays.
    pub fn to_json(&self, include_rounds: bool) -> Value {
        let mut v = serde_json::to_value(self).expect("serializable");
        if !include_rounds {
            v.as_object_mut().unwrap().remove("per_round");
            for c in v["components"].as_array_mut().unwrap() {
                c.as_object_mut().unwrap().remove("per_round");
            }
        }
        v
    }

    /// `|mean - oracle|` in standard errors, when the oracle is known.
    pub fn z_score(&self) -> Option<f64> {
        self.oracle.map(|o| (self.mean - o).abs() / self.std_error)
    }
}

/// Mean and standard error `std / sqrt(n)` (sample standard deviation).
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Exact value of the quantity a scheme estimates.
pub fn target_value(rho: &DensityMatrix, scheme: Scheme) -> Result<f64> {
    match scheme {
        Scheme::Single => Ok(qstate::moment(rho, 3)),
        Scheme::Global => {
            rho.dims()?;
            Ok(qstate::moment(rho, 3))
        }
        Scheme::Bilocal => Ok(qstate::moment(rho, 3) + qstate::pt_moment(rho, 3)?),
        Scheme::Bell => {
            Ok(observables::expectation(&observables::m_neg_targets().m_minus_minus, rho)?.re)
        }
        Scheme::Correlation => qstate::correlation_numerator(rho),
        Scheme::Neg | Scheme::NegBell => qstate::negativity_moment(rho),
    }
}

/// Rounds of one component of `config` (base scheme `base`, budget `b`).
fn run_component(
    rho: &DensityMatrix,
    config: &ProtocolConfig,
    k: usize,
    base: Scheme,
    b: Budget,
) -> Result<Vec<f64>> {
    let engine = RoundEngine::new(base, config.d_a, config.d_b, b.n_m)?;
    let seed = component_seed(config.seed, k);
    map_rounds(b.n_u, config.execution, |r| {
        let mut rng = RandomSource::with_stream(seed, r);
        engine.round(rho, &mut rng)
    })
    .into_iter()
    .collect()
}

/// Per-component `(weight, per-round values)` of `config`, in component order.
/// The estimate is `sum_k weight_k * mean(values_k)`.
pub fn component_rounds(
    rho: &DensityMatrix,
    config: &ProtocolConfig,
) -> Result<Vec<(f64, Vec<f64>)>> {
    config.validate()?;
    config.check_state(rho)?;
    config
        .scheme
        .components()
        .into_iter()
        .enumerate()
        .map(|(k, (base, weight, aux))| {
            let b = if aux {
                config.aux_budget()
            } else {
                config.main_budget()
            };
            Ok((weight, run_component(rho, config, k, base, b)?))
        })
        .collect()
}

/// Runs every round of `config` on `rho` and aggregates in round order.
pub fn estimate(rho: &DensityMatrix, config: &ProtocolConfig) -> Result<EstimateResult> {
    let rounds = component_rounds(rho, config)?;
    let mut components = Vec::new();
    for ((base, _, aux), (weight, per_round)) in config.scheme.components().into_iter().zip(rounds)
    {
        let b = if aux {
            config.aux_budget()
        } else {
            config.main_budget()
        };
        let (mean, std_error) = mean_and_se(&per_round);
        components.push(ComponentResult {
            scheme: base,
            weight,
            n_u: b.n_u,
            n_m: b.n_m,
            per_round,
            mean,
            std_error,
        });
    }
    let mean = components.iter().map(|c| c.weight * c.mean).sum();
    let std_error = components
        .iter()
        .map(|c| (c.weight * c.std_error).powi(2))
        .sum::<f64>()
        .sqrt();
    let per_round = if config.scheme.is_composite() {
        Vec::new()
    } else {
        std::mem::take(&mut components[0].per_round)
    };
    if !config.scheme.is_composite() {
        components.clear();
    }
    Ok(EstimateResult {
        config: config.clone(),
        target: config.scheme.target().to_string(),
        per_round,
        mean,
        std_error,
        oracle: target_value(rho, config.scheme).ok(),
        degenerate: config.degenerate(),
        components,
    })
}

/// Two-sided Bernstein tail bound `2 exp[-N_U eps^2 / (2 nu + 2 eps / 3)]`.
pub fn bernstein_bound(epsilon: f64, n_u: u64, nu: f64) -> f64 {
    2.0 * (-(n_u as f64) * epsilon * epsilon / (2.0 * nu + 2.0 * epsilon / 3.0)).exp()
}

/// Advisory budget `N_M = ceil(D^{2/3})`, `N_U = ceil(1/eps^2)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Requirements {
    pub n_m: u64,
    pub n_u: u64,
    pub n_total: u64,
}

pub fn asymptotic_requirements(dim: usize, epsilon: f64) -> Result<Requirements> {
    if dim < 2 {
        return Err(Error::InvalidParameter(format!("D={dim} must be >= 2")));
    }
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::InvalidParameter("epsilon must be positive".into()));
    }
    // round away float noise before the ceiling (25^{2/3} is not an integer, 8^{2/3} is)
    let ceil = |x: f64| {
        let r = x.round();
        if (x - r).abs() < 1e-9 {
            r as u64
        } else {
            x.ceil() as u64
        }
    };
    let n_m = ceil((dim as f64).powf(2.0 / 3.0));
    let n_u = ceil(1.0 / (epsilon * epsilon));
    Ok(Requirements {
        n_m,
        n_u,
        n_total: n_m * n_u,
    })
}
