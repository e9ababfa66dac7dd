//! Experiment sweeps over grids of budgets, dimensions and noise levels.
//!
//! Each repetition runs `max(N_U)` rounds once; smaller `N_U` grid values use the
//! leading rounds of the same run, so all rows of one repetition share randomness.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::{component_rounds, target_value, ProtocolConfig, Scheme, Shots};
use crate::parallel::{map_rounds, Execution};
use crate::qstate::{self, DensityMatrix};
use crate::rng::{derive_seed, RandomSource};

/// Family of input states.
#[derive(Clone, Debug, PartialEq)]
pub enum StateFamily {
    Bell,
    NoisyBell,
    Product,
    HaarPure,
    File(PathBuf),
}

impl StateFamily {
    pub fn name(&self) -> &'static str {
        match self {
            StateFamily::Bell => "bell",
            StateFamily::NoisyBell => "noisy_bell",
            StateFamily::Product => "product",
            StateFamily::HaarPure => "haar_pure",
            StateFamily::File(_) => "file",
        }
    }

    fn uses_p(&self) -> bool {
        matches!(self, StateFamily::NoisyBell)
    }

    /// The state at one grid point; `seed` only matters for `haar_pure`.
    pub fn build(&self, da: usize, db: usize, p: f64, seed: u64) -> Result<DensityMatrix> {
        let square = |what: &str| {
            if da == db {
                Ok(da)
            } else {
                Err(Error::InvalidParameter(format!(
                    "{what} needs d_A = d_B, got {da}x{db}"
                )))
            }
        };
        match self {
            StateFamily::Bell => qstate::bell_state(square("bell")?),
            StateFamily::NoisyBell => qstate::noisy_bell(square("noisy_bell")?, p),
            StateFamily::Product => qstate::pure_product(square("product")?),
            StateFamily::HaarPure => {
                let mut rng = RandomSource::new(seed);
                qstate::haar_pure(da * db, &mut rng)?.with_bipartition(da, db)
            }
            StateFamily::File(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                let rho = DensityMatrix::from_json(&text)?;
                match rho.bipartition() {
                    Some(dims) if dims == (da, db) => Ok(rho),
                    None if rho.dim() == da * db => rho.with_bipartition(da, db),
                    _ => Err(Error::DimensionMismatch(format!(
                        "state file {} does not match dims {da}x{db}",
                        path.display()
                    ))),
                }
            }
        }
    }
}

impl FromStr for StateFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Ok(match s {
            "bell" => StateFamily::Bell,
            "noisy_bell" => StateFamily::NoisyBell,
            "product" => StateFamily::Product,
            "haar_pure" => StateFamily::HaarPure,
            _ => match s.strip_prefix("file:") {
                Some(path) => StateFamily::File(PathBuf::from(path.trim())),
                None => return Err(Error::Parse(format!("unknown state family '{s}'"))),
            },
        })
    }
}

/// Output format of sweep rows.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Format {
    #[default]
    Csv,
    Jsonl,
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "jsonl" | "json-lines" | "jsonlines" => Ok(Format::Jsonl),
            other => Err(Error::Parse(format!("unknown format '{other}'"))),
        }
    }
}

/// A full sweep description.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub family: StateFamily,
    pub scheme: Scheme,
    pub n_u: Vec<u64>,
    pub n_m: Vec<Shots>,
    pub dims: Vec<(usize, usize)>,
    pub p: Vec<f64>,
    pub seed: u64,
    pub repetitions: u64,
    pub execution: Execution,
    /// Adds a `wall_time_s` column (breaks byte-identical reruns).
    pub timing: bool,
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            family: StateFamily::NoisyBell,
            scheme: Scheme::Neg,
            n_u: vec![32, 64, 128, 256],
            n_m: vec![Shots::Finite(50)],
            dims: vec![(2, 2)],
            p: vec![0.3],
            seed: 0,
            repetitions: 10,
            execution: Execution::Parallel,
            timing: false,
            out: None,
            format: Format::Csv,
        }
    }
}

fn key_err(key: &str, msg: impl fmt::Display) -> Error {
    Error::InvalidParameter(format!("{key}: {msg}"))
}

fn parse_list<T>(key: &str, value: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .enumerate()
        .map(|(i, s)| f(s).map_err(|e| key_err(&format!("{key}[{i}]"), e)))
        .collect()
}

fn parse_u64(s: &str) -> Result<u64> {
    s.parse()
        .map_err(|_| Error::Parse(format!("'{s}' is not a non-negative integer")))
}

/// Parses `a, b, c` or a geometric range `start..endxfactor` (e.g. `32..1024x2`).
pub fn parse_counts(key: &str, value: &str) -> Result<Vec<u64>> {
    if let Some((start, rest)) = value.split_once("..") {
        let (end, factor) = rest.split_once('x').unwrap_or((rest, "2"));
        let (start, end, factor) = (
            parse_u64(start.trim()).map_err(|e| key_err(key, e))?,
            parse_u64(end.trim()).map_err(|e| key_err(key, e))?,
            parse_u64(factor.trim()).map_err(|e| key_err(key, e))?,
        );
        if start == 0 || factor < 2 || end < start {
            return Err(key_err(key, format!("bad range '{value}'")));
        }
        let mut out = Vec::new();
        let mut v = start;
        while v <= end {
            out.push(v);
            v = v.saturating_mul(factor);
        }
        return Ok(out);
    }
    parse_list(key, value, parse_u64)
}

fn parse_dims(s: &str) -> Result<(usize, usize)> {
    let (a, b) = s
        .split_once(['x', 'X', '*'])
        .ok_or_else(|| Error::Parse(format!("'{s}' is not of the form AxB")))?;
    let p = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|_| Error::Parse(format!("bad dimension '{t}'")))
    };
    Ok((p(a)?, p(b)?))
}

fn parse_bool(s: &str) -> Result<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        other => Err(Error::Parse(format!("'{other}' is not a boolean"))),
    }
}

/// Parses the plain-text config format: `key = value` lines, optional `[section]`
/// headers, `#` or `;` comments. Keys are returned as `section.key`; keys before
/// any header belong to `sweep`.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut section = String::from("sweep");
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split(['#', ';']).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = name.trim().to_ascii_lowercase();
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected 'key = value'", lineno + 1)))?;
        out.insert(
            format!("{section}.{}", k.trim().to_ascii_lowercase()),
            v.trim().to_string(),
        );
    }
    Ok(out)
}

impl SweepSpec {
    /// Applies one `section.key = value` setting; errors name the key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = if key.contains('.') {
            key.to_string()
        } else {
            format!("sweep.{key}")
        };
        let k = key.as_str();
        let wrap = |e: Error| key_err(k, e);
        match k {
            "sweep.family" | "sweep.state" => self.family = value.parse().map_err(wrap)?,
            "sweep.state_file" => self.family = StateFamily::File(PathBuf::from(value)),
            "sweep.scheme" => self.scheme = value.parse().map_err(wrap)?,
            "sweep.n_u" => self.n_u = parse_counts(k, value)?,
            "sweep.n_m" => self.n_m = parse_list(k, value, |s| s.parse::<Shots>())?,
            "sweep.dims" => self.dims = parse_list(k, value, parse_dims)?,
            "sweep.p" => {
                self.p = parse_list(k, value, |s| {
                    s.parse::<f64>()
                        .map_err(|_| Error::Parse(format!("'{s}' is not a number")))
                })?
            }
            "sweep.seed" => self.seed = parse_u64(value).map_err(wrap)?,
            "sweep.repetitions" | "sweep.n_av" => {
                self.repetitions = parse_u64(value).map_err(wrap)?
            }
            "sweep.execution" => {
                self.execution = match value.trim() {
                    "parallel" => Execution::Parallel,
                    "sequential" => Execution::Sequential,
                    other => return Err(key_err(k, format!("unknown execution '{other}'"))),
                }
            }
            "output.path" | "sweep.out" => self.out = Some(PathBuf::from(value)),
            "output.format" | "sweep.format" => self.format = value.parse().map_err(wrap)?,
            "output.timing" | "sweep.timing" => self.timing = parse_bool(value).map_err(wrap)?,
            _ => return Err(key_err(k, "unknown key")),
        }
        Ok(())
    }

    /// Builds a spec from defaults plus parsed config settings, then validates it.
    pub fn from_config(settings: &BTreeMap<String, String>) -> Result<Self> {
        let mut spec = SweepSpec::default();
        for (k, v) in settings {
            spec.set(k, v)?;
        }
        spec.validate()?;
        Ok(spec)
    }

    /// Checks the grid and every point's protocol configuration.
    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(key_err("sweep.repetitions", "must be at least 1"));
        }
        for (key, empty) in [
            ("sweep.n_u", self.n_u.is_empty()),
            ("sweep.n_m", self.n_m.is_empty()),
            ("sweep.dims", self.dims.is_empty()),
            ("sweep.p", self.p.is_empty()),
        ] {
            if empty {
                return Err(key_err(key, "grid is empty"));
            }
        }
        if !self.family.uses_p() && self.p.len() > 1 {
            return Err(key_err(
                "sweep.p",
                format!("family {} takes no noise grid", self.family.name()),
            ));
        }
        for (i, &p) in self.p.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return Err(key_err(
                    &format!("sweep.p[{i}]"),
                    format!("{p} outside [0,1]"),
                ));
            }
        }
        for (i, &n_u) in self.n_u.iter().enumerate() {
            if n_u < 2 {
                return Err(key_err(
                    &format!("sweep.n_u[{i}]"),
                    "need at least 2 rounds",
                ));
            }
        }
        for (i, &(da, db)) in self.dims.iter().enumerate() {
            for (j, &n_m) in self.n_m.iter().enumerate() {
                let (pa, pb) = protocol_dims(self.scheme, da, db);
                let cfg = ProtocolConfig::new(self.scheme, pa, pb, 2, n_m, self.seed);
                if let Err(e) = cfg.validate() {
                    let key = if matches!(n_m, Shots::Finite(n) if n < 3) {
                        format!("sweep.n_m[{j}]")
                    } else {
                        format!("sweep.dims[{i}]")
                    };
                    return Err(key_err(&key, e));
                }
            }
            if !matches!(self.family, StateFamily::HaarPure | StateFamily::File(_)) && da != db {
                return Err(key_err(
                    &format!("sweep.dims[{i}]"),
                    "family needs d_A = d_B",
                ));
            }
        }
        Ok(())
    }
}

/// One aggregated output row.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub family: String,
    pub scheme: Scheme,
    pub d_a: usize,
    pub d_b: usize,
    pub p: f64,
    pub n_m: Shots,
    pub n_u: u64,
    pub repetitions: u64,
    pub oracle: f64,
    pub mean_estimate: f64,
    pub mean_abs_error: f64,
    /// Standard error of `mean_estimate` across repetitions.
    pub std_error: f64,
    /// Wall time of the grid point's repetitions (all `N_U` rows of the point).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

impl SweepRow {
    pub fn header(timing: bool) -> Vec<&'static str> {
        let mut h = vec![
            "family",
            "scheme",
            "d_a",
            "d_b",
            "p",
            "n_m",
            "n_u",
            "repetitions",
            "oracle",
            "mean_estimate",
            "mean_abs_error",
            "std_error",
        ];
        if timing {
            h.push("wall_time_s");
        }
        h
    }

    /// Field values in [`SweepRow::header`] order.
    pub fn record(&self, timing: bool) -> Vec<String> {
        let mut r = vec![
            self.family.clone(),
            self.scheme.name().to_string(),
            self.d_a.to_string(),
            self.d_b.to_string(),
            self.p.to_string(),
            self.n_m.to_string(),
            self.n_u.to_string(),
            self.repetitions.to_string(),
            self.oracle.to_string(),
            self.mean_estimate.to_string(),
            self.mean_abs_error.to_string(),
            self.std_error.to_string(),
        ];
        if timing {
            r.push(self.wall_time_s.map(|t| t.to_string()).unwrap_or_default());
        }
        r
    }
}

/// Protocol dimensions of a grid point: the single scheme sees one party of dimension `d_A d_B`.
pub fn protocol_dims(scheme: Scheme, da: usize, db: usize) -> (usize, usize) {
    if scheme == Scheme::Single {
        (da * db, 1)
    } else {
        (da, db)
    }
}

/// Seed of repetition `rep` at grid point `(dims, p, n_m)` indices.
pub fn point_seed(seed: u64, dims: usize, p: usize, n_m: usize, rep: u64) -> u64 {
    derive_seed(seed, &[dims as u64, p as u64, n_m as u64, rep])
}

/// Estimates for each prefix length in `n_u` of one configuration's rounds.
pub fn prefix_estimates(rounds: &[(f64, Vec<f64>)], n_u: &[u64]) -> Vec<f64> {
    let prefix: Vec<Vec<f64>> = rounds
        .iter()
        .map(|(_, v)| {
            std::iter::once(0.0)
                .chain(v.iter().scan(0.0, |s, x| {
                    *s += x;
                    Some(*s)
                }))
                .collect()
        })
        .collect();
    n_u.iter()
        .map(|&n| {
            rounds
                .iter()
                .zip(&prefix)
                .map(|((w, _), c)| w * c[n as usize] / n as f64)
                .sum()
        })
        .collect()
}

/// Runs every grid point and repetition; rows are ordered by dims, p, `N_M`, `N_U`.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let max_nu = *spec.n_u.iter().max().expect("validated");
    let mut rows = Vec::new();
    for (di, &(da, db)) in spec.dims.iter().enumerate() {
        for (pi, &p) in spec.p.iter().enumerate() {
            let rho =
                spec.family
                    .build(da, db, p, derive_seed(spec.seed, &[u64::MAX, di as u64]))?;
            let oracle = target_value(&rho, spec.scheme)?;
            let (pa, pb) = protocol_dims(spec.scheme, da, db);
            for (mi, &n_m) in spec.n_m.iter().enumerate() {
                let start = Instant::now();
                let per_rep: Vec<Result<Vec<f64>>> =
                    map_rounds(spec.repetitions, spec.execution, |rep| {
                        let cfg = ProtocolConfig::new(
                            spec.scheme,
                            pa,
                            pb,
                            max_nu,
                            n_m,
                            point_seed(spec.seed, di, pi, mi, rep),
                        )
                        .with_aux(max_nu, n_m)
                        .with_execution(Execution::Sequential);
                        Ok(prefix_estimates(&component_rounds(&rho, &cfg)?, &spec.n_u))
                    });
                let per_rep = per_rep.into_iter().collect::<Result<Vec<_>>>()?;
                let wall = start.elapsed().as_secs_f64();
                for (ui, &n_u) in spec.n_u.iter().enumerate() {
                    let est: Vec<f64> = per_rep.iter().map(|r| r[ui]).collect();
                    let (mean, se) = crate::estimator::mean_and_se(&est);
                    let mae =
                        est.iter().map(|e| (e - oracle).abs()).sum::<f64>() / est.len() as f64;
                    rows.push(SweepRow {
                        family: spec.family.name().to_string(),
                        scheme: spec.scheme,
                        d_a: da,
                        d_b: db,
                        p,
                        n_m,
                        n_u,
                        repetitions: spec.repetitions,
                        oracle,
                        mean_estimate: mean,
                        mean_abs_error: mae,
                        std_error: if se.is_nan() { 0.0 } else { se },
                        wall_time_s: spec.timing.then_some(wall),
                    });
                }
            }
        }
    }
    Ok(rows)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::estimate;

    fn small() -> SweepSpec {
        SweepSpec {
            scheme: Scheme::Single,
            n_u: vec![4, 8],
            n_m: vec![Shots::Finite(6), Shots::Exact],
            dims: vec![(2, 2)],
            p: vec![0.0, 0.5],
            repetitions: 3,
            ..SweepSpec::default()
        }
    }

    #[test]
    fn config_parsing_and_overrides() {
        let text = "# fig\n[sweep]\nfamily = noisy_bell\nn_u = 32..256x2\nn_m = inf, 50\ndims = 5x5\np = 0, 0.3\nrepetitions = 4\n[output]\nformat = jsonl ; trailing\n";
        let settings = parse_config(text).unwrap();
        let spec = SweepSpec::from_config(&settings).unwrap();
        assert_eq!(spec.n_u, vec![32, 64, 128, 256]);
        assert_eq!(spec.n_m, vec![Shots::Exact, Shots::Finite(50)]);
        assert_eq!(spec.dims, vec![(5, 5)]);
        assert_eq!(spec.format, Format::Jsonl);
        assert_eq!(spec.repetitions, 4);
    }

    #[test]
    fn errors_name_the_key() {
        let mut spec = small();
        spec.repetitions = 0;
        assert!(spec
            .validate()
            .unwrap_err()
            .to_string()
            .contains("sweep.repetitions"));
        let e = SweepSpec::from_config(&parse_config("n_m = 50, 2").unwrap()).unwrap_err();
        assert!(e.to_string().contains("sweep.n_m[1]"), "{e}");
        let e = small().set("sweep.bogus", "1").unwrap_err();
        assert!(e.to_string().contains("sweep.bogus"));
        let e =
            SweepSpec::from_config(&parse_config("[sweep]\np = 0.3, 1.5").unwrap()).unwrap_err();
        assert!(e.to_string().contains("sweep.p[1]"), "{e}");
    }

    #[test]
    fn deterministic_and_thread_independent() {
        let a = run_sweep(&small()).unwrap();
        let b = run_sweep(&SweepSpec {
            execution: Execution::Sequential,
            ..small()
        })
        .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2 * 2 * 2);
        assert!(a
            .iter()
            .all(|r| r.mean_abs_error >= 0.0 && r.std_error >= 0.0));
    }

    #[test]
    fn longest_prefix_matches_estimate() {
        let spec = small();
        let rows = run_sweep(&spec).unwrap();
        let rho = qstate::noisy_bell(2, 0.0).unwrap();
        let mut total = 0.0;
        for rep in 0..spec.repetitions {
            let cfg = ProtocolConfig::new(
                spec.scheme,
                4,
                1,
                8,
                Shots::Finite(6),
                point_seed(spec.seed, 0, 0, 0, rep),
            )
            .with_aux(8, Shots::Finite(6));
            total += estimate(&rho, &cfg).unwrap().mean;
        }
        let row = rows
            .iter()
            .find(|r| r.p == 0.0 && r.n_m == Shots::Finite(6) && r.n_u == 8)
            .unwrap();
        assert!((row.mean_estimate - total / spec.repetitions as f64).abs() < 1e-12);
    }

    #[test]
    fn errors_shrink_with_mixedness() {
        let spec = SweepSpec {
            n_u: vec![32],
            n_m: vec![Shots::Exact],
            dims: vec![(3, 3)],
            p: vec![0.0, 0.3, 0.6],
            repetitions: 20,
            seed: 4,
            ..SweepSpec::default()
        };
        let rows = run_sweep(&spec).unwrap();
        assert!(
            rows.windows(2)
                .all(|w| w[1].mean_abs_error <= w[0].mean_abs_error),
            "{rows:?}"
        );
    }

    #[test]
    fn slope_of_power_law() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-0.5)).collect();
        assert!((loglog_slope(&xs, &ys) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn records_match_header() {
        let rows = run_sweep(&small()).unwrap();
        assert_eq!(rows[0].record(false).len(), SweepRow::header(false).len());
        assert_eq!(
            SweepRow::header(true).len(),
            SweepRow::header(false).len() + 1
        );
    }
}
