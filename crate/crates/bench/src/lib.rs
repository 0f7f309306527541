//! Seeded experiment harness for the approximate tangent-cone projection.
//!
//! Each pair `(X, Y)` is drawn from its own ChaCha8 stream keyed by
//! `(seed, pair index)`, so the output does not depend on how pairs are
//! scheduled across threads.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use ttcone::oracle::{exact_project_grid, exact_project_multistart};
use ttcone::projection::{angle_value, approx_project, kutschan_omega, omega_bound, omega_ratio};
use ttcone::tensor3::Dims;
use ttcone::ttd::{canonicalize, random_tensor, random_tt_with_rng};
use ttcone::{AlternatingOptions, CanonicalTtPair, Tensor3};

pub use ttcone::t3d::{load as load_tensor, store as store_tensor};

pub const CSV_HEADER: [&str; 11] = [
    "pair",
    "angle_approx",
    "angle_oracle",
    "norm_ytilde",
    "norm_yhat",
    "norm_y",
    "omega_eq4",
    "omega_s4",
    "omega_kutschan",
    "iters",
    "wall_ms",
];

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("pair {pair}: {source}")]
    Numerical {
        pair: usize,
        #[source]
        source: ttcone::Error,
    },
    #[error(transparent)]
    Core(#[from] ttcone::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl BenchError {
    /// Process exit code: 2 for configuration or input-format problems,
    /// 3 for numerical failures, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => 2,
            BenchError::Core(e) => match e {
                ttcone::Error::Io(_) => 1,
                ttcone::Error::Parse { .. }
                | ttcone::Error::ShapeMismatch(_)
                | ttcone::Error::InvalidRank(_) => 2,
                _ => 3,
            },
            BenchError::Numerical { .. } => 3,
            BenchError::Io(_) | BenchError::Csv(_) | BenchError::Json(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum OracleSettings {
    None,
    Multistart { starts: usize },
    Grid { resolution: usize },
}

impl FromStr for OracleSettings {
    type Err = BenchError;

    /// `none`, `multistart:<starts>` or `grid:<resolution>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            BenchError::Config(format!(
                "oracle `{s}`: expected none, multistart:N or grid:N"
            ))
        };
        if s == "none" {
            return Ok(OracleSettings::None);
        }
        let (name, count) = s.split_once(':').ok_or_else(bad)?;
        let count: usize = count.parse().map_err(|_| bad())?;
        match name {
            "multistart" => Ok(OracleSettings::Multistart { starts: count }),
            "grid" => Ok(OracleSettings::Grid { resolution: count }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for OracleSettings {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleSettings::None => write!(f, "none"),
            OracleSettings::Multistart { starts } => write!(f, "multistart:{starts}"),
            OracleSettings::Grid { resolution } => write!(f, "grid:{resolution}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub dims: Dims,
    pub true_rank: (usize, usize),
    pub bound_rank: (usize, usize),
    pub n_pairs: usize,
    pub seed: u64,
    pub eps: f64,
    pub i_max: usize,
    pub oracle: OracleSettings,
    /// Record wall-clock times; when off `wall_ms` is written as 0 so that
    /// repeated runs produce identical files.
    pub timing: bool,
}

impl Default for ExperimentConfig {
    /// Fifty pairs in `R^{5×5×5}` of TT-rank (2, 2), bound (3, 3).
    fn default() -> Self {
        Self {
            dims: [5, 5, 5],
            true_rank: (2, 2),
            bound_rank: (3, 3),
            n_pairs: 50,
            seed: 42,
            eps: 1e-16,
            i_max: 10,
            oracle: OracleSettings::Multistart { starts: 100 },
            timing: true,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let [n1, n2, n3] = self.dims;
        let (r1, r2) = self.true_rank;
        let (k1, k2) = self.bound_rank;
        let fail = |m: String| Err(BenchError::Config(m));
        if n1 == 0 || n2 == 0 || n3 == 0 {
            return fail(format!("dimensions {:?} must be positive", self.dims));
        }
        if r1 == 0 || r2 == 0 || r1 > n1.min(n2 * r2) || r2 > n3.min(n2 * r1) {
            return fail(format!(
                "TT-rank ({r1}, {r2}) not attainable in {:?}",
                self.dims
            ));
        }
        if k1 < r1 || k2 < r2 || k1 > n1 || k2 > n3 {
            return fail(format!(
                "bound ({k1}, {k2}) must satisfy ({r1}, {r2}) ≤ bound ≤ ({n1}, {n3})"
            ));
        }
        if self.n_pairs == 0 {
            return fail("at least one pair is required".into());
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return fail(format!("eps must be positive, got {}", self.eps));
        }
        if self.i_max == 0 {
            return fail("imax must be at least 1".into());
        }
        match self.oracle {
            OracleSettings::Multistart { starts: 0 } => {
                fail("multistart needs at least one start".into())
            }
            OracleSettings::Grid { resolution } if resolution < 4 => {
                fail(format!("grid resolution {resolution} below 4"))
            }
            OracleSettings::Grid { .. }
                if (k1 - r1, k2 - r2) != (1, 1) || n1 - r1 > 2 || n3 - r2 > 2 =>
            {
                fail(
                    "grid oracle needs unit rank gaps and complements of dimension at most 2"
                        .into(),
                )
            }
            _ => Ok(()),
        }
    }

    pub fn options(&self) -> AlternatingOptions {
        AlternatingOptions {
            eps: self.eps,
            i_max: self.i_max,
        }
    }
}

/// The `index`-th random pair: `X` of the configured TT-rank in canonical
/// form, and a Gaussian `Y`.
pub fn generate_pair(cfg: &ExperimentConfig, index: usize) -> Result<(CanonicalTtPair, Tensor3)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let numerical = |source| BenchError::Numerical {
        pair: index,
        source,
    };
    let (_, ttd) = random_tt_with_rng(cfg.dims, cfg.true_rank, &mut rng).map_err(numerical)?;
    let x = canonicalize(&ttd).map_err(numerical)?;
    let y = random_tensor(cfg.dims, &mut rng);
    Ok((x, y))
}

fn oracle_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairRecord {
    pub pair: usize,
    pub angle_approx: f64,
    pub angle_oracle: Option<f64>,
    pub norm_ytilde: f64,
    pub norm_yhat: Option<f64>,
    pub norm_y: f64,
    /// `sqrt` of the larger gap ratio.
    pub omega_eq4: Option<f64>,
    /// The larger gap ratio itself.
    pub omega_s4: Option<f64>,
    pub omega_kutschan: f64,
    pub iters: usize,
    pub eta_trace: Vec<f64>,
    /// `|⟨Y − Ỹ, Ỹ⟩| / (‖Y‖‖Ỹ‖)`
    pub feasibility: f64,
    /// Time spent in the approximate projection.
    pub wall_ms: f64,
}

pub fn run_pair(cfg: &ExperimentConfig, index: usize) -> Result<PairRecord> {
    let numerical = |source| BenchError::Numerical {
        pair: index,
        source,
    };
    let (x, y) = generate_pair(cfg, index)?;

    let start = Instant::now();
    let res = approx_project(&y, &x, cfg.bound_rank, cfg.options()).map_err(numerical)?;
    let elapsed = start.elapsed().as_secs_f64() * 1e3;

    let yt = &res.y_tilde;
    let angle_approx = angle_value(&y, yt).map_err(numerical)?;
    let feasibility = (&y - yt).inner(yt).map_err(numerical)?.abs() / (y.norm() * yt.norm());

    let oracle = match cfg.oracle {
        OracleSettings::None => None,
        OracleSettings::Multistart { starts } => Some(
            exact_project_multistart(&y, &x, cfg.bound_rank, starts, oracle_seed(cfg.seed, index))
                .map_err(numerical)?,
        ),
        OracleSettings::Grid { resolution } => {
            Some(exact_project_grid(&y, &x, cfg.bound_rank, resolution).map_err(numerical)?)
        }
    };
    let angle_oracle = match &oracle {
        Some(o) => Some(angle_value(&y, &o.y_hat).map_err(numerical)?),
        None => None,
    };

    Ok(PairRecord {
        pair: index,
        angle_approx,
        angle_oracle,
        norm_ytilde: yt.norm(),
        norm_yhat: oracle.as_ref().map(|o| o.value),
        norm_y: y.norm(),
        omega_eq4: omega_bound(cfg.dims, cfg.true_rank, cfg.bound_rank).ok(),
        omega_s4: omega_ratio(cfg.dims, cfg.true_rank, cfg.bound_rank).ok(),
        omega_kutschan: kutschan_omega(cfg.dims),
        iters: res.iterations,
        eta_trace: res.eta_trace,
        feasibility,
        wall_ms: if cfg.timing { elapsed } else { 0.0 },
    })
}

/// Five-number summary; quartiles by linear interpolation between order statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl BoxStats {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = p * (v.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
        };
        Some(Self {
            min: v[0],
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            max: v[v.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairComparison {
    pub pair: usize,
    pub approx: f64,
    pub oracle: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counts {
    pub pairs: usize,
    /// Angles above the larger gap ratio (1/3 at the default configuration).
    pub above_omega_s4: usize,
    pub above_omega_eq4: usize,
    pub above_kutschan: usize,
    /// Pairs with `‖Ỹ‖ ≥ ratio·‖Ŷ‖ − 1e−8`.
    pub bound_s4_vs_oracle: Option<usize>,
    pub bound_eq4_vs_oracle: Option<usize>,
    /// Pairs where the approximation exceeds the oracle by more than 1e−8.
    pub approx_beats_oracle: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub config: ExperimentConfig,
    pub approx: BoxStats,
    pub oracle: Option<BoxStats>,
    pub comparison: Vec<PairComparison>,
    pub eta_pair: usize,
    pub eta_trace: Vec<f64>,
    /// Successive differences of `eta_trace`.
    pub eta_increments: Vec<f64>,
    pub counts: Counts,
    pub total_wall_ms: f64,
}

const BOUND_TOL: f64 = 1e-8;

pub fn summarize(
    cfg: &ExperimentConfig,
    records: &[PairRecord],
    eta_pair: usize,
) -> Result<Summary> {
    let approx_angles: Vec<f64> = records.iter().map(|r| r.angle_approx).collect();
    let approx = BoxStats::from_values(&approx_angles)
        .ok_or_else(|| BenchError::Config("no pairs to summarize".into()))?;
    let oracle_angles: Vec<f64> = records.iter().filter_map(|r| r.angle_oracle).collect();
    let oracle = BoxStats::from_values(&oracle_angles);
    let trace = records
        .iter()
        .find(|r| r.pair == eta_pair)
        .map(|r| r.eta_trace.clone())
        .ok_or_else(|| BenchError::Config(format!("eta pair {eta_pair} not among the records")))?;
    let eta_increments = trace.windows(2).map(|w| w[1] - w[0]).collect();

    let count = |f: &dyn Fn(&PairRecord) -> bool| records.iter().filter(|r| f(r)).count();
    let with_oracle = records.iter().all(|r| r.norm_yhat.is_some());
    let vs_oracle = |w: Option<f64>| {
        (with_oracle && w.is_some()).then(|| {
            let w = w.unwrap_or(0.0);
            count(&|r| r.norm_ytilde >= w * r.norm_yhat.unwrap_or(0.0) - BOUND_TOL)
        })
    };
    let w4 = records.first().and_then(|r| r.omega_s4);
    let weq = records.first().and_then(|r| r.omega_eq4);
    let counts = Counts {
        pairs: records.len(),
        above_omega_s4: count(&|r| r.omega_s4.is_some_and(|w| r.angle_approx > w)),
        above_omega_eq4: count(&|r| r.omega_eq4.is_some_and(|w| r.angle_approx > w)),
        above_kutschan: count(&|r| r.angle_approx > r.omega_kutschan),
        bound_s4_vs_oracle: vs_oracle(w4),
        bound_eq4_vs_oracle: vs_oracle(weq),
        approx_beats_oracle: with_oracle
            .then(|| count(&|r| r.norm_ytilde > r.norm_yhat.unwrap_or(f64::INFINITY) + BOUND_TOL)),
    };

    Ok(Summary {
        config: cfg.clone(),
        approx,
        oracle,
        comparison: records
            .iter()
            .map(|r| PairComparison {
                pair: r.pair,
                approx: r.angle_approx,
                oracle: r.angle_oracle,
            })
            .collect(),
        eta_pair,
        eta_trace: trace,
        eta_increments,
        counts,
        total_wall_ms: records.iter().map(|r| r.wall_ms).sum(),
    })
}

/// Runs every pair in parallel and returns the records in pair order with
/// their summary. The η trace of pair 0 is kept in the summary.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(Vec<PairRecord>, Summary)> {
    cfg.validate()?;
    let records = (0..cfg.n_pairs)
        .into_par_iter()
        .map(|i| run_pair(cfg, i))
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(cfg, &records, 0)?;
    Ok((records, summary))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

/// Writes the per-pair CSV (header only for an empty slice).
pub fn write_csv<W: Write>(records: &[PairRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.pair.to_string(),
            format!("{:e}", r.angle_approx),
            opt(r.angle_oracle),
            format!("{:e}", r.norm_ytilde),
            opt(r.norm_yhat),
            format!("{:e}", r.norm_y),
            opt(r.omega_eq4),
            opt(r.omega_s4),
            format!("{:e}", r.omega_kutschan),
            r.iters.to_string(),
            format!("{:.3}", r.wall_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(records: &[PairRecord], path: impl AsRef<Path>) -> Result<()> {
    write_csv(records, std::fs::File::create(path)?)
}

pub fn emit_json(summary: &Summary, path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, summary)?;
    writeln!(f)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(oracle: OracleSettings) -> ExperimentConfig {
        ExperimentConfig {
            n_pairs: 4,
            oracle,
            timing: false,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn oracle_settings_parse() {
        assert_eq!(
            "none".parse::<OracleSettings>().unwrap(),
            OracleSettings::None
        );
        assert_eq!(
            "multistart:100".parse::<OracleSettings>().unwrap(),
            OracleSettings::Multistart { starts: 100 }
        );
        assert_eq!(
            "grid:720".parse::<OracleSettings>().unwrap(),
            OracleSettings::Grid { resolution: 720 }
        );
        for bad in ["", "grid", "grid:x", "random:3", "multistart:-1"] {
            assert!(bad.parse::<OracleSettings>().is_err(), "{bad}");
        }
        for s in ["none", "multistart:7", "grid:12"] {
            assert_eq!(s.parse::<OracleSettings>().unwrap().to_string(), s);
        }
    }

    #[test]
    fn config_validation() {
        assert!(ExperimentConfig::default().validate().is_ok());
        let bad = [
            ExperimentConfig {
                n_pairs: 0,
                ..Default::default()
            },
            ExperimentConfig {
                bound_rank: (1, 3),
                ..Default::default()
            },
            ExperimentConfig {
                bound_rank: (6, 3),
                ..Default::default()
            },
            ExperimentConfig {
                true_rank: (0, 2),
                ..Default::default()
            },
            ExperimentConfig {
                true_rank: (5, 1),
                ..Default::default()
            },
            ExperimentConfig {
                eps: 0.0,
                ..Default::default()
            },
            ExperimentConfig {
                i_max: 0,
                ..Default::default()
            },
            ExperimentConfig {
                oracle: OracleSettings::Grid { resolution: 720 },
                ..Default::default()
            },
            ExperimentConfig {
                oracle: OracleSettings::Multistart { starts: 0 },
                ..Default::default()
            },
        ];
        for cfg in bad {
            let err = cfg.validate().unwrap_err();
            assert_eq!(err.exit_code(), 2, "{cfg:?}");
        }
    }

    #[test]
    fn box_stats_interpolate() {
        let s = BoxStats::from_values(&[4.0, 1.0, 3.0, 2.0, 5.0]).unwrap();
        assert_eq!(
            (s.min, s.q1, s.median, s.q3, s.max),
            (1.0, 2.0, 3.0, 4.0, 5.0)
        );
        let s = BoxStats::from_values(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!((s.q1, s.median, s.q3), (1.75, 2.5, 3.25));
        assert_eq!(BoxStats::from_values(&[7.0]).unwrap().q3, 7.0);
        assert!(BoxStats::from_values(&[]).is_none());
    }

    #[test]
    fn pairs_are_independent_of_scheduling() {
        let cfg = small(OracleSettings::None);
        let (a, _) = generate_pair(&cfg, 2).unwrap();
        let (b, _) = generate_pair(
            &ExperimentConfig {
                n_pairs: 9,
                ..cfg.clone()
            },
            2,
        )
        .unwrap();
        assert_eq!(a.tensor(), b.tensor());
        let (records, _) = run_experiment(&cfg).unwrap();
        assert_eq!(records[3], run_pair(&cfg, 3).unwrap());
        let (_, y0) = generate_pair(&cfg, 0).unwrap();
        let (_, y1) = generate_pair(&cfg, 1).unwrap();
        assert_ne!(y0, y1);
    }

    #[test]
    fn records_and_summary_are_consistent() {
        let cfg = small(OracleSettings::Multistart { starts: 5 });
        let (records, summary) = run_experiment(&cfg).unwrap();
        assert_eq!(records.len(), 4);
        for (i, r) in records.iter().enumerate() {
            assert_eq!(r.pair, i);
            assert!((-1.0..=1.0).contains(&r.angle_approx));
            assert!(r.norm_ytilde <= r.norm_yhat.unwrap() + 1e-8);
            assert_eq!(r.wall_ms, 0.0);
            assert_eq!(r.iters, r.eta_trace.len());
        }
        assert_eq!(summary.counts.pairs, 4);
        assert_eq!(summary.comparison.len(), 4);
        assert_eq!(summary.eta_trace, records[0].eta_trace);
        assert_eq!(summary.eta_increments.len(), summary.eta_trace.len() - 1);
        assert!(summary.oracle.is_some());
        assert!(summarize(&cfg, &records, 99).is_err());
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            format!("{}\n", CSV_HEADER.join(","))
        );

        let cfg = small(OracleSettings::None);
        let (records, _) = run_experiment(&cfg).unwrap();
        let mut buf = Vec::new();
        write_csv(&records, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(row.len(), 11);
        assert_eq!(row[2], "");
        assert_eq!(row[10], "0.000");
    }

    #[test]
    fn exit_codes() {
        assert_eq!(BenchError::Config("x".into()).exit_code(), 2);
        let parse = ttcone::Error::Parse {
            line: 1,
            msg: "x".into(),
        };
        assert_eq!(BenchError::from(parse).exit_code(), 2);
        let num = BenchError::Numerical {
            pair: 0,
            source: ttcone::Error::ZeroInput,
        };
        assert_eq!(num.exit_code(), 3);
        assert_eq!(BenchError::from(ttcone::Error::ZeroInput).exit_code(), 3);
        let io = std::io::Error::new(std::io::ErrorKind::NotFound, "gone");
        assert_eq!(BenchError::from(io).exit_code(), 1);
        let io = std::io::Error::new(std::io::ErrorKind::NotFound, "gone");
        assert_eq!(BenchError::from(ttcone::Error::Io(io)).exit_code(), 1);
    }
}
