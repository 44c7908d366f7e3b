//! Nonparametric bootstrap inference: standard errors and percentile
//! intervals for every estimand, differences between estimators, and
//! critical values for the random-assignment diagnostic.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cic::{self, Potential};
use crate::error::{Error, Result};
use crate::ipw::{self, TrimRule};
use crate::panel::{PanelSample, UnitRecord};

/// Resampling granularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResampleUnit {
    Unit,
    Cluster,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BootstrapSpec {
    pub draws: usize,
    pub seed: u64,
    pub resample_unit: ResampleUnit,
    pub ci_level: f64,
}

impl Default for BootstrapSpec {
    fn default() -> Self {
        BootstrapSpec {
            draws: 999,
            seed: 0,
            resample_unit: ResampleUnit::Unit,
            ci_level: 0.95,
        }
    }
}

impl BootstrapSpec {
    pub fn validate(&self, sample: &PanelSample) -> Result<()> {
        if self.draws < 2 {
            return Err(Error::InvalidBootstrapSpec("draws must be >= 2".into()));
        }
        if !(0.0..1.0).contains(&self.ci_level) || self.ci_level <= 0.0 {
            return Err(Error::InvalidBootstrapSpec(format!(
                "ci_level {} outside (0,1)",
                self.ci_level
            )));
        }
        if self.resample_unit == ResampleUnit::Cluster {
            for rec in sample.records() {
                if rec.cluster.is_none() {
                    return Err(Error::MissingClusterId(rec.id.clone()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BootstrapResult {
    pub point: f64,
    pub se: f64,
    pub ci: (f64, f64),
    pub draws_used: usize,
    pub failures: usize,
}

/// A bootstrappable scalar estimator of a panel sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaseStatistic {
    NaiveDeltaR,
    AttR,
    AtuR,
    AteR,
    AteRandomAssignment,
    AteNoRandomAssignment,
    IpwAteR { trimmed: bool },
    IpwAte { trimmed: bool },
}

impl BaseStatistic {
    pub fn evaluate(&self, sample: &PanelSample) -> Result<f64> {
        match self {
            BaseStatistic::NaiveDeltaR => Ok(cic::naive_delta_r(sample)?.point),
            BaseStatistic::AttR => Ok(cic::att_r(sample)?.point),
            BaseStatistic::AtuR => Ok(cic::atu_r(sample)?.point),
            BaseStatistic::AteR => Ok(cic::ate_r(sample)?.point),
            BaseStatistic::AteRandomAssignment => Ok(cic::ate_random_assignment(sample)?.point),
            BaseStatistic::AteNoRandomAssignment => {
                Ok(cic::ate_no_random_assignment(sample)?.ate.point)
            }
            BaseStatistic::IpwAteR { trimmed } => {
                Ok(ipw::ipw_ate_r(sample, trimmed.then(TrimRule::default))?.point)
            }
            BaseStatistic::IpwAte { trimmed } => {
                Ok(ipw::ipw_ate(sample, trimmed.then(TrimRule::default))?.point)
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            BaseStatistic::NaiveDeltaR => "naive-dR".into(),
            BaseStatistic::AttR => "CiC ATT-R".into(),
            BaseStatistic::AtuR => "CiC ATU-R".into(),
            BaseStatistic::AteR => "CiC ATE-R".into(),
            BaseStatistic::AteRandomAssignment => "CiC ATE-RA".into(),
            BaseStatistic::AteNoRandomAssignment => "CiC ATE-NORA".into(),
            BaseStatistic::IpwAteR { trimmed } => {
                format!("{} ATE-R", if *trimmed { "IPW2" } else { "IPW1" })
            }
            BaseStatistic::IpwAte { trimmed } => {
                format!("{} ATE", if *trimmed { "IPW2" } else { "IPW1" })
            }
        }
    }
}

/// A single estimator or the difference of two (e.g. corrected minus naive).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Statistic {
    Single(BaseStatistic),
    /// first minus second
    Difference(BaseStatistic, BaseStatistic),
}

impl Statistic {
    pub fn evaluate(&self, sample: &PanelSample) -> Result<f64> {
        match self {
            Statistic::Single(s) => s.evaluate(sample),
            Statistic::Difference(a, b) => Ok(a.evaluate(sample)? - b.evaluate(sample)?),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Statistic::Single(s) => s.label(),
            Statistic::Difference(a, b) => format!("{} minus {}", a.label(), b.label()),
        }
    }
}

/// Deterministic per-replicate stream: replicate k draws its seed from a
/// splitmix of (spec seed, k), so parallel and serial runs agree.
fn replicate_seed(seed: u64, k: usize) -> u64 {
    let mut z = seed ^ (k as u64).wrapping_mul(0x9e3779b97f4a7c15);
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

pub fn resample(sample: &PanelSample, unit: ResampleUnit, rng: &mut ChaCha8Rng) -> PanelSample {
    let records = sample.records();
    let drawn: Vec<UnitRecord> = match unit {
        ResampleUnit::Unit => (0..records.len())
            .map(|_| records[rng.gen_range(0..records.len())].clone())
            .collect(),
        ResampleUnit::Cluster => {
            let mut clusters: Vec<&str> = records
                .iter()
                .map(|rec| rec.cluster.as_deref().unwrap())
                .collect();
            clusters.sort_unstable();
            clusters.dedup();
            let mut drawn = Vec::with_capacity(records.len());
            for _ in 0..clusters.len() {
                let picked = clusters[rng.gen_range(0..clusters.len())];
                drawn.extend(
                    records
                        .iter()
                        .filter(|rec| rec.cluster.as_deref() == Some(picked))
                        .cloned(),
                );
            }
            drawn
        }
    };
    // Resampled records satisfy the per-record invariants by construction.
    PanelSample::new(drawn).expect("resample of a valid sample is valid")
}

/// Bootstrap a statistic: the point estimate always comes from the original
/// sample; replicates that violate an estimator precondition count as
/// failures and are excluded, with a 20% failure ceiling.
pub fn bootstrap(
    sample: &PanelSample,
    statistic: Statistic,
    spec: &BootstrapSpec,
) -> Result<BootstrapResult> {
    spec.validate(sample)?;
    let point = statistic.evaluate(sample)?;

    let mut replicates: Vec<(usize, Option<f64>)> = (0..spec.draws)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(replicate_seed(spec.seed, k));
            let draw = resample(sample, spec.resample_unit, &mut rng);
            (k, statistic.evaluate(&draw).ok().filter(|v| v.is_finite()))
        })
        .collect();
    replicates.sort_by_key(|&(k, _)| k);

    let values: Vec<f64> = replicates.iter().filter_map(|&(_, v)| v).collect();
    let failures = spec.draws - values.len();
    if failures * 5 > spec.draws {
        return Err(Error::TooManyBootstrapFailures {
            failed: failures,
            total: spec.draws,
        });
    }
    Ok(summarize(point, &values, failures, spec.ci_level))
}

fn summarize(point: f64, values: &[f64], failures: usize, ci_level: f64) -> BootstrapResult {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = var.max(0.0).sqrt();
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let alpha = (1.0 - ci_level) / 2.0;
    BootstrapResult {
        point,
        se,
        ci: (percentile(&sorted, alpha), percentile(&sorted, 1.0 - alpha)),
        draws_used: values.len(),
        failures,
    }
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let idx = ((q * n as f64).ceil() as usize).clamp(1, n) - 1;
    sorted[idx]
}

/// Bootstrap p-values for the random-assignment diagnostic, one per
/// potential outcome. The observed statistic is the sup discrepancy of the
/// mixture CDFs; each replicate recenters its discrepancy process at the
/// observed one, so the p-value is the fraction of recentered replicate
/// statistics at least as large as the observed statistic.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DiagnosticPValues {
    pub untreated_stat: f64,
    pub treated_stat: f64,
    pub untreated_p: f64,
    pub treated_p: f64,
}

pub fn diagnostic_pvalue(sample: &PanelSample, spec: &BootstrapSpec) -> Result<DiagnosticPValues> {
    spec.validate(sample)?;
    // Fixed evaluation grid from the original sample so observed and
    // replicate mixture curves are compared pointwise.
    let grid = diagnostic_grid(sample)?;
    let observed = [
        cic::mixture_curve_diff(sample, Potential::Untreated, &grid)?,
        cic::mixture_curve_diff(sample, Potential::Treated, &grid)?,
    ];
    let stat = |diff: &[f64]| diff.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let obs_stats = [stat(&observed[0]), stat(&observed[1])];

    let exceed: Vec<[bool; 2]> = (0..spec.draws)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(replicate_seed(spec.seed, k));
            let draw = resample(sample, spec.resample_unit, &mut rng);
            let mut out = [false; 2];
            for (i, potential) in [Potential::Untreated, Potential::Treated]
                .into_iter()
                .enumerate()
            {
                if let Ok(diff) = cic::mixture_curve_diff(&draw, potential, &grid) {
                    let recentered: f64 = diff
                        .iter()
                        .zip(&observed[i])
                        .map(|(d, o)| (d - o).abs())
                        .fold(0.0, f64::max);
                    out[i] = recentered >= obs_stats[i];
                }
            }
            out
        })
        .collect();

    let p = |i: usize| {
        let count = exceed.iter().filter(|e| e[i]).count();
        (count as f64 + 1.0) / (spec.draws as f64 + 1.0)
    };
    Ok(DiagnosticPValues {
        untreated_stat: obs_stats[0],
        treated_stat: obs_stats[1],
        untreated_p: p(0),
        treated_p: p(1),
    })
}

fn diagnostic_grid(sample: &PanelSample) -> Result<Vec<f64>> {
    let mut grid = cic::mixture_grid(sample, Potential::Untreated)?;
    grid.extend(cic::mixture_grid(sample, Potential::Treated)?);
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();
    Ok(grid)
}
