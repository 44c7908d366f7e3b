//! Simulation engine: the two-period threshold-response data-generating
//! process, its three design variants, large-sample true values, the Monte
//! Carlo runner, and a numerical check of time invariance of the
//! unobservable within treatment-response cells.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::bootstrap::BaseStatistic;
use crate::empirical::{ks_distance, ks_p_value};
use crate::error::{Error, Result};
use crate::panel::{PanelSample, UnitRecord};

/// How the response index loads on the outcome unobservables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SelectionModel {
    /// V = b * (U0 + U1)/2 + eps, symmetric in the two periods.
    SymmetricAverage,
    /// V = b * U1 + eps; breaks time invariance within response cells.
    FollowUpOnly,
}

/// Full parameterization of the simulation DGP.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SimDesign {
    pub label: char,
    pub n: usize,
    pub sigma: f64,
    pub beta2: f64,
    /// Loading of the response index on the averaged unobservable.
    pub b: f64,
    /// Target attrition probabilities (control, treatment).
    pub target_attrition: (f64, f64),
    pub seed: u64,
    pub selection: SelectionModel,
}

impl SimDesign {
    /// beta1 = 0.25 * sd(Y1(0)) with Var(Y1(0)) = 1 + sigma^2.
    pub fn beta1(&self) -> f64 {
        0.25 * (1.0 + self.sigma * self.sigma).sqrt()
    }

    /// sd of the response index V.
    pub fn sigma_v(&self) -> f64 {
        match self.selection {
            SelectionModel::SymmetricAverage => {
                (self.b * self.b * (1.0 + self.sigma * self.sigma / 2.0) + 1.0).sqrt()
            }
            SelectionModel::FollowUpOnly => {
                (self.b * self.b * (1.0 + self.sigma * self.sigma) + 1.0).sqrt()
            }
        }
    }

    /// Response thresholds (a0 for control, a1 for treatment), chosen so
    /// P(V < a_g) equals the target attrition rate.
    pub fn thresholds(&self) -> (f64, f64) {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let sv = self.sigma_v();
        (
            sv * normal.inverse_cdf(self.target_attrition.0),
            sv * normal.inverse_cdf(self.target_attrition.1),
        )
    }

    pub fn name(&self) -> &'static str {
        match self.label {
            '1' => "I",
            '2' => "II",
            '3' => "III",
            _ => "custom",
        }
    }

    pub fn potential_outcome(&self, d: u8, u: f64) -> f64 {
        if d == 1 {
            self.beta1() + self.beta2 * u + u
        } else {
            u
        }
    }
}

/// The three documented design variants: I differential attrition with
/// outcome-driven response, II equal attrition rates (always/never
/// responders only), III missing-at-random (b = 0) with differential rates.
pub fn design_preset(name: &str, n: usize, sigma: f64, beta2: f64, seed: u64) -> Result<SimDesign> {
    let (label, b, target_attrition) = match name.trim() {
        "I" | "i" | "1" => ('1', 1.0, (0.3, 0.2)),
        "II" | "ii" | "2" => ('2', 1.0, (0.25, 0.25)),
        "III" | "iii" | "3" => ('3', 0.0, (0.3, 0.2)),
        other => return Err(Error::UnknownDesign(other.to_string())),
    };
    Ok(SimDesign {
        label,
        n,
        sigma,
        beta2,
        b,
        target_attrition,
        seed,
        selection: SelectionModel::SymmetricAverage,
    })
}

/// Latent draws retained for verification; never consumed by estimators.
#[derive(Debug, Clone)]
pub struct LatentRecord {
    pub alpha: f64,
    pub eta0: f64,
    pub eta1: f64,
    pub eps: f64,
    pub u0: f64,
    pub u1: f64,
    pub g: u8,
    pub r_if_control: u8,
    pub r_if_treated: u8,
}

#[derive(Debug, Clone)]
pub struct DrawnSample {
    pub sample: PanelSample,
    pub latents: Vec<LatentRecord>,
}

fn draw_latent(design: &SimDesign, rng: &mut ChaCha8Rng) -> LatentRecord {
    let (a0, a1) = design.thresholds();
    let alpha: f64 = rng.sample(StandardNormal);
    let eta0: f64 = rng.sample(StandardNormal);
    let eta1: f64 = rng.sample(StandardNormal);
    let eps: f64 = rng.sample(StandardNormal);
    let g = u8::from(rng.gen_bool(0.5));
    let u0 = alpha + design.sigma * eta0;
    let u1 = alpha + design.sigma * eta1;
    let v = match design.selection {
        SelectionModel::SymmetricAverage => design.b * 0.5 * (u0 + u1) + eps,
        SelectionModel::FollowUpOnly => design.b * u1 + eps,
    };
    LatentRecord {
        alpha,
        eta0,
        eta1,
        eps,
        u0,
        u1,
        g,
        r_if_control: u8::from(v >= a0),
        r_if_treated: u8::from(v >= a1),
    }
}

/// Draws one replication's sample of n units; the replication index only
/// shifts the RNG stream so replications are independent and parallelizable.
pub fn draw_sample(design: &SimDesign, replication: u64) -> DrawnSample {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(design.seed, replication));
    let mut latents = Vec::with_capacity(design.n);
    let mut records = Vec::with_capacity(design.n);
    for i in 0..design.n {
        let lat = draw_latent(design, &mut rng);
        let r = if lat.g == 1 { lat.r_if_treated } else { lat.r_if_control };
        let y0 = design.potential_outcome(0, lat.u0);
        let y1 = (r == 1).then(|| design.potential_outcome(lat.g, lat.u1));
        records.push(UnitRecord {
            id: i.to_string(),
            g: lat.g,
            r,
            y0,
            y1,
            cluster: None,
        });
        latents.push(lat);
    }
    DrawnSample {
        sample: PanelSample::new(records).expect("generated records are valid"),
        latents,
    }
}

fn stream_seed(seed: u64, replication: u64) -> u64 {
    let mut z = seed
        .wrapping_mul(0x2545f4914f6cdd1d)
        .wrapping_add(replication.wrapping_mul(0x9e3779b97f4a7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Per-estimand population values for a design.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TrueValues {
    pub att_r: f64,
    pub atu_r: f64,
    pub ate_r: f64,
    pub ate: f64,
}

/// Large-sample Monte Carlo truths over latent potential outcomes and
/// potential responses (no attrition masking). The unit effect is
/// beta1 + beta2 * U1, so ATE = beta1 exactly.
pub fn true_values(design: &SimDesign, mc_size: usize) -> TrueValues {
    let chunks = 64usize;
    let per_chunk = mc_size.div_ceil(chunks);
    let sums: Vec<(f64, usize, f64, usize)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(stream_seed(design.seed ^ 0x7476_7275, c as u64));
            let mut sum_t = 0.0; // effect sum over treated respondents
            let mut n_t = 0usize;
            let mut sum_c = 0.0; // effect sum over control respondents
            let mut n_c = 0usize;
            for _ in 0..per_chunk {
                let lat = draw_latent(design, &mut rng);
                let effect = design.beta1() + design.beta2 * lat.u1;
                if lat.r_if_treated == 1 {
                    sum_t += effect;
                    n_t += 1;
                }
                if lat.r_if_control == 1 {
                    sum_c += effect;
                    n_c += 1;
                }
            }
            (sum_t, n_t, sum_c, n_c)
        })
        .collect();
    let (sum_t, n_t, sum_c, n_c) = sums.iter().fold((0.0, 0, 0.0, 0), |acc, s| {
        (acc.0 + s.0, acc.1 + s.1, acc.2 + s.2, acc.3 + s.3)
    });
    let att_r = sum_t / n_t as f64;
    let atu_r = sum_c / n_c as f64;
    // Respondent shares: P(G=1|R=1) with G ~ Bernoulli(1/2).
    let p_resp_t = n_t as f64;
    let p_resp_c = n_c as f64;
    let ate_r = (p_resp_t * att_r + p_resp_c * atu_r) / (p_resp_t + p_resp_c);
    TrueValues {
        att_r,
        atu_r,
        ate_r,
        ate: design.beta1(),
    }
}

/// One row of a Monte Carlo summary table.
#[derive(Debug, Clone, Serialize)]
pub struct McRow {
    pub estimand: String,
    pub estimator: String,
    pub true_value: f64,
    pub mean: f64,
    pub bias: f64,
    pub sd: f64,
    pub rmse: f64,
    pub failures: usize,
}

/// Mean/bias/SD/RMSE per estimator over replications.
#[derive(Debug, Clone, Serialize)]
pub struct McSummary {
    pub design: String,
    pub n: usize,
    pub sigma: f64,
    pub beta2: f64,
    pub replications: usize,
    pub truths: TrueValues,
    pub rows: Vec<McRow>,
}

impl McSummary {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("estimand,estimator,true,mean,bias,sd,rmse,failures\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                row.estimand,
                row.estimator,
                row.true_value,
                row.mean,
                row.bias,
                row.sd,
                row.rmse,
                row.failures
            ));
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "Design {} (n={}, sigma={}, beta2={}, {} replications)\n",
            self.design, self.n, self.sigma, self.beta2, self.replications
        );
        out.push_str(&format!(
            "{:<10} {:<14} {:>8} {:>8} {:>8} {:>8} {:>8} {:>9}\n",
            "Estimand", "Estimator", "True", "Mean", "Bias", "SD", "RMSE", "Failures"
        ));
        for row in &self.rows {
            out.push_str(&format!(
                "{:<10} {:<14} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>9}\n",
                row.estimand,
                row.estimator,
                row.true_value,
                row.mean,
                row.bias,
                row.sd,
                row.rmse,
                row.failures
            ));
        }
        out
    }
}

/// The default Table-2-style estimator battery.
pub fn default_estimators() -> Vec<BaseStatistic> {
    vec![
        BaseStatistic::NaiveDeltaR,
        BaseStatistic::AttR,
        BaseStatistic::AtuR,
        BaseStatistic::AteR,
        BaseStatistic::AteRandomAssignment,
        BaseStatistic::IpwAteR { trimmed: false },
        BaseStatistic::IpwAteR { trimmed: true },
        BaseStatistic::IpwAte { trimmed: false },
        BaseStatistic::IpwAte { trimmed: true },
    ]
}

fn estimand_of(stat: BaseStatistic) -> (&'static str, fn(&TrueValues) -> f64) {
    match stat {
        BaseStatistic::NaiveDeltaR => ("ATE-R", |t| t.ate_r),
        BaseStatistic::AttR => ("ATT-R", |t| t.att_r),
        BaseStatistic::AtuR => ("ATU-R", |t| t.atu_r),
        BaseStatistic::AteR => ("ATE-R", |t| t.ate_r),
        BaseStatistic::AteRandomAssignment | BaseStatistic::AteNoRandomAssignment => {
            ("ATE", |t| t.ate)
        }
        BaseStatistic::IpwAteR { .. } => ("ATE-R", |t| t.ate_r),
        BaseStatistic::IpwAte { .. } => ("ATE", |t| t.ate),
    }
}

fn estimator_label(stat: BaseStatistic) -> &'static str {
    match stat {
        BaseStatistic::NaiveDeltaR => "naive",
        BaseStatistic::AttR
        | BaseStatistic::AtuR
        | BaseStatistic::AteR
        | BaseStatistic::AteRandomAssignment
        | BaseStatistic::AteNoRandomAssignment => "CiC",
        BaseStatistic::IpwAteR { trimmed } | BaseStatistic::IpwAte { trimmed } => {
            if trimmed {
                "IPW2"
            } else {
                "IPW1"
            }
        }
    }
}

/// Runs the full Monte Carlo study for one design: per replication, draw a
/// sample and apply every requested estimator; aggregate against the
/// large-sample truths. Estimator failures are counted, not fatal.
pub fn run_monte_carlo(
    design: &SimDesign,
    replications: usize,
    estimators: &[BaseStatistic],
    truth_mc_size: usize,
) -> Result<McSummary> {
    if replications < 2 {
        return Err(Error::InvalidArgument("replications must be >= 2".into()));
    }
    let truths = true_values(design, truth_mc_size);
    let per_rep: Vec<Vec<Option<f64>>> = (0..replications as u64)
        .into_par_iter()
        .map(|rep| {
            let drawn = draw_sample(design, rep);
            estimators
                .iter()
                .map(|stat| stat.evaluate(&drawn.sample).ok().filter(|v| v.is_finite()))
                .collect()
        })
        .collect();

    let mut rows = Vec::with_capacity(estimators.len());
    for (j, &stat) in estimators.iter().enumerate() {
        let values: Vec<f64> = per_rep.iter().filter_map(|rep| rep[j]).collect();
        let failures = replications - values.len();
        let (estimand, truth_of) = estimand_of(stat);
        let truth = truth_of(&truths);
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let bias = mean - truth;
        let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        let rmse = (bias * bias + sd * sd).sqrt();
        rows.push(McRow {
            estimand: estimand.to_string(),
            estimator: estimator_label(stat).to_string(),
            true_value: truth,
            mean,
            bias,
            sd,
            rmse,
            failures,
        });
    }
    Ok(McSummary {
        design: design.name().to_string(),
        n: design.n,
        sigma: design.sigma,
        beta2: design.beta2,
        replications,
        truths,
        rows,
    })
}

/// KS comparison of U0 vs U1 within one conditioning cell.
#[derive(Debug, Clone, Serialize)]
pub struct TimeInvarianceCell {
    pub cell: String,
    pub n: usize,
    pub distance: f64,
    pub p_value: f64,
}

/// Numerical check that the distribution of the unobservable is stable
/// across periods within every (G, R) cell and every response-type cell.
/// Draws latent units until each (G, R) cell holds `mc_size` observations.
pub fn time_invariance_check(design: &SimDesign, mc_size: usize) -> Vec<TimeInvarianceCell> {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(design.seed ^ 0x7469_6331, 0));
    // (u0s, u1s) per conditioning cell.
    let mut gr_cells: Vec<(Vec<f64>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); 4];
    let mut type_cells: Vec<(Vec<f64>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); 4];
    loop {
        for _ in 0..65_536 {
            let lat = draw_latent(design, &mut rng);
            let r = if lat.g == 1 { lat.r_if_treated } else { lat.r_if_control };
            let gr = (lat.g * 2 + r) as usize;
            if gr_cells[gr].0.len() < mc_size {
                gr_cells[gr].0.push(lat.u0);
                gr_cells[gr].1.push(lat.u1);
            }
            let ty = (lat.r_if_control * 2 + lat.r_if_treated) as usize;
            if type_cells[ty].0.len() < mc_size {
                type_cells[ty].0.push(lat.u0);
                type_cells[ty].1.push(lat.u1);
            }
        }
        if gr_cells.iter().all(|c| c.0.len() >= mc_size) {
            break;
        }
    }

    let mut out = Vec::new();
    let gr_names = ["G=0,R=0", "G=0,R=1", "G=1,R=0", "G=1,R=1"];
    let type_names = [
        "never-responders",
        "treatment-only responders",
        "control-only responders",
        "always-responders",
    ];
    for (cells, names) in [(&gr_cells, &gr_names), (&type_cells, &type_names)] {
        for (i, (u0s, u1s)) in cells.iter().enumerate() {
            if u0s.is_empty() {
                continue; // response types absent from the design
            }
            let d = ks_distance(u0s, u1s);
            out.push(TimeInvarianceCell {
                cell: names[i].to_string(),
                n: u0s.len(),
                distance: d,
                p_value: ks_p_value(d, u0s.len(), u1s.len()),
            });
        }
    }
    out
}

/// A constructed sample violation used to exercise the RA diagnostic: the
/// treated arm's attritors get their baseline outcomes shifted, so the
/// imputed attritor distributions disagree across arms.
pub fn shifted_attritor_sample(design: &SimDesign, replication: u64, shift: f64) -> PanelSample {
    let drawn = draw_sample(design, replication);
    let records = drawn
        .sample
        .records()
        .iter()
        .map(|rec| {
            let mut rec = rec.clone();
            if rec.g == 1 && rec.r == 0 {
                rec.y0 += shift;
            }
            rec
        })
        .collect();
    PanelSample::new(records).expect("shifted records remain valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design(name: &str, beta2: f64) -> SimDesign {
        design_preset(name, 2000, 2.0, beta2, 42).unwrap()
    }

    #[test]
    fn preset_parameters() {
        let d2 = design("II", 0.0);
        assert_eq!(d2.b, 1.0);
        assert_eq!(d2.target_attrition, (0.25, 0.25));
        assert!((d2.beta1() - 0.25 * 5.0f64.sqrt()).abs() < 1e-12);
        let d3 = design("III", 1.0);
        assert_eq!(d3.b, 0.0);
        assert!((d3.sigma_v() - 1.0).abs() < 1e-12);
        assert!(design_preset("IV", 10, 2.0, 0.0, 1).is_err());
    }

    #[test]
    fn thresholds_hit_target_attrition() {
        // Normal-CDF oracle: empirical P(V < a_g) matches the target.
        let d = design("I", 0.0);
        let (a0, a1) = d.thresholds();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 1_000_000;
        let mut below0 = 0usize;
        let mut below1 = 0usize;
        for _ in 0..n {
            let lat = draw_latent(&d, &mut rng);
            let v = d.b * 0.5 * (lat.u0 + lat.u1) + lat.eps;
            if v < a0 {
                below0 += 1;
            }
            if v < a1 {
                below1 += 1;
            }
        }
        assert!((below0 as f64 / n as f64 - 0.3).abs() < 0.003);
        assert!((below1 as f64 / n as f64 - 0.2).abs() < 0.003);
    }

    #[test]
    fn constant_effect_when_beta2_zero() {
        let d = design("I", 0.0);
        let drawn = draw_sample(&d, 0);
        for lat in &drawn.latents {
            let effect = d.potential_outcome(1, lat.u1) - d.potential_outcome(0, lat.u1);
            assert!((effect - d.beta1()).abs() < 1e-12);
        }
    }

    #[test]
    fn design_two_has_no_differential_response() {
        let d = design("II", 1.0);
        let drawn = draw_sample(&d, 0);
        for lat in &drawn.latents {
            assert_eq!(lat.r_if_control, lat.r_if_treated);
        }
    }

    #[test]
    fn design_one_overall_attrition_quarter() {
        let d = design_preset("I", 100_000, 2.0, 0.0, 7).unwrap();
        let drawn = draw_sample(&d, 0);
        let summary = drawn.sample.attrition_summary();
        assert!((summary.overall - 0.25).abs() < 0.01);
        assert!((summary.control - 0.3).abs() < 0.01);
        assert!((summary.treatment - 0.2).abs() < 0.01);
    }

    #[test]
    fn true_ate_is_beta1() {
        let d = design("I", 1.0);
        let t = true_values(&d, 200_000);
        assert!((t.ate - d.beta1()).abs() < 1e-12);
        assert!((t.ate - 0.559).abs() < 0.01);
    }

    #[test]
    fn seed_reproducibility() {
        let d = design("I", 1.0);
        let a = run_monte_carlo(&d, 4, &default_estimators(), 50_000).unwrap();
        let b = run_monte_carlo(&d, 4, &default_estimators(), 50_000).unwrap();
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ra.mean, rb.mean);
            assert_eq!(ra.sd, rb.sd);
        }
    }

    #[test]
    fn rmse_identity() {
        let d = design_preset("II", 400, 2.0, 0.0, 3).unwrap();
        let summary = run_monte_carlo(&d, 20, &default_estimators(), 50_000).unwrap();
        for row in &summary.rows {
            let lhs = row.rmse * row.rmse;
            let rhs = row.bias * row.bias + row.sd * row.sd;
            assert!((lhs - rhs).abs() < 1e-10 * rhs.max(1.0));
        }
    }

    #[test]
    fn csv_export_column_order() {
        let d = design_preset("III", 200, 2.0, 0.0, 5).unwrap();
        let summary = run_monte_carlo(&d, 3, &[BaseStatistic::AttR], 10_000).unwrap();
        let csv = summary.to_csv();
        assert!(csv.starts_with("estimand,estimator,true,mean,bias,sd,rmse,failures\n"));
        assert!(csv.contains("ATT-R,CiC,"));
    }

    #[test]
    fn mar_design_time_invariance_trivial() {
        let d = design_preset("III", 0, 2.0, 0.0, 11).unwrap();
        let cells = time_invariance_check(&d, 4000);
        for cell in cells {
            assert!(cell.distance < 0.05, "cell {} distance {}", cell.cell, cell.distance);
        }
    }
}
