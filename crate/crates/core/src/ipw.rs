//! Inverse probability weighting comparator: logistic response and
//! treatment propensities on the baseline outcome, optional trimming,
//! Hajek-normalized estimates of ATE-R and ATE.

use serde::Serialize;

use crate::cic::{CellCounts, EstimandKind, EstimandValue};
use crate::error::{Error, Result};
use crate::panel::{Cell, PanelSample};

const IRLS_TOL: f64 = 1e-8;
const IRLS_MAX_ITER: usize = 100;

/// Maximum-likelihood logistic fit of a binary outcome on (intercept, x).
#[derive(Debug, Clone, Serialize)]
pub struct PropensityFit {
    pub intercept: f64,
    pub slope: f64,
    pub fitted: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl PropensityFit {
    pub fn predict(&self, x: f64) -> f64 {
        sigmoid(self.intercept + self.slope * x)
    }

    /// Analytic score (log-likelihood gradient) at the current coefficients.
    pub fn score(&self, outcome: &[u8], regressor: &[f64]) -> (f64, f64) {
        let mut s0 = 0.0;
        let mut s1 = 0.0;
        for (&y, &x) in outcome.iter().zip(regressor) {
            let resid = y as f64 - self.predict(x);
            s0 += resid;
            s1 += resid * x;
        }
        (s0, s1)
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Iteratively reweighted least squares (Newton) for the two-parameter
/// logistic model. Non-convergence (e.g. perfect separation) is reported
/// through the `converged` flag, not silently penalized.
pub fn fit_logistic(outcome: &[u8], regressor: &[f64]) -> Result<PropensityFit> {
    if outcome.len() != regressor.len() || outcome.len() < 2 {
        return Err(Error::InvalidArgument(
            "logistic fit needs equal-length vectors of size >= 2".into(),
        ));
    }
    let ones = outcome.iter().filter(|&&y| y == 1).count();
    if ones == 0 || ones == outcome.len() {
        return Err(Error::SingleClassOutcome);
    }

    let n = outcome.len() as f64;
    let share = ones as f64 / n;
    let mut b0 = (share / (1.0 - share)).ln();
    let mut b1 = 0.0;
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=IRLS_MAX_ITER {
        iterations = iter;
        // Score and observed information for the 2x2 Newton step.
        let (mut s0, mut s1) = (0.0, 0.0);
        let (mut h00, mut h01, mut h11) = (0.0, 0.0, 0.0);
        for (&y, &x) in outcome.iter().zip(regressor) {
            let p = sigmoid(b0 + b1 * x);
            let w = p * (1.0 - p);
            let resid = y as f64 - p;
            s0 += resid;
            s1 += resid * x;
            h00 += w;
            h01 += w * x;
            h11 += w * x * x;
        }
        if s0.abs().max(s1.abs()) < IRLS_TOL {
            converged = true;
            break;
        }
        let det = h00 * h11 - h01 * h01;
        if det.abs() < 1e-300 || !det.is_finite() {
            break;
        }
        b0 += (h11 * s0 - h01 * s1) / det;
        b1 += (h00 * s1 - h01 * s0) / det;
        if !b0.is_finite() || !b1.is_finite() || b0.abs() > 1e6 || b1.abs() > 1e6 {
            break;
        }
    }

    // Perfect separation: every observation classified with strict margin
    // means the likelihood has no maximizer, even if the score is
    // numerically small at the saturated coefficients.
    let separated = outcome.iter().zip(regressor).all(|(&y, &x)| {
        let z = b0 + b1 * x;
        if y == 1 {
            z > 0.0
        } else {
            z < 0.0
        }
    });
    if separated {
        converged = false;
    }

    let fitted: Vec<f64> = regressor.iter().map(|&x| sigmoid(b0 + b1 * x)).collect();
    Ok(PropensityFit {
        intercept: b0,
        slope: b1,
        fitted,
        converged,
        iterations,
    })
}

/// Huber-style trimming thresholds on estimated propensities.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TrimRule {
    pub response_floor: f64,
    pub treat_floor: f64,
    pub treat_ceiling: f64,
}

impl Default for TrimRule {
    fn default() -> Self {
        TrimRule {
            response_floor: 0.05,
            treat_floor: 0.05,
            treat_ceiling: 0.95,
        }
    }
}

impl TrimRule {
    pub fn validate(&self) -> Result<()> {
        let ok = |f: f64, c: f64| (0.0..c).contains(&f) && c <= 1.0;
        if !ok(self.response_floor, 1.0) || !ok(self.treat_floor, self.treat_ceiling) {
            return Err(Error::InvalidTrimRule {
                floor: self.treat_floor.min(self.response_floor),
                ceiling: self.treat_ceiling,
            });
        }
        Ok(())
    }
}

struct Respondent {
    g: u8,
    y0: f64,
    y1: f64,
}

fn respondents(sample: &PanelSample) -> Vec<Respondent> {
    sample
        .records()
        .iter()
        .filter(|rec| rec.r == 1)
        .map(|rec| Respondent {
            g: rec.g,
            y0: rec.y0,
            y1: rec.y1.unwrap(),
        })
        .collect()
}

fn response_fit_for_arm(sample: &PanelSample, g: Option<u8>) -> Result<PropensityFit> {
    let (outcome, y0): (Vec<u8>, Vec<f64>) = sample
        .records()
        .iter()
        .filter(|rec| g.map_or(true, |g| rec.g == g))
        .map(|rec| (rec.r, rec.y0))
        .unzip();
    let fit = fit_logistic(&outcome, &y0)?;
    if !fit.converged {
        return Err(Error::PropensityFitFailed);
    }
    Ok(fit)
}

fn hajek(values: &[(f64, f64)]) -> Result<f64> {
    // (weight, outcome) pairs.
    let wsum: f64 = values.iter().map(|(w, _)| w).sum();
    if values.is_empty() || wsum <= 0.0 {
        return Err(Error::AllTrimmed);
    }
    Ok(values.iter().map(|(w, y)| w * y).sum::<f64>() / wsum)
}

/// IPW estimate of ATE-R: respondents in each arm are reweighted by the
/// pooled response propensity over their own-arm response propensity, so
/// each arm represents the baseline-outcome mix of all respondents.
pub fn ipw_ate_r(sample: &PanelSample, trim: Option<TrimRule>) -> Result<EstimandValue> {
    sample.require_cell(Cell::TREAT_RESP, "IPW ATE-R")?;
    sample.require_cell(Cell::CONTROL_RESP, "IPW ATE-R")?;
    if let Some(t) = trim {
        t.validate()?;
    }
    let pooled = response_fit_for_arm(sample, None)?;
    let fit_t = response_fit_for_arm(sample, Some(1))?;
    let fit_c = response_fit_for_arm(sample, Some(0))?;

    let mut treated = Vec::new();
    let mut control = Vec::new();
    let mut trimmed = 0usize;
    let resp = respondents(sample);
    for unit in &resp {
        let own = if unit.g == 1 {
            fit_t.predict(unit.y0)
        } else {
            fit_c.predict(unit.y0)
        };
        if let Some(rule) = trim {
            if own < rule.response_floor {
                trimmed += 1;
                continue;
            }
        }
        let w = pooled.predict(unit.y0) / own;
        if unit.g == 1 {
            treated.push((w, unit.y1));
        } else {
            control.push((w, unit.y1));
        }
    }
    let point = hajek(&treated)? - hajek(&control)?;
    Ok(EstimandValue {
        name: EstimandKind::AteR,
        point,
        n_used: counts_after_trim(sample),
        support_warning: false,
        clamp_fraction: 0.0,
        trimmed,
    })
}

/// IPW estimate of the ATE over respondents, weighting by the inverse of
/// the response propensity times the (arm-appropriate) treatment propensity.
pub fn ipw_ate(sample: &PanelSample, trim: Option<TrimRule>) -> Result<EstimandValue> {
    sample.require_cell(Cell::TREAT_RESP, "IPW ATE")?;
    sample.require_cell(Cell::CONTROL_RESP, "IPW ATE")?;
    if let Some(t) = trim {
        t.validate()?;
    }
    let fit_t = response_fit_for_arm(sample, Some(1))?;
    let fit_c = response_fit_for_arm(sample, Some(0))?;
    let (g_outcome, y0_all): (Vec<u8>, Vec<f64>) = sample
        .records()
        .iter()
        .map(|rec| (rec.g, rec.y0))
        .unzip();
    let treat_fit = fit_logistic(&g_outcome, &y0_all)?;
    if !treat_fit.converged {
        return Err(Error::PropensityFitFailed);
    }

    let mut treated = Vec::new();
    let mut control = Vec::new();
    let mut trimmed = 0usize;
    for unit in respondents(sample) {
        let p_resp = if unit.g == 1 {
            fit_t.predict(unit.y0)
        } else {
            fit_c.predict(unit.y0)
        };
        let p_treat = treat_fit.predict(unit.y0);
        if let Some(rule) = trim {
            if p_resp < rule.response_floor
                || p_treat < rule.treat_floor
                || p_treat > rule.treat_ceiling
            {
                trimmed += 1;
                continue;
            }
        }
        if unit.g == 1 {
            treated.push((1.0 / (p_resp * p_treat), unit.y1));
        } else {
            control.push((1.0 / (p_resp * (1.0 - p_treat)), unit.y1));
        }
    }
    let point = hajek(&treated)? - hajek(&control)?;
    Ok(EstimandValue {
        name: EstimandKind::AteRandomAssignment,
        point,
        n_used: counts_after_trim(sample),
        support_warning: false,
        clamp_fraction: 0.0,
        trimmed,
    })
}

fn counts_after_trim(sample: &PanelSample) -> CellCounts {
    CellCounts {
        n11: sample.cell_count(Cell::TREAT_RESP),
        n10: sample.cell_count(Cell::TREAT_ATTR),
        n01: sample.cell_count(Cell::CONTROL_RESP),
        n00: sample.cell_count(Cell::CONTROL_ATTR),
    }
}
