//! Changes-in-changes estimators under attrition: respondent effects,
//! attritor imputations, the two ATE routes, discrete-outcome CDF bounds,
//! and the random-assignment mixture diagnostic.

use serde::Serialize;

use crate::empirical::{EmpiricalCdf, SupInverse};
use crate::error::Result;
use crate::panel::{Cell, OutcomeField, PanelSample};

/// Reportable quantities. The two ATE variants name their identification
/// route explicitly; summary tables typically call both "ATE".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum EstimandKind {
    AttR,
    AtuR,
    AteR,
    AteRandomAssignment,
    AteNoRandomAssignment,
    AttA,
    AtuA,
    NaiveDeltaR,
}

impl EstimandKind {
    pub fn label(&self) -> &'static str {
        match self {
            EstimandKind::AttR => "ATT-R",
            EstimandKind::AtuR => "ATU-R",
            EstimandKind::AteR => "ATE-R",
            EstimandKind::AteRandomAssignment => "ATE-RA",
            EstimandKind::AteNoRandomAssignment => "ATE-NORA",
            EstimandKind::AttA => "ATT-A",
            EstimandKind::AtuA => "ATU-A",
            EstimandKind::NaiveDeltaR => "naive-dR",
        }
    }

    /// Identification route, reported alongside every estimate.
    pub fn route(&self) -> &'static str {
        match self {
            EstimandKind::AttR | EstimandKind::AtuR | EstimandKind::AteR => "respondents-only",
            EstimandKind::AteRandomAssignment => "random-assignment",
            EstimandKind::AteNoRandomAssignment
            | EstimandKind::AttA
            | EstimandKind::AtuA => "no-random-assignment",
            EstimandKind::NaiveDeltaR => "uncorrected",
        }
    }
}

/// Per-cell counts actually consumed by an estimator.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct CellCounts {
    pub n11: usize,
    pub n10: usize,
    pub n01: usize,
    pub n00: usize,
}

impl CellCounts {
    fn from_sample(sample: &PanelSample) -> Self {
        CellCounts {
            n11: sample.cell_count(Cell::TREAT_RESP),
            n10: sample.cell_count(Cell::TREAT_ATTR),
            n01: sample.cell_count(Cell::CONTROL_RESP),
            n00: sample.cell_count(Cell::CONTROL_ATTR),
        }
    }
}

/// A point estimate with its bookkeeping.
#[derive(Debug, Clone, Serialize)]
pub struct EstimandValue {
    pub name: EstimandKind,
    pub point: f64,
    pub n_used: CellCounts,
    /// True when some mapped baseline value fell outside the identifying
    /// sample's observed range and the step composition clamped.
    pub support_warning: bool,
    /// Fraction of mapped values that were clamped.
    pub clamp_fraction: f64,
    /// Units dropped by propensity trimming (IPW estimators only).
    pub trimmed: usize,
}

/// One direction of a rank-preserving transform, identified from a
/// respondent cell: maps a baseline value to the follow-up distribution
/// at the same empirical rank.
#[derive(Debug, Clone)]
pub struct QqTransform {
    pub baseline: EmpiricalCdf,
    pub follow_up: EmpiricalCdf,
}

impl QqTransform {
    fn from_cell(sample: &PanelSample, cell: Cell) -> Result<Self> {
        let y0 = sample.subsample(cell, OutcomeField::Baseline)?;
        let y1 = sample.subsample(cell, OutcomeField::FollowUp)?;
        Ok(QqTransform {
            baseline: EmpiricalCdf::new(&y0),
            follow_up: EmpiricalCdf::new(&y1),
        })
    }

    /// Baseline -> follow-up map at the same ECDF level.
    pub fn impute(&self, y0: f64) -> f64 {
        EmpiricalCdf::qq_map(&self.baseline, &self.follow_up, y0)
    }

    /// Follow-up -> baseline direction (the T map itself).
    pub fn to_baseline(&self, y1: f64) -> f64 {
        EmpiricalCdf::qq_map(&self.follow_up, &self.baseline, y1)
    }

    fn outside_baseline_range(&self, y0: f64) -> bool {
        y0 < self.baseline.min() || y0 > self.baseline.max()
    }
}

/// Both transforms of the identification lemma: the untreated map built
/// from control respondents and the treated map from treatment respondents.
#[derive(Debug, Clone)]
pub struct CicTransforms {
    pub t0: QqTransform,
    pub t1: QqTransform,
}

impl CicTransforms {
    pub fn build(sample: &PanelSample) -> Result<Self> {
        sample.require_cell(Cell::CONTROL_RESP, "CiC transforms")?;
        sample.require_cell(Cell::TREAT_RESP, "CiC transforms")?;
        Ok(CicTransforms {
            t0: QqTransform::from_cell(sample, Cell::CONTROL_RESP)?,
            t1: QqTransform::from_cell(sample, Cell::TREAT_RESP)?,
        })
    }
}

struct Imputed {
    values: Vec<f64>,
    clamped: usize,
}

fn impute_all(transform: &QqTransform, baselines: &[f64]) -> Imputed {
    let mut clamped = 0;
    let values = baselines
        .iter()
        .map(|&y0| {
            if transform.outside_baseline_range(y0) {
                clamped += 1;
            }
            transform.impute(y0)
        })
        .collect();
    Imputed { values, clamped }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Difference in follow-up means between treatment and control respondents.
pub fn naive_delta_r(sample: &PanelSample) -> Result<EstimandValue> {
    let y1_t = sample.subsample(Cell::TREAT_RESP, OutcomeField::FollowUp)?;
    let y1_c = sample.subsample(Cell::CONTROL_RESP, OutcomeField::FollowUp)?;
    Ok(EstimandValue {
        name: EstimandKind::NaiveDeltaR,
        point: mean(&y1_t) - mean(&y1_c),
        n_used: CellCounts::from_sample(sample),
        support_warning: false,
        clamp_fraction: 0.0,
        trimmed: 0,
    })
}

/// ATT-R: observed treated-respondent mean minus the control-map imputed
/// counterfactual mean over the same units.
pub fn att_r(sample: &PanelSample) -> Result<EstimandValue> {
    let transforms = CicTransforms::build(sample)?;
    att_r_with(sample, &transforms)
}

fn att_r_with(sample: &PanelSample, transforms: &CicTransforms) -> Result<EstimandValue> {
    let y1_t = sample.subsample(Cell::TREAT_RESP, OutcomeField::FollowUp)?;
    let y0_t = sample.subsample(Cell::TREAT_RESP, OutcomeField::Baseline)?;
    let imputed = impute_all(&transforms.t0, &y0_t);
    Ok(EstimandValue {
        name: EstimandKind::AttR,
        point: mean(&y1_t) - mean(&imputed.values),
        n_used: CellCounts::from_sample(sample),
        support_warning: imputed.clamped > 0,
        clamp_fraction: imputed.clamped as f64 / y0_t.len() as f64,
        trimmed: 0,
    })
}

/// ATU-R: treated-map imputed mean over control respondents minus their
/// observed follow-up mean.
pub fn atu_r(sample: &PanelSample) -> Result<EstimandValue> {
    let transforms = CicTransforms::build(sample)?;
    atu_r_with(sample, &transforms)
}

fn atu_r_with(sample: &PanelSample, transforms: &CicTransforms) -> Result<EstimandValue> {
    let y1_c = sample.subsample(Cell::CONTROL_RESP, OutcomeField::FollowUp)?;
    let y0_c = sample.subsample(Cell::CONTROL_RESP, OutcomeField::Baseline)?;
    let imputed = impute_all(&transforms.t1, &y0_c);
    Ok(EstimandValue {
        name: EstimandKind::AtuR,
        point: mean(&imputed.values) - mean(&y1_c),
        n_used: CellCounts::from_sample(sample),
        support_warning: imputed.clamped > 0,
        clamp_fraction: imputed.clamped as f64 / y0_c.len() as f64,
        trimmed: 0,
    })
}

/// Respondent-share-weighted combination of ATT-R and ATU-R.
pub fn ate_r(sample: &PanelSample) -> Result<EstimandValue> {
    let att = att_r(sample)?;
    let atu = atu_r(sample)?;
    let n11 = att.n_used.n11 as f64;
    let n01 = att.n_used.n01 as f64;
    let w1 = n11 / (n11 + n01);
    Ok(EstimandValue {
        name: EstimandKind::AteR,
        point: w1 * att.point + (1.0 - w1) * atu.point,
        n_used: att.n_used,
        support_warning: att.support_warning || atu.support_warning,
        clamp_fraction: (att.clamp_fraction * n11 + atu.clamp_fraction * n01) / (n11 + n01),
        trimmed: 0,
    })
}

/// ATE under random assignment: arm means mixing observed respondents with
/// same-arm imputed attritors. An arm with zero attritors contributes its
/// respondent mean with weight one.
pub fn ate_random_assignment(sample: &PanelSample) -> Result<EstimandValue> {
    let transforms = CicTransforms::build(sample)?;
    let y1_t = sample.subsample(Cell::TREAT_RESP, OutcomeField::FollowUp)?;
    let y1_c = sample.subsample(Cell::CONTROL_RESP, OutcomeField::FollowUp)?;
    let counts = CellCounts::from_sample(sample);

    let mut clamped = 0usize;
    let mut imputations = 0usize;

    let mut arm_mean = |resp: &[f64],
                        attr_cell: Cell,
                        transform: &QqTransform|
     -> Result<f64> {
        let n_resp = resp.len() as f64;
        let n_attr = sample.cell_count(attr_cell) as f64;
        if n_attr == 0.0 {
            return Ok(mean(resp));
        }
        let y0_attr = sample.subsample(attr_cell, OutcomeField::Baseline)?;
        let imputed = impute_all(transform, &y0_attr);
        clamped += imputed.clamped;
        imputations += y0_attr.len();
        let p_resp = n_resp / (n_resp + n_attr);
        Ok(p_resp * mean(resp) + (1.0 - p_resp) * mean(&imputed.values))
    };

    let treated = arm_mean(&y1_t, Cell::TREAT_ATTR, &transforms.t1)?;
    let control = arm_mean(&y1_c, Cell::CONTROL_ATTR, &transforms.t0)?;
    Ok(EstimandValue {
        name: EstimandKind::AteRandomAssignment,
        point: treated - control,
        n_used: counts,
        support_warning: clamped > 0,
        clamp_fraction: if imputations == 0 {
            0.0
        } else {
            clamped as f64 / imputations as f64
        },
        trimmed: 0,
    })
}

/// The four-subpopulation decomposition of the ATE without random
/// assignment, with all components reported.
#[derive(Debug, Clone, Serialize)]
pub struct AteDecomposition {
    pub ate: EstimandValue,
    pub att_r: EstimandValue,
    pub att_a: EstimandValue,
    pub atu_r: EstimandValue,
    pub atu_a: EstimandValue,
}

fn attritor_effect(
    sample: &PanelSample,
    transforms: &CicTransforms,
    cell: Cell,
    name: EstimandKind,
) -> Result<EstimandValue> {
    sample.require_cell(cell, name.label())?;
    let y0 = sample.subsample(cell, OutcomeField::Baseline)?;
    let treated = impute_all(&transforms.t1, &y0);
    let untreated = impute_all(&transforms.t0, &y0);
    let clamped = treated.clamped + untreated.clamped;
    Ok(EstimandValue {
        name,
        point: mean(&treated.values) - mean(&untreated.values),
        n_used: CellCounts::from_sample(sample),
        support_warning: clamped > 0,
        clamp_fraction: clamped as f64 / (2 * y0.len()) as f64,
        trimmed: 0,
    })
}

/// ATE without random assignment: P(G,R)-weighted sum of ATT-R, ATT-A,
/// ATU-R, ATU-A. With no attritors in either arm this collapses to ATE-R.
pub fn ate_no_random_assignment(sample: &PanelSample) -> Result<AteDecomposition> {
    let transforms = CicTransforms::build(sample)?;
    let att_r = att_r_with(sample, &transforms)?;
    let atu_r = atu_r_with(sample, &transforms)?;
    let zero = |name| EstimandValue {
        name,
        point: 0.0,
        n_used: CellCounts::from_sample(sample),
        support_warning: false,
        clamp_fraction: 0.0,
        trimmed: 0,
    };
    // An empty attritor cell enters with zero weight, so its effect is
    // reported as zero rather than failing the whole decomposition.
    let attritor_term = |cell: Cell, name| -> Result<EstimandValue> {
        if sample.cell_count(cell) == 0 {
            Ok(zero(name))
        } else {
            attritor_effect(sample, &transforms, cell, name)
        }
    };
    let att_a = attritor_term(Cell::TREAT_ATTR, EstimandKind::AttA)?;
    let atu_a = attritor_term(Cell::CONTROL_ATTR, EstimandKind::AtuA)?;

    let p = |cell| sample.cell_probability(cell);
    let point = p(Cell::TREAT_RESP) * att_r.point
        + p(Cell::TREAT_ATTR) * att_a.point
        + p(Cell::CONTROL_RESP) * atu_r.point
        + p(Cell::CONTROL_ATTR) * atu_a.point;
    // Renormalize by total mass in case an arm has zero attritors (then the
    // attritor weights are zero and the sum of the four weights is still 1).
    let ate = EstimandValue {
        name: EstimandKind::AteNoRandomAssignment,
        point,
        n_used: CellCounts::from_sample(sample),
        support_warning: att_r.support_warning
            || atu_r.support_warning
            || att_a.support_warning
            || atu_a.support_warning,
        clamp_fraction: 0.0,
        trimmed: 0,
    };
    Ok(AteDecomposition { ate, att_r, att_a, atu_r, atu_a })
}

/// Which potential outcome a bound or mixture refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Potential {
    Untreated,
    Treated,
}

impl Potential {
    fn identifying_cell(self) -> Cell {
        match self {
            Potential::Untreated => Cell::CONTROL_RESP,
            Potential::Treated => Cell::TREAT_RESP,
        }
    }
}

/// Lower/upper CDF bound curves for weakly monotone (discrete) outcomes.
#[derive(Debug, Clone, Serialize)]
pub struct BoundCurves {
    pub grid: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// CDF bounds for the potential outcome `potential` in `target_cell`,
/// evaluated on `grid`. The lower bound routes through the sup-inverse,
/// the upper bound through the inf-inverse; a sup-inverse of -inf
/// contributes a lower bound of zero.
pub fn discrete_bounds(
    sample: &PanelSample,
    target_cell: Cell,
    potential: Potential,
    grid: &[f64],
) -> Result<BoundCurves> {
    if grid.is_empty() {
        return Err(crate::error::Error::InvalidArgument(
            "bounds grid must be non-empty".into(),
        ));
    }
    let id_cell = potential.identifying_cell();
    sample.require_cell(id_cell, "discrete bounds")?;
    sample.require_cell(target_cell, "discrete bounds")?;
    let id_y0 = EmpiricalCdf::new(&sample.subsample(id_cell, OutcomeField::Baseline)?);
    let id_y1 = EmpiricalCdf::new(&sample.subsample(id_cell, OutcomeField::FollowUp)?);
    let target_y0 =
        EmpiricalCdf::new(&sample.subsample(target_cell, OutcomeField::Baseline)?);

    let mut lower = Vec::with_capacity(grid.len());
    let mut upper = Vec::with_capacity(grid.len());
    for &y in grid {
        let q = id_y1.eval(y);
        let lb = match id_y0.sup_inverse(q) {
            SupInverse::NegInfinity => 0.0,
            SupInverse::Value(v) => target_y0.eval(v),
        };
        // At q = 0 the inf runs over the whole real line, so the upper
        // bound degenerates to 0 rather than the smallest sample value.
        let ub = if q == 0.0 {
            0.0
        } else {
            target_y0.eval(id_y0.inf_inverse(q))
        };
        lower.push(lb.min(ub));
        upper.push(ub);
    }
    Ok(BoundCurves { grid: grid.to_vec(), lower, upper })
}

/// Sup-norm discrepancy between the two arms' mixture CDFs of Y1(d),
/// one statistic per d.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RaDiagnostic {
    pub untreated: f64,
    pub treated: f64,
}

impl RaDiagnostic {
    pub fn max(&self) -> f64 {
        self.untreated.max(self.treated)
    }
}

/// The testable implication of random assignment: for each d, the
/// response-share mixture of the Y1(d) distribution must agree across
/// arms. Observed distributions are used where available and transform
/// imputations elsewhere; the statistic is the sup over the pooled grid.
pub fn ra_diagnostic(sample: &PanelSample, grid: Option<&[f64]>) -> Result<RaDiagnostic> {
    for cell in Cell::ALL {
        sample.require_cell(cell, "RA diagnostic")?;
    }
    let untreated = mixture_discrepancy(sample, Potential::Untreated, grid)?;
    let treated = mixture_discrepancy(sample, Potential::Treated, grid)?;
    Ok(RaDiagnostic { untreated, treated })
}

/// Y1(d) samples per (g, r) cell: observed follow-ups for the concordant
/// respondent cell, transform imputations from baselines elsewhere.
fn mixture_cell_values(
    sample: &PanelSample,
    transforms: &CicTransforms,
    potential: Potential,
    cell: Cell,
) -> Result<Vec<f64>> {
    let transform = match potential {
        Potential::Untreated => &transforms.t0,
        Potential::Treated => &transforms.t1,
    };
    let observed = cell.r == 1 && ((potential == Potential::Treated) == (cell.g == 1));
    if observed {
        sample.subsample(cell, OutcomeField::FollowUp)
    } else {
        let y0 = sample.subsample(cell, OutcomeField::Baseline)?;
        Ok(impute_all(transform, &y0).values)
    }
}

/// Pointwise difference of the two arms' mixture CDFs of Y1(d) on a grid:
/// treated-arm mixture minus control-arm mixture at each grid point.
pub fn mixture_curve_diff(
    sample: &PanelSample,
    potential: Potential,
    grid: &[f64],
) -> Result<Vec<f64>> {
    let transforms = CicTransforms::build(sample)?;
    let treat_resp = mixture_cell_values(sample, &transforms, potential, Cell::TREAT_RESP)?;
    let treat_attr = mixture_cell_values(sample, &transforms, potential, Cell::TREAT_ATTR)?;
    let control_resp = mixture_cell_values(sample, &transforms, potential, Cell::CONTROL_RESP)?;
    let control_attr = mixture_cell_values(sample, &transforms, potential, Cell::CONTROL_ATTR)?;

    let arm_mixture = |resp: &[f64], attr: &[f64]| {
        let (n_resp, n_attr) = (resp.len() as f64, attr.len() as f64);
        let p_resp = n_resp / (n_resp + n_attr);
        let f_resp = EmpiricalCdf::new(resp);
        let f_attr = EmpiricalCdf::new(attr);
        move |y: f64| p_resp * f_resp.eval(y) + (1.0 - p_resp) * f_attr.eval(y)
    };
    let mix_treat = arm_mixture(&treat_resp, &treat_attr);
    let mix_control = arm_mixture(&control_resp, &control_attr);
    Ok(grid.iter().map(|&y| mix_treat(y) - mix_control(y)).collect())
}

/// All Y1(d) values entering the mixtures, the natural evaluation grid.
pub fn mixture_grid(sample: &PanelSample, potential: Potential) -> Result<Vec<f64>> {
    let transforms = CicTransforms::build(sample)?;
    let mut grid = Vec::new();
    for cell in Cell::ALL {
        grid.extend(mixture_cell_values(sample, &transforms, potential, cell)?);
    }
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();
    Ok(grid)
}

fn mixture_discrepancy(
    sample: &PanelSample,
    potential: Potential,
    grid: Option<&[f64]>,
) -> Result<f64> {
    let diffs = match grid {
        Some(grid) => mixture_curve_diff(sample, potential, grid)?,
        None => {
            let grid = mixture_grid(sample, potential)?;
            mixture_curve_diff(sample, potential, &grid)?
        }
    };
    Ok(diffs.into_iter().fold(0.0f64, |m, d| m.max(d.abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::UnitRecord;

    fn unit(id: usize, g: u8, r: u8, y0: f64, y1: Option<f64>) -> UnitRecord {
        UnitRecord {
            id: id.to_string(),
            g,
            r,
            y0,
            y1,
            cluster: None,
        }
    }

    fn sample_from(rows: &[(u8, u8, f64, Option<f64>)]) -> PanelSample {
        PanelSample::new(
            rows.iter()
                .enumerate()
                .map(|(i, &(g, r, y0, y1))| unit(i, g, r, y0, y1))
                .collect(),
        )
        .unwrap()
    }

    /// Hand-evaluated ATT-R: control respondents Y0={1,2,3}, Y1={2,4,6};
    /// treated respondents Y0={1.5,2.5} map to counterfactuals {2,4}.
    #[test]
    fn att_r_hand_example() {
        let sample = sample_from(&[
            (1, 1, 1.5, Some(5.0)),
            (1, 1, 2.5, Some(7.0)),
            (0, 1, 1.0, Some(2.0)),
            (0, 1, 2.0, Some(4.0)),
            (0, 1, 3.0, Some(6.0)),
        ]);
        let est = att_r(&sample).unwrap();
        assert!((est.point - 3.0).abs() < 1e-12);
        assert!(!est.support_warning);
    }

    #[test]
    fn att_r_null_effect_when_maps_align() {
        // Treatment respondents' follow-up equals the control-map image of
        // their baselines.
        let sample = sample_from(&[
            (1, 1, 1.0, Some(2.0)),
            (1, 1, 3.0, Some(6.0)),
            (0, 1, 1.0, Some(2.0)),
            (0, 1, 2.0, Some(4.0)),
            (0, 1, 3.0, Some(6.0)),
        ]);
        let est = att_r(&sample).unwrap();
        assert!(est.point.abs() < 1e-12);
    }

    #[test]
    fn atu_r_symmetric_dataset_is_zero() {
        let sample = sample_from(&[
            (1, 1, 1.0, Some(1.0)),
            (1, 1, 2.0, Some(2.0)),
            (0, 1, 1.0, Some(1.0)),
            (0, 1, 2.0, Some(2.0)),
        ]);
        assert!(atu_r(&sample).unwrap().point.abs() < 1e-12);
        assert!(att_r(&sample).unwrap().point.abs() < 1e-12);
    }

    #[test]
    fn ate_r_is_weighted_combination() {
        let sample = sample_from(&[
            (1, 1, 1.0, Some(4.0)),
            (1, 1, 2.0, Some(5.0)),
            (0, 1, 1.0, Some(1.0)),
            (0, 1, 2.0, Some(2.0)),
        ]);
        let att = att_r(&sample).unwrap().point;
        let atu = atu_r(&sample).unwrap().point;
        let ate = ate_r(&sample).unwrap().point;
        assert!((ate - 0.5 * (att + atu)).abs() < 1e-15);
    }

    #[test]
    fn zero_attrition_ate_ra_is_arm_mean_difference() {
        let sample = sample_from(&[
            (1, 1, 1.0, Some(4.0)),
            (1, 1, 2.0, Some(6.0)),
            (0, 1, 1.0, Some(1.0)),
            (0, 1, 2.0, Some(3.0)),
        ]);
        let est = ate_random_assignment(&sample).unwrap();
        assert!((est.point - 3.0).abs() < 1e-12);
    }

    #[test]
    fn zero_attrition_nora_equals_ate_r() {
        let sample = sample_from(&[
            (1, 1, 1.0, Some(4.0)),
            (1, 1, 2.0, Some(6.0)),
            (0, 1, 1.5, Some(1.0)),
            (0, 1, 2.5, Some(3.0)),
        ]);
        let decomp = ate_no_random_assignment(&sample).unwrap();
        let ate_resp = ate_r(&sample).unwrap();
        assert!((decomp.ate.point - ate_resp.point).abs() < 1e-12);
    }

    #[test]
    fn location_shift_recovery() {
        // Y1 = Y0 + 3 in the treated arm, Y1 = Y0 + 1 in control: ATT-R = 2.
        let sample = sample_from(&[
            (1, 1, 1.0, Some(4.0)),
            (1, 1, 2.0, Some(5.0)),
            (1, 1, 3.0, Some(6.0)),
            (0, 1, 1.0, Some(2.0)),
            (0, 1, 2.0, Some(3.0)),
            (0, 1, 3.0, Some(4.0)),
        ]);
        assert!((att_r(&sample).unwrap().point - 2.0).abs() < 1e-12);
        assert!((atu_r(&sample).unwrap().point - 2.0).abs() < 1e-12);
    }

    #[test]
    fn support_warning_fires_on_out_of_range_baselines() {
        let sample = sample_from(&[
            (1, 1, 10.0, Some(4.0)),
            (0, 1, 1.0, Some(2.0)),
            (0, 1, 2.0, Some(3.0)),
        ]);
        let est = att_r(&sample).unwrap();
        assert!(est.support_warning);
        assert!((est.clamp_fraction - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bounds_collapse_on_distinct_continuous_data() {
        let sample = sample_from(&[
            (1, 1, 1.1, Some(4.2)),
            (1, 1, 2.3, Some(5.7)),
            (0, 1, 1.4, Some(2.9)),
            (0, 1, 2.6, Some(3.8)),
        ]);
        let grid: Vec<f64> = vec![2.9, 3.8];
        let curves =
            discrete_bounds(&sample, Cell::TREAT_RESP, Potential::Untreated, &grid).unwrap();
        for i in 0..grid.len() {
            assert_eq!(curves.lower[i], curves.upper[i]);
        }
    }

    #[test]
    fn bounds_degenerate_outcome() {
        let sample = sample_from(&[
            (1, 1, 2.0, Some(2.0)),
            (1, 1, 2.0, Some(2.0)),
            (0, 1, 2.0, Some(2.0)),
            (0, 1, 2.0, Some(2.0)),
        ]);
        let curves = discrete_bounds(
            &sample,
            Cell::TREAT_RESP,
            Potential::Untreated,
            &[1.0, 2.0, 3.0],
        )
        .unwrap();
        assert_eq!(curves.lower, vec![0.0, 1.0, 1.0]);
        assert_eq!(curves.upper, vec![0.0, 1.0, 1.0]);
    }

    #[test]
    fn ra_diagnostic_zero_on_identical_arms() {
        let sample = sample_from(&[
            (1, 1, 1.0, Some(2.0)),
            (1, 1, 2.0, Some(3.0)),
            (1, 0, 1.5, None),
            (0, 1, 1.0, Some(2.0)),
            (0, 1, 2.0, Some(3.0)),
            (0, 0, 1.5, None),
        ]);
        let diag = ra_diagnostic(&sample, None).unwrap();
        assert!(diag.untreated.abs() < 1e-12);
        assert!(diag.treated.abs() < 1e-12);
    }
}
