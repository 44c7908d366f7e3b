//! Randomized invariants over generated panels and samples.

use proptest::prelude::*;

use cic_attrition::bootstrap::{self, BaseStatistic, BootstrapSpec, ResampleUnit, Statistic};
use cic_attrition::cic;
use cic_attrition::empirical::EmpiricalCdf;
use cic_attrition::ipw;
use cic_attrition::panel::{Cell, PanelSample, UnitRecord};

fn panel(rows: Vec<(bool, bool, f64, f64)>) -> Option<PanelSample> {
    let records: Vec<UnitRecord> = rows
        .into_iter()
        .enumerate()
        .map(|(i, (g, r, y0, y1))| UnitRecord {
            id: i.to_string(),
            g: u8::from(g),
            r: u8::from(r),
            y0,
            y1: r.then_some(y1),
            cluster: None,
        })
        .collect();
    let sample = PanelSample::new(records).ok()?;
    (sample.cell_count(Cell::TREAT_RESP) > 0 && sample.cell_count(Cell::CONTROL_RESP) > 0)
        .then_some(sample)
}

fn row_strategy() -> impl Strategy<Value = (bool, bool, f64, f64)> {
    (any::<bool>(), any::<bool>(), -5.0..5.0f64, -5.0..5.0f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// ATE-R is the respondent-share mix of ATT-R and ATU-R, exactly.
    #[test]
    fn aggregation_identity(rows in prop::collection::vec(row_strategy(), 4..40)) {
        if let Some(sample) = panel(rows) {
            let att = cic::att_r(&sample).unwrap().point;
            let atu = cic::atu_r(&sample).unwrap().point;
            let ate = cic::ate_r(&sample).unwrap().point;
            let n11 = sample.cell_count(Cell::TREAT_RESP) as f64;
            let n01 = sample.cell_count(Cell::CONTROL_RESP) as f64;
            let w1 = n11 / (n11 + n01);
            prop_assert_eq!(ate, w1 * att + (1.0 - w1) * atu);
        }
    }

    /// With no attritors, the population estimators collapse onto their
    /// respondent counterparts.
    #[test]
    fn zero_attrition_collapse(rows in prop::collection::vec(
        (any::<bool>(), -5.0..5.0f64, -5.0..5.0f64), 4..40,
    )) {
        let full: Vec<_> = rows.into_iter().map(|(g, y0, y1)| (g, true, y0, y1)).collect();
        if let Some(sample) = panel(full) {
            let naive = cic::naive_delta_r(&sample).unwrap().point;
            prop_assert_eq!(cic::ate_random_assignment(&sample).unwrap().point, naive);
            // The decomposition weights ATU-R by n01/n while ATE-R uses
            // 1 - n11/n, so agreement is up to one rounding step.
            let nora = cic::ate_no_random_assignment(&sample).unwrap().ate.point;
            let ate_r = cic::ate_r(&sample).unwrap().point;
            prop_assert!((nora - ate_r).abs() <= 1e-12 * (1.0 + ate_r.abs()));
        }
    }

    /// When both arms share the same baseline values and a common location
    /// shift between periods, the treatment arm's extra shift is recovered
    /// up to float noise.
    #[test]
    fn location_shift_recovery(
        y0s in prop::collection::vec(-5.0..5.0f64, 3..20),
        delta in -3.0..3.0f64,
        effect in -3.0..3.0f64,
    ) {
        let rows: Vec<_> = y0s
            .iter()
            .flat_map(|&y0| {
                [
                    (true, true, y0, y0 + delta + effect),
                    (false, true, y0, y0 + delta),
                ]
            })
            .collect();
        if let Some(sample) = panel(rows) {
            let att = cic::att_r(&sample).unwrap().point;
            prop_assert!((att - effect).abs() < 1e-9, "ATT-R {} vs {}", att, effect);
        }
    }

    /// qq_map with identical source and target is the identity on sample
    /// points, and is nondecreasing for any target.
    #[test]
    fn qq_map_identity_and_monotone(
        source in prop::collection::vec(-5.0..5.0f64, 1..20),
        target in prop::collection::vec(-5.0..5.0f64, 1..20),
        probes in prop::collection::vec(-6.0..6.0f64, 2..20),
    ) {
        let src = EmpiricalCdf::new(&source);
        for &y in &source {
            prop_assert_eq!(EmpiricalCdf::qq_map(&src, &src, y), y);
        }
        let tgt = EmpiricalCdf::new(&target);
        let mut sorted = probes;
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mapped: Vec<f64> = sorted
            .iter()
            .map(|&y| EmpiricalCdf::qq_map(&src, &tgt, y))
            .collect();
        prop_assert!(mapped.windows(2).all(|w| w[0] <= w[1]));
    }

    /// inf and sup inverses agree with direct enumeration over the sample.
    #[test]
    fn inverses_match_enumeration(
        values in prop::collection::vec(-3i32..=3, 1..12),
        qs in prop::collection::vec(0.0..=1.0f64, 1..10),
    ) {
        let values: Vec<f64> = values.into_iter().map(f64::from).collect();
        let cdf = EmpiricalCdf::new(&values);
        let ecdf = |y: f64| values.iter().filter(|&&v| v <= y).count() as f64 / values.len() as f64;
        for &q in &qs {
            if q > 0.0 {
                let naive = values
                    .iter()
                    .copied()
                    .filter(|&y| ecdf(y) >= q)
                    .fold(f64::INFINITY, f64::min);
                prop_assert_eq!(cdf.inf_inverse(q), naive);
            }
            let naive_sup = values
                .iter()
                .copied()
                .filter(|&y| ecdf(y) <= q)
                .fold(None, |best: Option<f64>, y| Some(best.map_or(y, |b| b.max(y))));
            prop_assert_eq!(cdf.sup_inverse(q).value(), naive_sup);
        }
    }

    /// The same spec yields the same bootstrap output on repeat runs.
    #[test]
    fn bootstrap_deterministic(seed in any::<u64>(), draws in 20usize..60) {
        let rows: Vec<_> = (0..24)
            .map(|i| (i % 2 == 0, i % 6 != 0, f64::from(i % 5), f64::from(i % 7)))
            .collect();
        let sample = panel(rows).unwrap();
        let spec = BootstrapSpec {
            draws,
            seed,
            resample_unit: ResampleUnit::Unit,
            ci_level: 0.9,
        };
        let stat = Statistic::Single(BaseStatistic::AttR);
        let a = bootstrap::bootstrap(&sample, stat, &spec).unwrap();
        let b = bootstrap::bootstrap(&sample, stat, &spec).unwrap();
        prop_assert_eq!(a.point, b.point);
        prop_assert_eq!(a.se, b.se);
        prop_assert_eq!(a.ci, b.ci);
    }

    /// At the reported optimum the logistic score matches a central finite
    /// difference of the log-likelihood to 1e-6.
    #[test]
    fn logistic_score_matches_finite_difference(
        xs in prop::collection::vec(-2.0..2.0f64, 20..80),
        flips in prop::collection::vec(0.0..1.0f64, 80),
        b0 in -1.0..1.0f64,
        b1 in -1.0..1.0f64,
    ) {
        let outcome: Vec<u8> = xs
            .iter()
            .zip(&flips)
            .map(|(&x, &u)| u8::from(u < 1.0 / (1.0 + (-b0 - b1 * x).exp())))
            .collect();
        prop_assume!(outcome.iter().any(|&y| y == 0) && outcome.iter().any(|&y| y == 1));
        let fit = match ipw::fit_logistic(&outcome, &xs) {
            Ok(fit) if fit.converged => fit,
            _ => return Ok(()),
        };
        let (s0, s1) = fit.score(&outcome, &xs);
        let ll = |c0: f64, c1: f64| -> f64 {
            outcome
                .iter()
                .zip(&xs)
                .map(|(&y, &x)| {
                    let z = c0 + c1 * x;
                    f64::from(y) * z - (1.0 + z.exp()).ln()
                })
                .sum()
        };
        let h = 1e-5;
        let fd0 = (ll(fit.intercept + h, fit.slope) - ll(fit.intercept - h, fit.slope)) / (2.0 * h);
        let fd1 = (ll(fit.intercept, fit.slope + h) - ll(fit.intercept, fit.slope - h)) / (2.0 * h);
        prop_assert!(s0.abs() < 1e-6 && s1.abs() < 1e-6, "score {} {}", s0, s1);
        prop_assert!((fd0 - s0).abs() < 1e-6 && (fd1 - s1).abs() < 1e-6);
    }
}
