//! Empirical step distributions and their two generalized inverses.
//!
//! Everything downstream (the quantile-quantile transforms, the discrete
//! bounds, the mixture diagnostic) is built from these three primitives:
//! the empirical CDF, its left-continuous inf-inverse, and the sup-inverse
//! used for lower bounds on discrete outcomes.

/// Clamping tolerance applied to quantile arguments after floating-point
/// composition; the CDF itself only produces exact multiples of 1/n.
const Q_TOL: f64 = 1e-12;

/// Result of the sup-inverse, which may fall below the whole support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SupInverse {
    /// No sample value has CDF at or below the requested level.
    NegInfinity,
    Value(f64),
}

impl SupInverse {
    pub fn value(self) -> Option<f64> {
        match self {
            SupInverse::NegInfinity => None,
            SupInverse::Value(v) => Some(v),
        }
    }
}

/// Step-function empirical CDF over an observed sample, ties kept.
#[derive(Debug, Clone)]
pub struct EmpiricalCdf {
    values: Vec<f64>,
}

impl EmpiricalCdf {
    /// Builds the distribution from a non-empty sample. Panics on an empty
    /// slice or non-finite values; callers validate samples at load time.
    pub fn new(sample: &[f64]) -> Self {
        assert!(!sample.is_empty(), "EmpiricalCdf requires a non-empty sample");
        assert!(
            sample.iter().all(|v| v.is_finite()),
            "EmpiricalCdf requires finite values"
        );
        let mut values = sample.to_vec();
        values.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        EmpiricalCdf { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// F(y) = #{values <= y} / n, right-continuous.
    pub fn eval(&self, y: f64) -> f64 {
        let count = self.values.partition_point(|&v| v <= y);
        count as f64 / self.values.len() as f64
    }

    /// Smallest sample value with F(y) >= q; q = 0 returns the minimum.
    pub fn inf_inverse(&self, q: f64) -> f64 {
        let q = clamp_unit(q);
        let n = self.values.len();
        // Count of sorted positions whose CDF level lies strictly below q.
        let below = index_partition(n, |i| ((i + 1) as f64 / n as f64) < q - Q_TOL);
        self.values[below.min(n - 1)]
    }

    /// Largest sample value with F(y) <= q, or the -inf marker when even
    /// the minimum exceeds q.
    pub fn sup_inverse(&self, q: f64) -> SupInverse {
        let q = clamp_unit(q);
        let n = self.values.len();
        // Largest sorted position whose CDF level (ties included) is <= q.
        let ok = |i: usize| -> bool {
            let count_le = self.values.partition_point(|&v| v <= self.values[i]);
            count_le as f64 / n as f64 <= q + Q_TOL
        };
        if !ok(0) {
            return SupInverse::NegInfinity;
        }
        SupInverse::Value(self.values[index_partition(n, ok) - 1])
    }

    /// The rank-preserving map: target.inf_inverse(source.eval(y)).
    pub fn qq_map(source: &EmpiricalCdf, target: &EmpiricalCdf, y: f64) -> f64 {
        target.inf_inverse(source.eval(y))
    }
}

/// Binary search over 0..n for the first index where `pred` flips to false;
/// `pred` must be true on a (possibly empty) prefix only.
fn index_partition(n: usize, pred: impl Fn(usize) -> bool) -> usize {
    let (mut lo, mut hi) = (0usize, n);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

fn clamp_unit(q: f64) -> f64 {
    assert!(
        (-Q_TOL..=1.0 + Q_TOL).contains(&q),
        "quantile level {q} outside [0,1]"
    );
    q.clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov-Smirnov sup distance between sorted-on-demand samples.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let fa = EmpiricalCdf::new(a);
    let fb = EmpiricalCdf::new(b);
    let mut max = 0.0f64;
    for &y in fa.values().iter().chain(fb.values()) {
        max = max.max((fa.eval(y) - fb.eval(y)).abs());
    }
    max
}

/// Asymptotic Kolmogorov p-value Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2)
/// evaluated at lambda = sqrt(nm/(n+m)) * d.
pub fn ks_p_value(d: f64, n: usize, m: usize) -> f64 {
    let scale = ((n * m) as f64 / (n + m) as f64).sqrt();
    let lambda = scale * d;
    if lambda < 1e-8 {
        return 1.0;
    }
    let mut p = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64).powi(2) * lambda * lambda).exp();
        p += if k % 2 == 1 { 2.0 * term } else { -2.0 * term };
        if term < 1e-16 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}
