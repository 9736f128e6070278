//! Scalar packet-error-rate functions `PER(γ)` mapping accumulated linear SNR
//! to a one-shot decoding-error probability.
//!
//! Three variants are supported: an idealized hard threshold, the
//! threshold-plus-exponential-decay model commonly fitted to measured link
//! curves, and an interpolated table of measurements. All variants are
//! non-increasing in SNR and return values in `[0, 1]`.

use std::io::Read;

use thiserror::Error;

/// Floor applied to table PER entries before taking logs, so that exact zeros
/// survive log-linear interpolation.
const LOG_FLOOR: f64 = 1e-300;

/// PER values this close to 1 carry no slope information and are excluded
/// from fits.
const FIT_SATURATION: f64 = 1.0 - 1e-12;

#[derive(Debug, Error)]
pub enum PerModelError {
    #[error("snr must be nonnegative, got {0}")]
    NegativeSnr(f64),
    #[error("snr threshold must be nonnegative and finite, got {0}")]
    InvalidThreshold(f64),
    #[error("decay slope must be positive and finite, got {0}")]
    InvalidSlope(f64),
    #[error("table needs at least 2 points, got {0}")]
    TableTooSmall(usize),
    #[error("table snr values must be strictly increasing (row {0})")]
    TableSnrNotIncreasing(usize),
    #[error("table per values must be non-increasing in snr (row {0})")]
    TableNotMonotone(usize),
    #[error("table per value {0} is outside [0, 1]")]
    TablePerOutOfRange(f64),
    #[error("per sample {0} is outside (0, 1]")]
    SampleOutOfRange(f64),
    #[error("sample snr values must be strictly increasing (index {0})")]
    SamplesNotIncreasing(usize),
    #[error("no decaying region: need at least 3 samples with per < 1, got {0}")]
    NoDecayingRegion(usize),
    #[error("fitted decay slope {0} is not positive; data does not decay")]
    NonDecayingFit(f64),
    #[error("csv parse error: {0}")]
    Csv(#[from] csv::Error),
    #[error("csv is missing required column `{0}`")]
    MissingColumn(&'static str),
    #[error("csv row {row}: cannot parse `{value}` as a number")]
    BadNumber { row: usize, value: String },
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    IdealThreshold {
        snr_threshold: f64,
    },
    ExponentialThreshold {
        snr_threshold: f64,
        slope_g: f64,
    },
    /// `(snr, per)` knots, strictly increasing in snr, non-increasing in per.
    Table(Vec<(f64, f64)>),
}

/// A packet-error-rate function. Immutable after construction; shared reads
/// from multiple threads are safe.
#[derive(Debug, Clone, PartialEq)]
pub struct PerModel {
    kind: Kind,
}

impl PerModel {
    /// `PER(γ) = 1` below the threshold, `0` at or above it.
    pub fn ideal_threshold(snr_threshold: f64) -> Result<Self, PerModelError> {
        if !(snr_threshold >= 0.0) || !snr_threshold.is_finite() {
            return Err(PerModelError::InvalidThreshold(snr_threshold));
        }
        Ok(Self {
            kind: Kind::IdealThreshold { snr_threshold },
        })
    }

    /// `PER(γ) = 1` below the threshold, `exp(−g·(γ − th))` at or above it.
    pub fn exponential_threshold(snr_threshold: f64, slope_g: f64) -> Result<Self, PerModelError> {
        if !(snr_threshold >= 0.0) || !snr_threshold.is_finite() {
            return Err(PerModelError::InvalidThreshold(snr_threshold));
        }
        if !(slope_g > 0.0) || !slope_g.is_finite() {
            return Err(PerModelError::InvalidSlope(slope_g));
        }
        Ok(Self {
            kind: Kind::ExponentialThreshold {
                snr_threshold,
                slope_g,
            },
        })
    }

    /// Interpolated table of `(linear snr, per)` measurements.
    ///
    /// Evaluation interpolates linearly in `(snr, ln per)` between knots and
    /// clamps to the end values outside the table range. Construction rejects
    /// tables whose PER increases with SNR.
    pub fn table(points: Vec<(f64, f64)>) -> Result<Self, PerModelError> {
        if points.len() < 2 {
            return Err(PerModelError::TableTooSmall(points.len()));
        }
        for (i, &(snr, per)) in points.iter().enumerate() {
            if !(0.0..=1.0).contains(&per) {
                return Err(PerModelError::TablePerOutOfRange(per));
            }
            if !snr.is_finite() || snr < 0.0 {
                return Err(PerModelError::NegativeSnr(snr));
            }
            if i > 0 {
                if snr <= points[i - 1].0 {
                    return Err(PerModelError::TableSnrNotIncreasing(i));
                }
                if per > points[i - 1].1 {
                    return Err(PerModelError::TableNotMonotone(i));
                }
            }
        }
        Ok(Self {
            kind: Kind::Table(points),
        })
    }

    /// Loads a table model from CSV with header `snr_db,per`.
    pub fn table_from_csv<R: Read>(reader: R) -> Result<Self, PerModelError> {
        Self::table(per_samples_from_csv(reader)?)
    }

    /// Evaluates `PER(snr)`.
    pub fn eval(&self, snr: f64) -> Result<f64, PerModelError> {
        if snr < 0.0 || snr.is_nan() {
            return Err(PerModelError::NegativeSnr(snr));
        }
        Ok(match &self.kind {
            Kind::IdealThreshold { snr_threshold } => {
                if snr < *snr_threshold {
                    1.0
                } else {
                    0.0
                }
            }
            Kind::ExponentialThreshold {
                snr_threshold,
                slope_g,
            } => {
                if snr < *snr_threshold {
                    1.0
                } else {
                    (-slope_g * (snr - snr_threshold)).exp()
                }
            }
            Kind::Table(points) => eval_table(points, snr),
        })
    }

    /// Fits an [`exponential_threshold`](Self::exponential_threshold) model to
    /// `(linear snr, per)` samples by least squares on `ln per` over the
    /// decaying region (`per < 1`).
    ///
    /// The slope of the regression line gives `−g` and the intercept gives
    /// `g·snr_threshold`; the recovered threshold is clamped at 0.
    pub fn fit_exponential(samples: &[(f64, f64)]) -> Result<Self, PerModelError> {
        for (i, &(snr, per)) in samples.iter().enumerate() {
            if !(per > 0.0 && per <= 1.0) {
                return Err(PerModelError::SampleOutOfRange(per));
            }
            if i > 0 && snr <= samples[i - 1].0 {
                return Err(PerModelError::SamplesNotIncreasing(i));
            }
        }
        let usable: Vec<(f64, f64)> = samples
            .iter()
            .filter(|&&(_, per)| per < FIT_SATURATION)
            .map(|&(snr, per)| (snr, per.ln()))
            .collect();
        if usable.len() < 3 {
            return Err(PerModelError::NoDecayingRegion(usable.len()));
        }
        let n = usable.len() as f64;
        let sx: f64 = usable.iter().map(|p| p.0).sum();
        let sy: f64 = usable.iter().map(|p| p.1).sum();
        let sxx: f64 = usable.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = usable.iter().map(|p| p.0 * p.1).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let intercept = (sy - slope * sx) / n;
        let g = -slope;
        if !(g > 0.0) || !g.is_finite() {
            return Err(PerModelError::NonDecayingFit(g));
        }
        let threshold = (intercept / g).max(0.0);
        Self::exponential_threshold(threshold, g)
    }

    /// SNR values at which the function is not smooth; quadrature over the
    /// model splits there.
    pub(crate) fn breakpoints(&self) -> Vec<f64> {
        match &self.kind {
            Kind::IdealThreshold { snr_threshold }
            | Kind::ExponentialThreshold { snr_threshold, .. } => vec![*snr_threshold],
            Kind::Table(points) => points.iter().map(|p| p.0).collect(),
        }
    }

    /// Threshold parameter, if the variant has one.
    pub fn snr_threshold(&self) -> Option<f64> {
        match &self.kind {
            Kind::IdealThreshold { snr_threshold }
            | Kind::ExponentialThreshold { snr_threshold, .. } => Some(*snr_threshold),
            Kind::Table(_) => None,
        }
    }

    /// Decay slope `g`, if the variant has one.
    pub fn slope_g(&self) -> Option<f64> {
        match &self.kind {
            Kind::ExponentialThreshold { slope_g, .. } => Some(*slope_g),
            _ => None,
        }
    }
}

fn eval_table(points: &[(f64, f64)], snr: f64) -> f64 {
    let first = points.first().unwrap();
    let last = points.last().unwrap();
    if snr <= first.0 {
        return first.1;
    }
    if snr >= last.0 {
        return last.1;
    }
    let idx = points.partition_point(|p| p.0 <= snr);
    let (x0, p0) = points[idx - 1];
    let (x1, p1) = points[idx];
    let (l0, l1) = (p0.max(LOG_FLOOR).ln(), p1.max(LOG_FLOOR).ln());
    let frac = (snr - x0) / (x1 - x0);
    (l0 + frac * (l1 - l0)).exp().clamp(0.0, 1.0)
}

/// Reads `(linear snr, per)` samples from CSV with header `snr_db,per`.
/// SNR is converted from dB at this boundary; rows are sorted by SNR.
pub fn per_samples_from_csv<R: Read>(reader: R) -> Result<Vec<(f64, f64)>, PerModelError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &'static str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or(PerModelError::MissingColumn(name))
    };
    let snr_col = col("snr_db")?;
    let per_col = col("per")?;
    let mut out = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let parse = |idx: usize| -> Result<f64, PerModelError> {
            let raw = record.get(idx).unwrap_or("");
            raw.parse().map_err(|_| PerModelError::BadNumber {
                row: i + 2,
                value: raw.to_string(),
            })
        };
        let snr_db = parse(snr_col)?;
        let per = parse(per_col)?;
        out.push((crate::db_to_linear(snr_db), per));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ideal_threshold_below_and_above() {
        let m = PerModel::ideal_threshold(1.0).unwrap();
        assert_eq!(m.eval(0.5).unwrap(), 1.0);
        assert_eq!(m.eval(1.0).unwrap(), 0.0);
        assert_eq!(m.eval(2.0).unwrap(), 0.0);
    }

    #[test]
    fn exponential_threshold_values() {
        let m = PerModel::exponential_threshold(1.0, 2.0).unwrap();
        // Boundary: exp(0).
        assert_eq!(m.eval(1.0).unwrap(), 1.0);
        // exp(-2), cross-checked against an independent exponential routine.
        let expected = 0.1353352832366127;
        assert!((m.eval(2.0).unwrap() - expected).abs() < 1e-15);
        assert_eq!(m.eval(0.3).unwrap(), 1.0);
    }

    #[test]
    fn negative_snr_is_a_domain_error() {
        let m = PerModel::ideal_threshold(1.0).unwrap();
        assert!(matches!(m.eval(-0.1), Err(PerModelError::NegativeSnr(_))));
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(PerModel::ideal_threshold(-1.0).is_err());
        assert!(PerModel::exponential_threshold(1.0, 0.0).is_err());
        assert!(PerModel::exponential_threshold(1.0, -2.0).is_err());
    }

    #[test]
    fn table_interpolates_log_linearly() {
        let m = PerModel::table(vec![(1.0, 1e-1), (3.0, 1e-3)]).unwrap();
        // Midpoint in log space.
        assert!((m.eval(2.0).unwrap() - 1e-2).abs() < 1e-15);
        // Clamping at the ends.
        assert_eq!(m.eval(0.0).unwrap(), 1e-1);
        assert_eq!(m.eval(10.0).unwrap(), 1e-3);
    }

    #[test]
    fn table_handles_zero_per_entries() {
        let m = PerModel::table(vec![(1.0, 0.5), (2.0, 0.0), (3.0, 0.0)]).unwrap();
        let v = m.eval(1.5).unwrap();
        assert!((0.0..=0.5).contains(&v));
        // Zero entries are floored at 1e-300 before the logs.
        assert!(m.eval(2.5).unwrap() <= 1e-290);
        assert_eq!(m.eval(3.5).unwrap(), 0.0);
    }

    #[test]
    fn table_construction_rejects_bad_data() {
        assert!(matches!(
            PerModel::table(vec![(1.0, 0.5)]),
            Err(PerModelError::TableTooSmall(1))
        ));
        assert!(matches!(
            PerModel::table(vec![(1.0, 0.5), (1.0, 0.4)]),
            Err(PerModelError::TableSnrNotIncreasing(1))
        ));
        assert!(matches!(
            PerModel::table(vec![(1.0, 0.5), (2.0, 0.6)]),
            Err(PerModelError::TableNotMonotone(1))
        ));
        assert!(matches!(
            PerModel::table(vec![(1.0, 1.5), (2.0, 0.6)]),
            Err(PerModelError::TablePerOutOfRange(_))
        ));
    }

    #[test]
    fn table_from_csv_converts_db() {
        let csv = "snr_db,per\n0.0,0.9\n3.0,0.1\n6.0,0.001\n";
        let m = PerModel::table_from_csv(csv.as_bytes()).unwrap();
        assert_eq!(m.eval(1.0).unwrap(), 0.9);
        assert!((m.eval(crate::db_to_linear(6.0)).unwrap() - 0.001).abs() < 1e-15);
    }

    #[test]
    fn csv_errors_name_the_problem() {
        let missing = PerModel::table_from_csv("snr,per\n1,0.5\n".as_bytes());
        assert!(matches!(missing, Err(PerModelError::MissingColumn("snr_db"))));
        let bad = PerModel::table_from_csv("snr_db,per\n1,abc\n".as_bytes());
        assert!(matches!(bad, Err(PerModelError::BadNumber { row: 2, .. })));
    }

    #[test]
    fn fit_recovers_exact_parameters() {
        let th = 2.0f64;
        let g = 0.5f64;
        let samples: Vec<(f64, f64)> = [2.5, 3.0, 4.0, 6.0]
            .iter()
            .map(|&snr| (snr, (-g * (snr - th)).exp()))
            .collect();
        let m = PerModel::fit_exponential(&samples).unwrap();
        assert!((m.snr_threshold().unwrap() - th).abs() < 1e-9);
        assert!((m.slope_g().unwrap() - g).abs() < 1e-9);
    }

    #[test]
    fn fit_rejects_saturated_data() {
        let samples = vec![(1.0, 1.0), (2.0, 1.0), (3.0, 1.0), (4.0, 1.0)];
        assert!(matches!(
            PerModel::fit_exponential(&samples),
            Err(PerModelError::NoDecayingRegion(0))
        ));
    }

    #[test]
    fn fit_rejects_growing_data() {
        let samples = vec![(1.0, 0.01), (2.0, 0.1), (3.0, 0.5)];
        assert!(matches!(
            PerModel::fit_exponential(&samples),
            Err(PerModelError::NonDecayingFit(_))
        ));
    }

    #[test]
    fn fit_ignores_saturated_prefix() {
        let th = 1.5f64;
        let g = 1.2f64;
        let mut samples = vec![(0.5, 1.0), (1.0, 1.0)];
        samples.extend(
            [2.0, 3.0, 4.5]
                .iter()
                .map(|&snr| (snr, (-g * (snr - th)).exp())),
        );
        let m = PerModel::fit_exponential(&samples).unwrap();
        assert!((m.snr_threshold().unwrap() - th).abs() < 1e-6);
        assert!((m.slope_g().unwrap() - g).abs() < 1e-6);
    }

    #[test]
    fn large_slope_approaches_ideal_threshold() {
        let th = 1.0;
        let sharp = PerModel::exponential_threshold(th, 1e6).unwrap();
        let ideal = PerModel::ideal_threshold(th).unwrap();
        for &snr in &[0.0, 0.5, 0.99, 1.01, 1.5, 4.0] {
            let diff = (sharp.eval(snr).unwrap() - ideal.eval(snr).unwrap()).abs();
            assert!(diff < 1e-6, "snr={snr}: diff={diff}");
        }
    }

    proptest! {
        #[test]
        fn eval_is_monotone_non_increasing(
            th in 0.0..10.0f64,
            g in 0.01..20.0f64,
            a in 0.0..50.0f64,
            b in 0.0..50.0f64,
        ) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            for m in [
                PerModel::ideal_threshold(th).unwrap(),
                PerModel::exponential_threshold(th, g).unwrap(),
                PerModel::table(vec![(0.1, 0.9), (1.0, 0.5), (4.0, 1e-3), (9.0, 1e-6)]).unwrap(),
            ] {
                let plo = m.eval(lo).unwrap();
                let phi = m.eval(hi).unwrap();
                prop_assert!(phi <= plo + 1e-15);
                prop_assert!((0.0..=1.0).contains(&plo) && (0.0..=1.0).contains(&phi));
            }
        }
    }
}
