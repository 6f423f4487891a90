//! Per-axis deformation-to-wrench calibration.
//!
//! Each wrench axis gets a one-dimensional polynomial model driven by a
//! single deformation component. The component is picked as the one with
//! the largest absolute Pearson correlation on the training split. All six
//! models share one seeded train/test partition of the pooled data.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{delta_from_poses, DeformationVector, GeometryError, RigidTransform};
use crate::scalar::Real;
use crate::simulator::Wrench;

/// Smallest dataset accepted by [`split`].
pub const MIN_SPLIT_SAMPLES: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationError {
    #[error("{count} samples, at least {required} required")]
    TooFewSamples { count: usize, required: usize },
    #[error("split fraction {0} must lie strictly between 0 and 1")]
    InvalidFraction(f64),
    #[error("polynomial degree {0} not supported (1 or 3)")]
    InvalidDegree(u8),
    #[error("axis {0} out of range 0..=5")]
    InvalidAxis(usize),
    #[error("design matrix for axis {axis} is rank deficient")]
    RankDeficient { axis: usize },
    #[error("target values have zero variance")]
    ZeroVariance,
    #[error("no sample excites wrench axis {0}")]
    UncoveredAxis(usize),
}

/// One synchronized deformation/wrench observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationPair<T: Real> {
    pub deformation: DeformationVector<T>,
    pub wrench: Wrench<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisModel<T> {
    /// Wrench axis predicted (0..=5: fx, fy, fz, tx, ty, tz).
    pub axis: usize,
    /// Deformation component used as input (0..=5: dl_x .. dtheta_z).
    pub input_component: usize,
    /// Ascending-degree coefficients, intercept first.
    pub coefficients: Vec<T>,
    pub degree: u8,
    pub r2_train: T,
    pub r2_test: T,
    pub rmse_train: T,
    pub rmse_test: T,
}

impl<T: Real> AxisModel<T> {
    pub fn predict_scalar(&self, x: T) -> T {
        self.coefficients
            .iter()
            .rev()
            .fold(T::zero(), |acc, c| acc * x + *c)
    }

    pub fn predict(&self, deformation: &DeformationVector<T>) -> T {
        self.predict_scalar(deformation.component(self.input_component))
    }

    /// Linear coefficient.
    pub fn slope(&self) -> T {
        self.coefficients.get(1).copied().unwrap_or_else(T::zero)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub degree: u8,
    pub split_fraction: f64,
    pub seed: u64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            degree: 1,
            split_fraction: 0.8,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport<T> {
    pub models: Vec<AxisModel<T>>,
    pub split_fraction: f64,
    pub split_seed: u64,
    pub sample_count: usize,
    pub train_count: usize,
    pub test_count: usize,
}

impl<T: Real> CalibrationReport<T> {
    pub fn model(&self, axis: usize) -> Option<&AxisModel<T>> {
        self.models.iter().find(|m| m.axis == axis)
    }
}

/// Pairs each applied wrench with the pose change of its estimated pose
/// relative to `reference`.
pub fn pairs_from_poses<T: Real>(
    reference: &RigidTransform<T>,
    observations: &[(Wrench<T>, RigidTransform<T>)],
) -> Result<Vec<CalibrationPair<T>>, GeometryError> {
    observations
        .iter()
        .map(|(wrench, pose)| {
            Ok(CalibrationPair {
                deformation: delta_from_poses(reference, pose)?,
                wrench: *wrench,
            })
        })
        .collect()
}

/// Index partition produced by [`split_indices`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded shuffle of `0..n`, then a prefix of `round(fraction · n)` indices
/// for training and the rest for testing.
pub fn split_indices(n: usize, fraction: f64, seed: u64) -> Result<SplitIndices, CalibrationError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(CalibrationError::InvalidFraction(fraction));
    }
    if n < MIN_SPLIT_SAMPLES {
        return Err(CalibrationError::TooFewSamples {
            count: n,
            required: MIN_SPLIT_SAMPLES,
        });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (fraction * n as f64).round() as usize;
    let test = idx.split_off(n_train);
    Ok(SplitIndices { train: idx, test })
}

/// (train, test) pairs.
pub type SplitPairs<T> = (Vec<CalibrationPair<T>>, Vec<CalibrationPair<T>>);

pub fn split<T: Real>(pairs: &[CalibrationPair<T>], fraction: f64, seed: u64) -> Result<SplitPairs<T>, CalibrationError> {
    let s = split_indices(pairs.len(), fraction, seed)?;
    Ok((
        s.train.iter().map(|&i| pairs[i]).collect(),
        s.test.iter().map(|&i| pairs[i]).collect(),
    ))
}

/// Pearson correlation; `None` when either column is constant.
pub fn pearson<T: Real>(x: &[T], y: &[T]) -> Option<T> {
    let n = T::from_usize(x.len())?;
    let mx = x.iter().fold(T::zero(), |a, v| a + *v) / n;
    let my = y.iter().fold(T::zero(), |a, v| a + *v) / n;
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (a, b) in x.iter().zip(y) {
        let dx = *a - mx;
        let dy = *b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == T::zero() || syy == T::zero() {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

fn check_axis(axis: usize) -> Result<(), CalibrationError> {
    if axis > 5 {
        Err(CalibrationError::InvalidAxis(axis))
    } else {
        Ok(())
    }
}

/// Least-squares polynomial fit of wrench `axis` against the best-correlated
/// deformation component. Test metrics are left as NaN until [`evaluate`].
pub fn fit_axis<T: Real>(
    train: &[CalibrationPair<T>],
    axis: usize,
    degree: u8,
) -> Result<AxisModel<T>, CalibrationError> {
    check_axis(axis)?;
    if degree != 1 && degree != 3 {
        return Err(CalibrationError::InvalidDegree(degree));
    }
    let required = degree as usize + 2;
    if train.len() < required {
        return Err(CalibrationError::TooFewSamples {
            count: train.len(),
            required,
        });
    }
    let y: Vec<T> = train.iter().map(|p| p.wrench.component(axis)).collect();
    let mut best: Option<(usize, T)> = None;
    for c in 0..6 {
        let x: Vec<T> = train.iter().map(|p| p.deformation.component(c)).collect();
        if let Some(r) = pearson(&x, &y) {
            if best.is_none_or(|(_, b)| r.abs() > b) {
                best = Some((c, r.abs()));
            }
        }
    }
    let Some((input_component, _)) = best else {
        let any_input_varies = (0..6).any(|c| {
            let first = train[0].deformation.component(c);
            train.iter().any(|p| p.deformation.component(c) != first)
        });
        return Err(if any_input_varies {
            CalibrationError::ZeroVariance
        } else {
            CalibrationError::RankDeficient { axis }
        });
    };
    let x: Vec<T> = train.iter().map(|p| p.deformation.component(input_component)).collect();
    let coefficients = polyfit(&x, &y, degree as usize).ok_or(CalibrationError::RankDeficient { axis })?;
    let mut model = AxisModel {
        axis,
        input_component,
        coefficients,
        degree,
        r2_train: T::lit(f64::NAN),
        r2_test: T::lit(f64::NAN),
        rmse_train: T::lit(f64::NAN),
        rmse_test: T::lit(f64::NAN),
    };
    let (r2, rmse) = metrics(&model, train)?;
    model.r2_train = r2;
    model.rmse_train = rmse;
    Ok(model)
}

/// Ascending-power polynomial least squares through a Householder QR of the
/// column-equilibrated Vandermonde matrix. `None` if rank deficient.
pub fn polyfit<T: Real>(x: &[T], y: &[T], degree: usize) -> Option<Vec<T>> {
    let n = x.len();
    let cols = degree + 1;
    let mut a = DMatrix::<T>::from_fn(n, cols, |i, j| {
        (0..j).fold(T::one(), |acc, _| acc * x[i])
    });
    let scales: Vec<T> = (0..cols).map(|j| a.column(j).norm()).collect();
    if scales.iter().any(|s| *s == T::zero()) {
        return None;
    }
    for (j, s) in scales.iter().enumerate() {
        a.column_mut(j).scale_mut(T::one() / *s);
    }
    let qr = a.qr();
    let r = qr.r();
    let max_diag = (0..cols).map(|i| r[(i, i)].abs()).fold(T::zero(), |m, v| m.max(v));
    let tol = T::default_epsilon() * T::lit(1e3) * T::from_usize(n.max(cols)).unwrap() * max_diag;
    if (0..cols).any(|i| r[(i, i)].abs() <= tol) {
        return None;
    }
    let qtb = qr.q().transpose() * DVector::from_column_slice(y);
    let sol = r.solve_upper_triangular(&qtb)?;
    Some((0..cols).map(|j| sol[j] / scales[j]).collect())
}

fn metrics<T: Real>(model: &AxisModel<T>, data: &[CalibrationPair<T>]) -> Result<(T, T), CalibrationError> {
    if data.len() < 2 {
        return Err(CalibrationError::TooFewSamples {
            count: data.len(),
            required: 2,
        });
    }
    let n = T::from_usize(data.len()).unwrap();
    let mean = data.iter().fold(T::zero(), |a, p| a + p.wrench.component(model.axis)) / n;
    let (mut ss_res, mut ss_tot) = (T::zero(), T::zero());
    for p in data {
        let y = p.wrench.component(model.axis);
        let e = y - model.predict(&p.deformation);
        ss_res += e * e;
        ss_tot += (y - mean) * (y - mean);
    }
    if ss_tot == T::zero() {
        return Err(CalibrationError::ZeroVariance);
    }
    Ok((T::one() - ss_res / ss_tot, (ss_res / n).sqrt()))
}

/// `(R², RMSE)` of `model` on held-out data.
pub fn evaluate<T: Real>(model: &AxisModel<T>, test: &[CalibrationPair<T>]) -> Result<(T, T), CalibrationError> {
    metrics(model, test)
}

/// Splits once, then fits and evaluates all six axes on that partition.
pub fn calibrate<T: Real>(
    pairs: &[CalibrationPair<T>],
    config: &CalibrationConfig,
) -> Result<CalibrationReport<T>, CalibrationError> {
    for axis in 0..6 {
        if !pairs.iter().any(|p| p.wrench.component(axis) != T::zero()) {
            return Err(CalibrationError::UncoveredAxis(axis));
        }
    }
    let (train, test) = split(pairs, config.split_fraction, config.seed)?;
    let models = (0..6)
        .map(|axis| {
            let mut m = fit_axis(&train, axis, config.degree)?;
            let (r2, rmse) = evaluate(&m, &test)?;
            m.r2_test = r2;
            m.rmse_test = rmse;
            Ok(m)
        })
        .collect::<Result<Vec<_>, CalibrationError>>()?;
    Ok(CalibrationReport {
        models,
        split_fraction: config.split_fraction,
        split_seed: config.seed,
        sample_count: pairs.len(),
        train_count: train.len(),
        test_count: test.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(d: [f64; 6], w: [f64; 6]) -> CalibrationPair<f64> {
        CalibrationPair {
            deformation: DeformationVector::from_array(d).unwrap(),
            wrench: Wrench::from_array(w),
        }
    }

    fn line(n: usize, slope: f64) -> Vec<CalibrationPair<f64>> {
        (0..n)
            .map(|i| {
                let x = i as f64 * 0.01 - 0.2;
                pair([x, 0.0, 0.0, 0.0, 0.0, 0.0], [slope * x + 0.5, 0.0, 0.0, 0.0, 0.0, 0.0])
            })
            .collect()
    }

    #[test]
    fn split_sizes() {
        let s = split_indices(1000, 0.8, 7).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (800, 200));
        let s = split_indices(10, 0.8, 7).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (8, 2));
        assert_eq!(split_indices(1000, 0.8, 7).unwrap(), split_indices(1000, 0.8, 7).unwrap());
        assert!(matches!(split_indices(9, 0.8, 7), Err(CalibrationError::TooFewSamples { .. })));
        assert!(matches!(split_indices(100, 1.0, 7), Err(CalibrationError::InvalidFraction(_))));
    }

    #[test]
    fn exact_line_fit() {
        let data = line(40, 250.0);
        let m = fit_axis(&data, 0, 1).unwrap();
        assert_eq!(m.input_component, 0);
        assert!((m.slope() - 250.0).abs() < 1e-9);
        assert!((m.coefficients[0] - 0.5).abs() < 1e-12);
        assert!((m.r2_train - 1.0).abs() < 1e-12);
        assert!(m.rmse_train < 1e-12);
    }

    #[test]
    fn constant_input_is_rank_deficient() {
        let data: Vec<_> = (0..20)
            .map(|i| pair([0.1, 0.0, 0.0, 0.0, 0.0, 0.0], [i as f64, 0.0, 0.0, 0.0, 0.0, 0.0]))
            .collect();
        assert_eq!(fit_axis(&data, 0, 1), Err(CalibrationError::RankDeficient { axis: 0 }));
    }

    #[test]
    fn evaluate_perfect_and_mean_predictor() {
        let data = line(30, 3.0);
        let m = fit_axis(&data, 0, 1).unwrap();
        let (r2, rmse) = evaluate(&m, &data).unwrap();
        assert!((r2 - 1.0).abs() < 1e-12 && rmse < 1e-12);

        let mean = data.iter().map(|p| p.wrench.fx).sum::<f64>() / data.len() as f64;
        let mean_model = AxisModel {
            coefficients: vec![mean, 0.0],
            ..m.clone()
        };
        let (r2, _) = evaluate(&mean_model, &data).unwrap();
        assert!(r2.abs() < 1e-12);

        let flat: Vec<_> = (0..5).map(|_| pair([0.0; 6], [1.0, 0.0, 0.0, 0.0, 0.0, 0.0])).collect();
        assert_eq!(evaluate(&m, &flat), Err(CalibrationError::ZeroVariance));
    }

    #[test]
    fn cubic_fit_recovers_polynomial() {
        let data: Vec<_> = (0..50)
            .map(|i| {
                let x = i as f64 * 0.02 - 0.5;
                pair([0.0, 0.0, x, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0 + 2.0 * x - 3.0 * x * x * x + 0.5 * x * x, 0.0, 0.0, 0.0])
            })
            .collect();
        let m = fit_axis(&data, 2, 3).unwrap();
        assert_eq!(m.input_component, 2);
        for (c, e) in m.coefficients.iter().zip([1.0, 2.0, 0.5, -3.0]) {
            assert!((c - e).abs() < 1e-9, "{c} vs {e}");
        }
    }

    #[test]
    fn uncovered_axis_reported() {
        let mut data = Vec::new();
        for axis in [0usize, 1, 2, 3, 5] {
            for i in 0..10 {
                let mut d = [0.0; 6];
                let mut w = [0.0; 6];
                d[axis] = i as f64 * 0.01;
                w[axis] = i as f64;
                data.push(pair(d, w));
            }
        }
        assert_eq!(
            calibrate(&data, &CalibrationConfig::default()),
            Err(CalibrationError::UncoveredAxis(4))
        );
    }

    #[test]
    fn invalid_arguments() {
        let data = line(20, 1.0);
        assert_eq!(fit_axis(&data, 6, 1), Err(CalibrationError::InvalidAxis(6)));
        assert_eq!(fit_axis(&data, 0, 2), Err(CalibrationError::InvalidDegree(2)));
        assert!(matches!(fit_axis(&data[..4], 0, 3), Err(CalibrationError::TooFewSamples { .. })));
    }
}
