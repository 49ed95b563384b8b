use std::f64::consts::PI;

use nalgebra::{
    Cholesky, Matrix3, Matrix3x4, Matrix4, Matrix4x3, SymmetricEigen, Vector3, Vector4,
};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Filter state of one tracked object.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackState {
    pub id: u64,
    /// `[x, y, v_x, v_y]`.
    pub mean: Vector4<f64>,
    pub covariance: Matrix4<f64>,
    /// Consecutive frames without an associated measurement.
    pub misses: u32,
    /// Frames since spawn.
    pub age: u32,
    /// Frames with an associated measurement, spawn included.
    pub hits: u32,
}

impl TrackState {
    pub fn new(id: u64, mean: Vector4<f64>, covariance: Matrix4<f64>) -> Self {
        Self {
            id,
            mean,
            covariance,
            misses: 0,
            age: 0,
            hits: 1,
        }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.mean[0], self.mean[1]]
    }

    pub fn range(&self) -> f64 {
        self.mean[0].hypot(self.mean[1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UkfConfig {
    /// Diagonal of the process noise (x, y, v_x, v_y).
    pub process_noise: [f64; 4],
    /// Diagonal of the measurement noise (rho, v, theta).
    pub measurement_noise: [f64; 3],
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
    /// Frame period (s).
    pub tau: f64,
}

impl Default for UkfConfig {
    fn default() -> Self {
        Self {
            process_noise: [
                0.05f64.powi(2),
                0.05f64.powi(2),
                0.5f64.powi(2),
                0.5f64.powi(2),
            ],
            measurement_noise: [0.2f64.powi(2), 0.3f64.powi(2), 0.05f64.powi(2)],
            alpha: 0.1,
            beta: 2.0,
            kappa: 0.0,
            tau: 1.0 / 9.0,
        }
    }
}

impl UkfConfig {
    pub fn q(&self) -> Matrix4<f64> {
        Matrix4::from_diagonal(&Vector4::from(self.process_noise))
    }

    pub fn r(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::from(self.measurement_noise))
    }

    pub fn validate(&self) -> Result<()> {
        if self
            .process_noise
            .iter()
            .chain(&self.measurement_noise)
            .any(|v| !(*v >= 0.0))
        {
            return Err(Error::InvalidConfig(
                "UKF noise variances must be >= 0".into(),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "UKF alpha must be in (0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.tau > 0.0) {
            return Err(Error::InvalidConfig("UKF tau must be > 0".into()));
        }
        if 4.0 + self.kappa <= 0.0 {
            return Err(Error::InvalidConfig("UKF kappa must exceed -4".into()));
        }
        Ok(())
    }

    pub fn transition(&self) -> Matrix4<f64> {
        let mut f = Matrix4::identity();
        f[(0, 2)] = self.tau;
        f[(1, 3)] = self.tau;
        f
    }
}

/// `2n + 1` sigma points with their mean and covariance weights.
#[derive(Debug, Clone)]
pub struct SigmaPoints {
    pub points: Vec<Vector4<f64>>,
    pub mean_weights: Vec<f64>,
    pub cov_weights: Vec<f64>,
}

impl SigmaPoints {
    pub fn mean(&self) -> Vector4<f64> {
        self.points
            .iter()
            .zip(&self.mean_weights)
            .map(|(p, w)| p * *w)
            .sum()
    }

    pub fn covariance(&self) -> Matrix4<f64> {
        let mean = self.mean();
        self.points
            .iter()
            .zip(&self.cov_weights)
            .map(|(p, w)| (p - mean) * (p - mean).transpose() * *w)
            .sum()
    }
}

/// Lower-triangular square root of a symmetric PSD matrix; falls back to an
/// eigen-decomposition with clamped eigenvalues when Cholesky fails.
fn matrix_sqrt(m: &Matrix4<f64>) -> Matrix4<f64> {
    if let Some(c) = Cholesky::new(*m) {
        return c.l();
    }
    let eig = SymmetricEigen::new(*m);
    let d = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    eig.eigenvectors * Matrix4::from_diagonal(&d)
}

/// Scaled unscented transform sigma points of `N(mean, cov)`.
pub fn sigma_points(mean: &Vector4<f64>, cov: &Matrix4<f64>, cfg: &UkfConfig) -> SigmaPoints {
    let n = 4.0;
    let lambda = cfg.alpha * cfg.alpha * (n + cfg.kappa) - n;
    let sqrt = matrix_sqrt(&(cov * (n + lambda)));
    let mut points = Vec::with_capacity(9);
    points.push(*mean);
    for i in 0..4 {
        points.push(mean + sqrt.column(i));
    }
    for i in 0..4 {
        points.push(mean - sqrt.column(i));
    }
    let w = 1.0 / (2.0 * (n + lambda));
    let mut mean_weights = vec![w; 9];
    let mut cov_weights = vec![w; 9];
    mean_weights[0] = lambda / (n + lambda);
    cov_weights[0] = mean_weights[0] + (1.0 - cfg.alpha * cfg.alpha + cfg.beta);
    SigmaPoints {
        points,
        mean_weights,
        cov_weights,
    }
}

/// Constant-velocity prediction; exact for this linear model.
pub fn predict(track: &TrackState, cfg: &UkfConfig) -> TrackState {
    let f = cfg.transition();
    let covariance = f * track.covariance * f.transpose() + cfg.q();
    TrackState {
        mean: f * track.mean,
        covariance: symmetrize(&covariance),
        age: track.age + 1,
        ..track.clone()
    }
}

/// `(rho, v, theta)` of a state, with the quadrant-aware angle.
pub fn measure(z: &Vector4<f64>) -> Result<Vector3<f64>> {
    let (x, y, vx, vy) = (z[0], z[1], z[2], z[3]);
    let rho = x.hypot(y);
    if rho == 0.0 {
        return Err(Error::OriginSingularity);
    }
    Ok(Vector3::new(rho, (x * vx + y * vy) / rho, y.atan2(x)))
}

/// A measurement function usable by [`unscented_update`].
pub trait MeasurementModel {
    fn predict_measurement(&self, z: &Vector4<f64>) -> Result<Vector3<f64>>;

    /// `a - b`, with any angular components wrapped.
    fn residual(&self, a: &Vector3<f64>, b: &Vector3<f64>) -> Vector3<f64> {
        a - b
    }
}

/// The radar's range / radial velocity / angle model.
#[derive(Debug, Clone, Copy, Default)]
pub struct PolarMeasurement;

fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

impl MeasurementModel for PolarMeasurement {
    fn predict_measurement(&self, z: &Vector4<f64>) -> Result<Vector3<f64>> {
        measure(z)
    }

    fn residual(&self, a: &Vector3<f64>, b: &Vector3<f64>) -> Vector3<f64> {
        let mut d = a - b;
        d[2] = wrap_angle(d[2]);
        d
    }
}

/// `h(z) = H z`.
#[derive(Debug, Clone, Copy)]
pub struct LinearMeasurement(pub Matrix3x4<f64>);

impl MeasurementModel for LinearMeasurement {
    fn predict_measurement(&self, z: &Vector4<f64>) -> Result<Vector3<f64>> {
        Ok(self.0 * z)
    }
}

fn symmetrize(m: &Matrix4<f64>) -> Matrix4<f64> {
    (m + m.transpose()) * 0.5
}

/// Unscented measurement update of `(mean, cov)` with observation `z_obs`.
pub fn unscented_update(
    mean: &Vector4<f64>,
    cov: &Matrix4<f64>,
    z_obs: &Vector3<f64>,
    r: &Matrix3<f64>,
    model: &impl MeasurementModel,
    cfg: &UkfConfig,
) -> Result<(Vector4<f64>, Matrix4<f64>)> {
    let sp = sigma_points(mean, cov, cfg);
    let projected: Vec<Vector3<f64>> = sp
        .points
        .iter()
        .map(|p| model.predict_measurement(p))
        .collect::<Result<_>>()?;
    // Mean of the projected points as an offset from the central one so
    // angular components are averaged across the wrap correctly.
    let center = projected[0];
    let z_mean = center
        + projected
            .iter()
            .zip(&sp.mean_weights)
            .map(|(p, w)| model.residual(p, &center) * *w)
            .sum::<Vector3<f64>>();

    let mut s = *r;
    let mut cross = Matrix4x3::zeros();
    for ((p, x), w) in projected.iter().zip(&sp.points).zip(&sp.cov_weights) {
        let dz = model.residual(p, &z_mean);
        let dx = x - mean;
        s += dz * dz.transpose() * *w;
        cross += dx * dz.transpose() * *w;
    }
    let s = (s + s.transpose()) * 0.5;
    let chol = Cholesky::new(s).ok_or_else(|| {
        let eig = SymmetricEigen::new(s).eigenvalues;
        let min = eig.min();
        let max = eig.max();
        Error::SingularInnovation {
            min_eigenvalue: min,
            condition: if min.abs() > 0.0 {
                max.abs() / min.abs()
            } else {
                f64::INFINITY
            },
        }
    })?;
    let gain = cross * chol.inverse();
    let innovation = model.residual(z_obs, &z_mean);
    let new_mean = mean + gain * innovation;
    let new_cov = symmetrize(&(cov - gain * s * gain.transpose()));
    Ok((new_mean, new_cov))
}

/// Unscented update of a predicted track with a `(rho, v, theta)` measurement.
pub fn update(
    track: &TrackState,
    measurement: &Vector3<f64>,
    cfg: &UkfConfig,
) -> Result<TrackState> {
    let (mean, covariance) = unscented_update(
        &track.mean,
        &track.covariance,
        measurement,
        &cfg.r(),
        &PolarMeasurement,
        cfg,
    )?;
    Ok(TrackState {
        mean,
        covariance,
        ..track.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_velocity_prediction() {
        let cfg = UkfConfig::default();
        let t = TrackState::new(1, Vector4::new(0.0, 0.0, 1.0, 2.0), Matrix4::identity());
        let p = predict(&t, &cfg);
        assert!((p.mean - Vector4::new(1.0 / 9.0, 2.0 / 9.0, 1.0, 2.0)).norm() < 1e-15);
        assert!((p.mean[0] - 0.1111).abs() < 1e-4 && (p.mean[1] - 0.2222).abs() < 1e-4);
        assert_eq!(p.age, 1);

        let still = TrackState::new(1, Vector4::new(3.0, -2.0, 0.0, 0.0), Matrix4::identity());
        assert_eq!(predict(&still, &cfg).mean, still.mean);
    }

    #[test]
    fn noiseless_propagation_keeps_zero_covariance() {
        let cfg = UkfConfig {
            process_noise: [0.0; 4],
            ..UkfConfig::default()
        };
        let t = TrackState::new(1, Vector4::new(1.0, 1.0, 1.0, 1.0), Matrix4::zeros());
        assert_eq!(predict(&t, &cfg).covariance, Matrix4::zeros());
    }

    #[test]
    fn polar_measurements() {
        let m = measure(&Vector4::new(3.0, 4.0, 0.6, 0.8)).unwrap();
        assert!((m - Vector3::new(5.0, 1.0, 0.9273)).norm() < 1e-4);
        assert!((m[2] - (4.0f64 / 3.0).atan()).abs() < 1e-15);
        let m = measure(&Vector4::new(7.0, 0.0, 0.0, 2.0)).unwrap();
        assert_eq!(m[1], 0.0);
        let m = measure(&Vector4::new(0.0, 5.0, 0.0, 1.0)).unwrap();
        assert_eq!(m, Vector3::new(5.0, 1.0, PI / 2.0));
        assert!(matches!(
            measure(&Vector4::new(0.0, 0.0, 1.0, 1.0)),
            Err(Error::OriginSingularity)
        ));
    }

    #[test]
    fn sigma_points_reproduce_gaussian() {
        let cfg = UkfConfig::default();
        let a = Matrix4::new(
            2.0, 0.1, 0.0, 0.3, 0.0, 1.0, 0.2, 0.0, 0.5, 0.0, 1.5, 0.1, 0.0, 0.4, 0.0, 0.8,
        );
        let cov = a * a.transpose();
        let mean = Vector4::new(10.0, -3.0, 1.0, 0.5);
        let sp = sigma_points(&mean, &cov, &cfg);
        assert_eq!(sp.points.len(), 9);
        assert!((sp.mean() - mean).norm() < 1e-12 * mean.norm());
        assert!((sp.covariance() - cov).norm() < 1e-12 * cov.norm());
    }

    #[test]
    fn zero_innovation_leaves_mean() {
        let cfg = UkfConfig {
            measurement_noise: [1e-12; 3],
            ..UkfConfig::default()
        };
        // The unscented measurement mean is biased by about tr(P) / (2 rho),
        // so the covariance is kept small.
        let t = TrackState::new(
            1,
            Vector4::new(8.0, 3.0, -1.0, 0.5),
            Matrix4::identity() * 1e-6,
        );
        let z = measure(&t.mean).unwrap();
        let u = update(&t, &z, &cfg).unwrap();
        assert!(
            (u.mean - t.mean).norm() < 1e-6,
            "{}",
            (u.mean - t.mean).norm()
        );
    }

    #[test]
    fn singular_innovation_is_reported() {
        let cfg = UkfConfig {
            measurement_noise: [0.0; 3],
            ..UkfConfig::default()
        };
        let t = TrackState::new(1, Vector4::new(8.0, 3.0, -1.0, 0.5), Matrix4::zeros());
        let err = update(&t, &Vector3::new(8.5, 0.0, 0.3), &cfg).unwrap_err();
        assert!(matches!(err, Error::SingularInnovation { .. }), "{err}");
    }

    #[test]
    fn angle_residual_wraps() {
        let a = Vector3::new(0.0, 0.0, PI - 0.01);
        let b = Vector3::new(0.0, 0.0, -PI + 0.01);
        let d = PolarMeasurement.residual(&a, &b);
        assert!((d[2] + 0.02).abs() < 1e-12);
    }
}
