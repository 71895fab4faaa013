//! Gaussian-mixture PHD recursion with a constant-velocity motion model.
//!
//! State vectors are `(x, y, vx, vy)` in pixels and pixels/frame; observations
//! are box centers `(x, y)`. Every track carries a single Gaussian component,
//! so the mixture is the set of live tracks and needs no pruning.

use nalgebra::{Matrix2, Matrix2x4, Matrix4, Matrix4x2, Vector2, Vector4};

use crate::error::{Error, Result};

/// Smallest initial weight a detection confidence is clamped to.
pub const MIN_WEIGHT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationVec(pub Vector2<f64>);

impl ObservationVec {
    pub fn new(x: f64, y: f64) -> Self {
        Self(Vector2::new(x, y))
    }

    pub fn x(&self) -> f64 {
        self.0.x
    }

    pub fn y(&self) -> f64 {
        self.0.y
    }
}

/// One weighted Gaussian `w * N(x; m, P)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: Vector4<f64>,
    pub cov: Matrix4<f64>,
}

impl GaussianComponent {
    /// Checks `w > 0`, a symmetric covariance and a positive diagonal.
    pub fn validate(&self) -> Result<()> {
        if !(self.weight > 0.0) || !self.weight.is_finite() {
            return Err(Error::InvalidComponent(format!("weight {}", self.weight)));
        }
        for i in 0..4 {
            if !(self.cov[(i, i)] > 0.0) {
                return Err(Error::InvalidComponent(format!(
                    "covariance diagonal {i} is {}",
                    self.cov[(i, i)]
                )));
            }
            for j in 0..i {
                let (a, b) = (self.cov[(i, j)], self.cov[(j, i)]);
                if (a - b).abs() > 1e-9 * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::InvalidComponent(format!(
                        "covariance not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn position(&self) -> (f64, f64) {
        (self.mean[0], self.mean[1])
    }

    pub fn velocity(&self) -> (f64, f64) {
        (self.mean[2], self.mean[3])
    }
}

/// The constant matrices of the motion and observation models.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub f: Matrix4<f64>,
    pub q: Matrix4<f64>,
    pub p0: Matrix4<f64>,
    pub r: Matrix2<f64>,
    pub h: Matrix2x4<f64>,
}

impl Default for ModelParams {
    fn default() -> Self {
        #[rustfmt::skip]
        let f = Matrix4::new(
            1.0, 0.0, 1.0, 0.0,
            0.0, 1.0, 0.0, 1.0,
            0.0, 0.0, 1.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
        );
        let diag = Vector4::new(25.0, 100.0, 25.0, 100.0);
        #[rustfmt::skip]
        let h = Matrix2x4::new(
            1.0, 0.0, 0.0, 0.0,
            0.0, 1.0, 0.0, 0.0,
        );
        Self {
            f,
            q: Matrix4::from_diagonal(&(diag * 0.5)),
            p0: Matrix4::from_diagonal(&diag),
            r: Matrix2::from_diagonal(&Vector2::new(25.0, 100.0)),
            h,
        }
    }
}

impl ModelParams {
    /// Innovation covariance `S = R + H P H^T` of a component.
    pub fn innovation_cov(&self, c: &GaussianComponent) -> Matrix2<f64> {
        self.r + self.h * c.cov * self.h.transpose()
    }
}

/// Births a component from an observation: zero velocity, `P = P0`.
pub fn init_component(
    z: ObservationVec,
    conf_norm: f64,
    params: &ModelParams,
) -> Result<GaussianComponent> {
    if !(conf_norm > 0.0) || conf_norm > 1.0 {
        return Err(Error::InvalidComponent(format!(
            "normalized confidence {conf_norm} outside (0, 1]"
        )));
    }
    Ok(GaussianComponent {
        weight: conf_norm,
        mean: Vector4::new(z.x(), z.y(), 0.0, 0.0),
        cov: params.p0,
    })
}

/// Clamps a detector confidence into a valid initial weight.
pub fn normalize_confidence(conf: f64) -> f64 {
    if conf.is_nan() {
        return MIN_WEIGHT;
    }
    conf.clamp(MIN_WEIGHT, 1.0)
}

/// Kalman prediction: `m' = F m`, `P' = Q + F P F^T`.
pub fn predict(c: &GaussianComponent, params: &ModelParams) -> GaussianComponent {
    GaussianComponent {
        weight: c.weight,
        mean: params.f * c.mean,
        cov: params.q + params.f * c.cov * params.f.transpose(),
    }
}

/// Applies [`predict`] `steps` times.
pub fn predict_n(c: &GaussianComponent, steps: u32, params: &ModelParams) -> GaussianComponent {
    let mut out = c.clone();
    for _ in 0..steps {
        out = predict(&out, params);
    }
    out
}

/// Observation density `N(z; H m, R + H P H^T)` of a predicted component.
pub fn likelihood(c_pred: &GaussianComponent, z: ObservationVec, params: &ModelParams) -> Result<f64> {
    let s = params.innovation_cov(c_pred);
    let det = s.determinant();
    let s_inv = s.try_inverse().ok_or(Error::SingularCovariance)?;
    if !(det > 0.0) {
        return Err(Error::SingularCovariance);
    }
    let d = z.0 - params.h * c_pred.mean;
    let mahal = (d.transpose() * s_inv * d)[(0, 0)];
    Ok((-0.5 * mahal).exp() / (2.0 * std::f64::consts::PI * det.sqrt()))
}

/// Kalman measurement update of the mean and covariance. The weight is left
/// as is; see [`reweight`].
pub fn update(
    c_pred: &GaussianComponent,
    z: ObservationVec,
    params: &ModelParams,
) -> Result<GaussianComponent> {
    let s = params.innovation_cov(c_pred);
    let s_inv = s.try_inverse().ok_or(Error::SingularCovariance)?;
    let gain: Matrix4x2<f64> = c_pred.cov * params.h.transpose() * s_inv;
    let innovation = z.0 - params.h * c_pred.mean;
    let mean = c_pred.mean + gain * innovation;
    let cov = (Matrix4::identity() - gain * params.h) * c_pred.cov;
    Ok(GaussianComponent {
        weight: c_pred.weight,
        mean,
        cov,
    })
}

/// Posterior weights `w_i q_i / sum_l w_l q_l` for one observation.
pub fn reweight(components: &[GaussianComponent], q_values: &[f64]) -> Result<Vec<f64>> {
    if components.len() != q_values.len() {
        return Err(Error::Shape(format!(
            "{} components but {} likelihoods",
            components.len(),
            q_values.len()
        )));
    }
    let products: Vec<f64> = components
        .iter()
        .zip(q_values)
        .map(|(c, &q)| c.weight * q)
        .collect();
    let total: f64 = products.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::DegenerateUpdate);
    }
    Ok(products.into_iter().map(|p| p / total).collect())
}
