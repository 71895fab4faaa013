//! Affinity matrices and their fusion into association costs.
//!
//! Position/motion affinity is `w * q(z)` from the filter; appearance affinity
//! comes from [`crate::kcf`]. Both are min-max normalized over the whole matrix
//! and fused as `-alpha * ln(pm * appr)`, capped at [`FORBIDDEN_COST`].

use crate::error::{Error, Result};
use crate::gmphd::{likelihood, GaussianComponent, ModelParams, ObservationVec};

/// Cost marking a pair that must not be assigned.
pub const FORBIDDEN_COST: f64 = 10_000.0;

/// Affinity products at or below this value are treated as zero.
pub const UNDERFLOW_AFFINITY: f64 = 1e-39;

pub const DEFAULT_ALPHA: f64 = 100.0;

/// Dense row-major `rows x cols` matrix of affinities. Rows are states
/// (tracks), columns are observations.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl AffinityMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values for a {rows}x{cols} matrix",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Shape(format!("affinity {bad} is not finite and nonnegative")));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                values.push(f(i, j));
            }
        }
        Self::new(rows, cols, values)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            values: vec![value; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.cols + j] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Row-major matrix of association costs in `[0, FORBIDDEN_COST]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values for a {rows}x{cols} matrix",
                values.len()
            )));
        }
        if let Some(bad) = values
            .iter()
            .find(|v| !(v.is_finite() && (0.0..=FORBIDDEN_COST).contains(*v)))
        {
            return Err(Error::Shape(format!("cost {bad} outside [0, {FORBIDDEN_COST}]")));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn forbid(&mut self, i: usize, j: usize) {
        self.values[i * self.cols + j] = FORBIDDEN_COST;
    }

    pub fn is_forbidden(&self, i: usize, j: usize) -> bool {
        self.get(i, j) >= FORBIDDEN_COST
    }
}

/// Position/motion affinity `w * q(z)` of a predicted component.
pub fn pm_affinity(track_pred: &GaussianComponent, z: ObservationVec, params: &ModelParams) -> f64 {
    // the default matrices keep S positive definite; a singular S has no
    // usable density
    likelihood(track_pred, z, params).map_or(0.0, |q| track_pred.weight * q)
}

/// Global min-max normalization; a constant matrix maps to all ones.
pub fn minmax_normalize(a: &AffinityMatrix) -> AffinityMatrix {
    let (lo, hi) = a
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let values = if a.values.is_empty() || !(hi > lo) {
        vec![1.0; a.values.len()]
    } else {
        let span = hi - lo;
        a.values.iter().map(|&v| ((v - lo) / span).clamp(0.0, 1.0)).collect()
    };
    AffinityMatrix {
        rows: a.rows,
        cols: a.cols,
        values,
    }
}

/// Cost of one pair from its two normalized affinities.
pub fn fused_cost(pm: f64, appr: f64, alpha: f64) -> f64 {
    let product = pm * appr;
    if !(product > UNDERFLOW_AFFINITY) {
        return FORBIDDEN_COST;
    }
    let cost = -alpha * product.ln();
    if !(cost <= FORBIDDEN_COST) {
        FORBIDDEN_COST
    } else {
        // ln(1) gives -0.0
        cost.max(0.0)
    }
}

/// Fuses normalized position/motion and appearance affinities into costs.
pub fn fuse(pm_norm: &AffinityMatrix, appr_norm: &AffinityMatrix, alpha: f64) -> Result<CostMatrix> {
    if pm_norm.rows != appr_norm.rows || pm_norm.cols != appr_norm.cols {
        return Err(Error::Shape(format!(
            "{}x{} vs {}x{}",
            pm_norm.rows, pm_norm.cols, appr_norm.rows, appr_norm.cols
        )));
    }
    let values = pm_norm
        .values
        .iter()
        .zip(&appr_norm.values)
        .map(|(&p, &a)| fused_cost(p, a, alpha))
        .collect();
    Ok(CostMatrix {
        rows: pm_norm.rows,
        cols: pm_norm.cols,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmphd::init_component;
    use proptest::prelude::*;

    #[test]
    fn pm_affinity_examples() {
        let params = ModelParams::default();
        let c = init_component(ObservationVec::new(10.0, 20.0), 1.0, &params).unwrap();
        let peak = pm_affinity(&c, ObservationVec::new(10.0, 20.0), &params);
        let s_det = 50.0 * 200.0;
        assert!((peak - 1.0 / (2.0 * std::f64::consts::PI * f64::sqrt(s_det))).abs() < 1e-18);
        let half = GaussianComponent { weight: 0.5, ..c.clone() };
        assert_eq!(pm_affinity(&half, ObservationVec::new(10.0, 20.0), &params), peak * 0.5);

        let off = pm_affinity(&half, ObservationVec::new(14.0, 12.0), &params);
        let pdf = (-0.5f64 * (16.0 / 50.0 + 64.0 / 200.0)).exp()
            / (2.0 * std::f64::consts::PI * s_det.sqrt());
        assert!((off - 0.5 * pdf).abs() < 1e-15 * pdf);
    }

    #[test]
    fn minmax_examples() {
        let a = AffinityMatrix::new(2, 2, vec![0.0, 10.0, 5.0, 10.0]).unwrap();
        assert_eq!(minmax_normalize(&a).values(), &[0.0, 1.0, 0.5, 1.0]);
        let c = AffinityMatrix::filled(2, 3, 0.25);
        assert_eq!(minmax_normalize(&c).values(), &[1.0; 6]);

        let raw: Vec<f64> = (0..20).map(|k| ((k * 37 % 11) as f64).sqrt() * 0.3).collect();
        let a = AffinityMatrix::new(4, 5, raw.clone()).unwrap();
        let lo = raw.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let n = minmax_normalize(&a);
        for (k, v) in raw.iter().enumerate() {
            assert_eq!(n.values()[k], (v - lo) / (hi - lo));
        }
    }

    #[test]
    fn fuse_examples() {
        let one = AffinityMatrix::filled(1, 1, 1.0);
        assert_eq!(fuse(&one, &one, DEFAULT_ALPHA).unwrap().get(0, 0), 0.0);
        let e = (-1.0f64).exp();
        let c = fused_cost(e, 1.0, DEFAULT_ALPHA);
        assert!((c - 100.0).abs() < 1e-9);
        assert_eq!(fused_cost(1e-39, 1.0, DEFAULT_ALPHA), FORBIDDEN_COST);
        assert_eq!(fused_cost(1e-20, 1e-20, DEFAULT_ALPHA), FORBIDDEN_COST);
        assert_eq!(fused_cost(0.0, 0.7, DEFAULT_ALPHA), FORBIDDEN_COST);
        assert!(fuse(&one, &AffinityMatrix::filled(1, 2, 1.0), 100.0).is_err());
    }

    proptest! {
        #[test]
        fn costs_always_in_range(vals in proptest::collection::vec(0.0f64..1e6, 1..30), other in proptest::collection::vec(0.0f64..1.0, 30)) {
            let n = vals.len();
            let a = minmax_normalize(&AffinityMatrix::new(1, n, vals.clone()).unwrap());
            let b = minmax_normalize(&AffinityMatrix::new(1, n, other[..n].to_vec()).unwrap());
            let c = fuse(&a, &b, DEFAULT_ALPHA).unwrap();
            for &v in c.values() {
                prop_assert!((0.0..=FORBIDDEN_COST).contains(&v));
            }
        }

        #[test]
        fn fuse_monotone(p in 1e-10f64..1.0, q in 1e-10f64..1.0, dp in 0.0f64..1.0) {
            let p2 = (p + dp * (1.0 - p)).min(1.0);
            prop_assert!(fused_cost(p2, q, DEFAULT_ALPHA) <= fused_cost(p, q, DEFAULT_ALPHA));
        }

        #[test]
        fn minmax_keeps_argmax_argmin(vals in proptest::collection::vec(0.0f64..100.0, 2..20)) {
            let a = AffinityMatrix::new(1, vals.len(), vals.clone()).unwrap();
            let n = minmax_normalize(&a);
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assume!(hi > lo);
            for (k, &v) in vals.iter().enumerate() {
                prop_assert_eq!(v == hi, n.values()[k] == 1.0);
                prop_assert_eq!(v == lo, n.values()[k] == 0.0);
            }
        }
    }
}
