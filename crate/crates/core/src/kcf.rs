//! Kernelized correlation filter used as a per-track appearance model.
//!
//! A model is a Gaussian-kernel ridge regression trained in the Fourier domain
//! on a fixed-size, Hann-windowed grayscale patch against a centered Gaussian
//! target. Evaluating it on another patch gives a dense response map; the
//! response is scaled into a per-pixel distance `d` in `[0, 1]` and the
//! appearance affinity is `1 - mean(d)` over the observation box.

use std::cell::RefCell;
use std::sync::Arc;

use image::GrayImage;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::mask::BBox;

/// Minimum box area a model can be trained on.
pub const MIN_BOX_AREA: u64 = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KcfParams {
    /// Side of the square internal patch grid.
    pub patch: usize,
    /// Gaussian kernel bandwidth.
    pub sigma: f64,
    /// Ridge regularization.
    pub lambda: f64,
    /// Regression target bandwidth as a fraction of the patch side.
    pub target_bandwidth: f64,
    /// Standard deviation of the features after standardization. Sets the
    /// kernel's selectivity relative to `sigma`.
    pub feature_gain: f64,
}

impl Default for KcfParams {
    fn default() -> Self {
        Self {
            patch: 64,
            sigma: 0.5,
            lambda: 1e-4,
            target_bandwidth: 0.1,
            feature_gain: 4.0,
        }
    }
}

/// A trained appearance model.
#[derive(Debug, Clone)]
pub struct KcfModel {
    params: KcfParams,
    template: Vec<f64>,
    template_spectrum: Vec<Complex<f64>>,
    dual_spectrum: Vec<Complex<f64>>,
    /// Peak of the response on the training patch.
    reference_peak: f64,
    pub trained_at: u32,
}

/// Per-pixel distances `d` in `[0, 1]`, row-major `height x width`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponsePatch {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl ResponsePatch {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            return 1.0;
        }
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// `(row, col)` of the smallest distance, first in row-major order.
    pub fn argmin(&self) -> (usize, usize) {
        let mut best = 0;
        for (k, &v) in self.values.iter().enumerate() {
            if v < self.values[best] {
                best = k;
            }
        }
        (best / self.width, best % self.width)
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plans(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(n), p.plan_fft_inverse(n))
    })
}

/// In-place 2D FFT of a row-major `n x n` grid. The inverse is normalized.
fn fft2(data: &mut [Complex<f64>], n: usize, inverse: bool) {
    let (fwd, inv) = plans(n);
    let plan = if inverse { inv } else { fwd };
    for row in data.chunks_exact_mut(n) {
        plan.process(row);
    }
    let mut column = vec![Complex::new(0.0, 0.0); n];
    for c in 0..n {
        for r in 0..n {
            column[r] = data[r * n + c];
        }
        plan.process(&mut column);
        for r in 0..n {
            data[r * n + c] = column[r];
        }
    }
    if inverse {
        let scale = 1.0 / (n * n) as f64;
        data.iter_mut().for_each(|v| *v *= scale);
    }
}

fn to_spectrum(x: &[f64], n: usize) -> Vec<Complex<f64>> {
    let mut data: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft2(&mut data, n, false);
    data
}

/// Gaussian kernel correlation `k(u) = exp(-|x - shift_u(z)|^2 / (sigma^2 N))`
/// for every circular shift `u`, returned in the Fourier domain.
fn gaussian_correlation(
    x: &[f64],
    x_spec: &[Complex<f64>],
    z: &[f64],
    z_spec: &[Complex<f64>],
    n: usize,
    sigma: f64,
) -> Vec<Complex<f64>> {
    let xx: f64 = x.iter().map(|v| v * v).sum();
    let zz: f64 = z.iter().map(|v| v * v).sum();
    let mut cross: Vec<Complex<f64>> = x_spec
        .iter()
        .zip(z_spec)
        .map(|(a, b)| a.conj() * b)
        .collect();
    fft2(&mut cross, n, true);
    let count = (n * n) as f64;
    let mut k: Vec<Complex<f64>> = cross
        .iter()
        .map(|c| {
            let d = (xx + zz - 2.0 * c.re).max(0.0) / count;
            Complex::new((-d / (sigma * sigma)).exp(), 0.0)
        })
        .collect();
    fft2(&mut k, n, false);
    k
}

/// Spatial-domain kernel correlation, for callers that want the map itself.
pub fn kernel_correlation(x: &[f64], z: &[f64], n: usize, sigma: f64) -> Vec<f64> {
    let xs = to_spectrum(x, n);
    let zs = to_spectrum(z, n);
    let mut k = gaussian_correlation(x, &xs, z, &zs, n, sigma);
    fft2(&mut k, n, true);
    k.into_iter().map(|c| c.re).collect()
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

fn hann(n: usize, i: usize) -> f64 {
    if n < 2 {
        return 1.0;
    }
    0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos())
}

/// Bilinear sample of `img` at continuous coordinates, clamped to the border.
fn sample_bilinear(img: &GrayImage, x: f64, y: f64) -> f64 {
    let (w, h) = img.dimensions();
    let x = x.clamp(0.0, f64::from(w - 1));
    let y = y.clamp(0.0, f64::from(h - 1));
    let (x0, y0) = (x.floor() as u32, y.floor() as u32);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (fx, fy) = (x - f64::from(x0), y - f64::from(y0));
    let p = |xx, yy| f64::from(img.get_pixel(xx, yy).0[0]);
    let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
    let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Resizes the box region to a `patch x patch` grid, standardizes
/// intensities to `feature_gain` deviation and applies the Hann window.
pub fn extract_features(image: &GrayImage, bbox: &BBox, params: &KcfParams) -> Result<Vec<f64>> {
    let n = params.patch;
    if bbox.w == 0 || bbox.h == 0 || image.width() == 0 || image.height() == 0 {
        return Err(Error::DegenerateBox { w: bbox.w, h: bbox.h });
    }
    let sx = f64::from(bbox.w) / n as f64;
    let sy = f64::from(bbox.h) / n as f64;
    let mut out = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            let x = f64::from(bbox.x) + (c as f64 + 0.5) * sx - 0.5;
            let y = f64::from(bbox.y) + (r as f64 + 0.5) * sy - 0.5;
            out.push(sample_bilinear(image, x, y) / 255.0);
        }
    }
    // zero mean, fixed variance; a flat patch stays all zeros
    let mean = out.iter().sum::<f64>() / out.len() as f64;
    let var = out.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / out.len() as f64;
    let inv_std = if var > 1e-12 { params.feature_gain / var.sqrt() } else { 0.0 };
    for r in 0..n {
        for c in 0..n {
            let v = &mut out[r * n + c];
            *v = (*v - mean) * inv_std * hann(n, r) * hann(n, c);
        }
    }
    Ok(out)
}

/// Gaussian regression target peaked at `(n/2, n/2)`.
fn gaussian_target(n: usize, bandwidth: f64) -> Vec<f64> {
    let s = bandwidth * n as f64;
    let mid = (n / 2) as f64;
    let mut y = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            let d2 = (r as f64 - mid).powi(2) + (c as f64 - mid).powi(2);
            y.push((-0.5 * d2 / (s * s)).exp());
        }
    }
    y
}

impl KcfModel {
    /// Trains on the box region of a frame.
    pub fn train(image: &GrayImage, bbox: &BBox, frame: u32, params: KcfParams) -> Result<Self> {
        if bbox.area() < MIN_BOX_AREA
            || bbox.x + bbox.w > image.width()
            || bbox.y + bbox.h > image.height()
        {
            return Err(Error::DegenerateBox { w: bbox.w, h: bbox.h });
        }
        let features = extract_features(image, bbox, &params)?;
        Ok(Self::train_on_features(features, frame, params))
    }

    /// Trains on an already windowed `patch x patch` feature grid.
    pub fn train_on_features(features: Vec<f64>, frame: u32, params: KcfParams) -> Self {
        let n = params.patch;
        assert_eq!(features.len(), n * n, "feature grid must be patch x patch");
        let spectrum = to_spectrum(&features, n);
        let kxx = gaussian_correlation(&features, &spectrum, &features, &spectrum, n, params.sigma);
        let target = to_spectrum(&gaussian_target(n, params.target_bandwidth), n);
        let dual: Vec<Complex<f64>> = target
            .iter()
            .zip(&kxx)
            .map(|(y, k)| y / (k + params.lambda))
            .collect();
        let mut model = Self {
            params,
            template: features,
            template_spectrum: spectrum,
            dual_spectrum: dual,
            reference_peak: 1.0,
            trained_at: frame,
        };
        let self_response = model.raw_response_features(&model.template.clone());
        model.reference_peak = min_max(&self_response).1;
        model
    }

    pub fn params(&self) -> &KcfParams {
        &self.params
    }

    pub fn template(&self) -> &[f64] {
        &self.template
    }

    /// Raw regression response over every circular shift of a feature grid,
    /// row-major `patch x patch`.
    pub fn raw_response_features(&self, features: &[f64]) -> Vec<f64> {
        let n = self.params.patch;
        let z_spec = to_spectrum(features, n);
        let kxz = gaussian_correlation(
            &self.template,
            &self.template_spectrum,
            features,
            &z_spec,
            n,
            self.params.sigma,
        );
        let mut resp: Vec<Complex<f64>> = kxz
            .iter()
            .zip(&self.dual_spectrum)
            .map(|(k, a)| k * a)
            .collect();
        fft2(&mut resp, n, true);
        resp.into_iter().map(|c| c.re).collect()
    }

    /// Distance map on the internal grid, `d = 1 - clamp(r / r_peak, 0, 1)^2`
    /// with `r_peak` the response peak on the training patch. Squaring makes
    /// the mean sensitive to peak height; the response mean itself is nearly
    /// the same for any patch. A flat response carries no appearance evidence
    /// and maps to `d = 1` everywhere.
    pub fn distance_grid(&self, features: &[f64]) -> Vec<f64> {
        let raw = self.raw_response_features(features);
        let (lo, hi) = min_max(&raw);
        if !(hi - lo > 1e-12) || !(self.reference_peak > 0.0) {
            return vec![1.0; raw.len()];
        }
        raw.iter()
            .map(|&r| 1.0 - (r / self.reference_peak).clamp(0.0, 1.0).powi(2))
            .collect()
    }

    /// Distance map resampled to the box's `w x h` grid.
    pub fn response_map(&self, image: &GrayImage, bbox: &BBox) -> Result<ResponsePatch> {
        let n = self.params.patch;
        let features = extract_features(image, bbox, &self.params)?;
        let grid = self.distance_grid(&features);
        let (w, h) = (bbox.w as usize, bbox.h as usize);
        let mut values = Vec::with_capacity(w * h);
        for r in 0..h {
            for c in 0..w {
                let gy = ((r as f64 + 0.5) * n as f64 / h as f64 - 0.5).clamp(0.0, (n - 1) as f64);
                let gx = ((c as f64 + 0.5) * n as f64 / w as f64 - 0.5).clamp(0.0, (n - 1) as f64);
                let (y0, x0) = (gy.floor() as usize, gx.floor() as usize);
                let (y1, x1) = ((y0 + 1).min(n - 1), (x0 + 1).min(n - 1));
                let (fy, fx) = (gy - y0 as f64, gx - x0 as f64);
                let g = |yy: usize, xx: usize| grid[yy * n + xx];
                let top = g(y0, x0) * (1.0 - fx) + g(y0, x1) * fx;
                let bottom = g(y1, x0) * (1.0 - fx) + g(y1, x1) * fx;
                values.push((top * (1.0 - fy) + bottom * fy).clamp(0.0, 1.0));
            }
        }
        Ok(ResponsePatch {
            width: w,
            height: h,
            values,
        })
    }

    /// Appearance affinity `1 - mean(d)` of this model on the box region.
    pub fn appearance_affinity(&self, image: &GrayImage, bbox: &BBox) -> Result<f64> {
        let map = self.response_map(image, bbox)?;
        Ok((1.0 - map.mean()).clamp(0.0, 1.0))
    }
}
