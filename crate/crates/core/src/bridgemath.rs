//! Bridge-matching kernels and training losses as plain functions.
//!
//! No network lives here: drift predictions are supplied by the caller.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lgi::ShadowMask;

/// A latent code of arbitrary dimension.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatentVec(pub Vec<f64>);

impl LatentVec {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_abs_diff(&self, other: &LatentVec) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl From<Vec<f64>> for LatentVec {
    fn from(v: Vec<f64>) -> Self {
        LatentVec(v)
    }
}

fn same_dim(a: &LatentVec, b: &LatentVec) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::shape(format!("dimension {}", a.len()), format!("dimension {}", b.len())));
    }
    Ok(())
}

/// Point on the Brownian bridge: `(1-t) z0 + t z1 + sigma sqrt(t(1-t)) noise`.
pub fn bridge_sample(z0: &LatentVec, z1: &LatentVec, t: f64, sigma: f64, noise: &LatentVec) -> Result<LatentVec> {
    same_dim(z0, z1)?;
    same_dim(z0, noise)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidArgument(format!("t = {t} outside [0, 1]")));
    }
    if !(sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!("sigma = {sigma} must be >= 0")));
    }
    let spread = sigma * (t * (1.0 - t)).sqrt();
    Ok(LatentVec(
        z0.0.iter()
            .zip(&z1.0)
            .zip(&noise.0)
            .map(|((a, b), e)| (1.0 - t) * a + t * b + spread * e)
            .collect(),
    ))
}

/// Regression target for the drift: `(z1 - zt) / (1 - t)`.
pub fn drift_target(zt: &LatentVec, z1: &LatentVec, t: f64) -> Result<LatentVec> {
    same_dim(zt, z1)?;
    if !(t < 1.0) {
        return Err(Error::DegenerateTime(t));
    }
    let s = 1.0 - t;
    Ok(LatentVec(zt.0.iter().zip(&z1.0).map(|(a, b)| (b - a) / s).collect()))
}

/// Target latent recovered from a drift prediction: `(1 - t) v + zt`.
pub fn retrieve_target(zt: &LatentVec, t: f64, v: &LatentVec) -> Result<LatentVec> {
    same_dim(zt, v)?;
    if !(t < 1.0) {
        return Err(Error::DegenerateTime(t));
    }
    Ok(LatentVec(zt.0.iter().zip(&v.0).map(|(z, d)| (1.0 - t) * d + z).collect()))
}

/// One training tuple for the latent matching loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeTriple {
    pub z0: LatentVec,
    pub z1: LatentVec,
    pub t: f64,
    pub noise: LatentVec,
}

/// Latent matching loss: mean over the batch of `|v(z(t), t) - drift(z(t), t)|^2`.
pub fn latent_loss<F>(batch: &[BridgeTriple], sigma: f64, mut drift: F) -> Result<f64>
where
    F: FnMut(&LatentVec, f64) -> LatentVec,
{
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let mut total = 0.0;
    for b in batch {
        let zt = bridge_sample(&b.z0, &b.z1, b.t, sigma, &b.noise)?;
        let target = drift_target(&zt, &b.z1, b.t)?;
        let pred = drift(&zt, b.t);
        same_dim(&target, &pred)?;
        total += target.0.iter().zip(&pred.0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    Ok(total / batch.len() as f64)
}

pub const DEFAULT_LAMBDA: f64 = 10.0;

/// `lz + lambda * lx`.
pub fn combined_loss(lz: f64, lx: f64, lambda: f64) -> f64 {
    lz + lambda * lx
}

/// Interleaved float image. Three channels of linear radiance for renders.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

/// Three-channel linear radiance image.
pub type LinearImage = Image;

impl Image {
    pub fn with_channels(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || data.len() != width * height * channels {
            return Err(Error::shape(
                format!("{width}x{height}x{channels}"),
                format!("{} values", data.len()),
            ));
        }
        Ok(Image {
            width,
            height,
            channels,
            data,
        })
    }

    /// RGB image from interleaved data.
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        Image::with_channels(width, height, 3, data)
    }

    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        Image {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// First three channels of pixel `i` (row-major index).
    pub fn pixel(&self, i: usize) -> [f64; 3] {
        let c = self.channels;
        let px = &self.data[i * c..(i + 1) * c];
        [px[0], px[1.min(c - 1)], px[2.min(c - 1)]]
    }

    pub fn check_same_shape(&self, other: &Image) -> Result<()> {
        if (self.width, self.height, self.channels) != (other.width, other.height, other.channels) {
            return Err(Error::shape(
                format!("{}x{}x{}", self.width, self.height, self.channels),
                format!("{}x{}x{}", other.width, other.height, other.channels),
            ));
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &Image) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Copy clamped to `[0, 1]` for display. Breaks additivity; apply after composition.
    pub fn clamped(&self) -> Image {
        Image {
            data: self.data.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
            ..self.clone()
        }
    }
}

/// Sum of per-light renders in linear radiance.
pub fn compose_lights(contributions: &[LinearImage]) -> Result<LinearImage> {
    let (first, rest) = contributions
        .split_first()
        .ok_or_else(|| Error::InvalidArgument("at least one image is required".into()))?;
    let mut out = first.clone();
    for img in rest {
        out.check_same_shape(img)?;
        for (o, v) in out.data.iter_mut().zip(&img.data) {
            *o += v;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightedL1Config {
    /// Brightness-change threshold.
    pub tau: f64,
    /// Side of the square dilation kernel (odd).
    pub dilation_kernel: usize,
}

impl Default for WeightedL1Config {
    fn default() -> Self {
        WeightedL1Config {
            tau: 0.01,
            dilation_kernel: 17,
        }
    }
}

impl WeightedL1Config {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau >= 0.0) {
            return Err(Error::InvalidArgument("tau must be >= 0".into()));
        }
        if self.dilation_kernel == 0 || self.dilation_kernel.is_multiple_of(2) {
            return Err(Error::InvalidArgument("dilation kernel must be odd and >= 1".into()));
        }
        Ok(())
    }
}

/// Binary dilation with a `k x k` square of ones; pixels outside the image count as 0.
pub fn dilate(mask: &[bool], width: usize, height: usize, k: usize) -> Vec<bool> {
    let r = k / 2;
    // Square dilation separates into a horizontal and a vertical pass.
    let mut rows = vec![false; mask.len()];
    for y in 0..height {
        let row = &mask[y * width..(y + 1) * width];
        for x in 0..width {
            let lo = x.saturating_sub(r);
            let hi = (x + r).min(width - 1);
            rows[y * width + x] = row[lo..=hi].iter().any(|b| *b);
        }
    }
    let mut out = vec![false; mask.len()];
    for y in 0..height {
        let lo = y.saturating_sub(r);
        let hi = (y + r).min(height - 1);
        for x in 0..width {
            out[y * width + x] = (lo..=hi).any(|yy| rows[yy * width + x]);
        }
    }
    out
}

/// Pixels whose brightness changed by more than `tau` in any channel, dilated.
pub fn change_weights(x1: &Image, x0: &Image, cfg: &WeightedL1Config) -> Result<Vec<bool>> {
    x1.check_same_shape(x0)?;
    cfg.validate()?;
    let c = x1.channels;
    let changed: Vec<bool> = x1
        .data
        .chunks(c)
        .zip(x0.data.chunks(c))
        .map(|(a, b)| {
            a.iter()
                .zip(b)
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f64::max)
                > cfg.tau
        })
        .collect();
    Ok(dilate(&changed, x1.width, x1.height, cfg.dilation_kernel))
}

/// Weighted L1 between prediction and target, weighted by the dilated
/// change mask of `x1` against the source `x0`. Averaged over every
/// pixel-channel slot.
pub fn weighted_l1(x1_hat: &Image, x1: &Image, x0: &Image, cfg: &WeightedL1Config) -> Result<f64> {
    x1_hat.check_same_shape(x1)?;
    let w = change_weights(x1, x0, cfg)?;
    let c = x1.channels;
    let total: f64 = x1
        .data
        .chunks(c)
        .zip(x1_hat.data.chunks(c))
        .zip(&w)
        .filter(|(_, w)| **w)
        .map(|((a, b), _)| a.iter().zip(b).map(|(p, q)| (p - q).abs()).sum::<f64>())
        .sum();
    Ok(total / x1.data.len() as f64)
}

pub const BCE_EPSILON: f64 = 1e-7;

/// Binary cross-entropy, predictions clamped to `[eps, 1 - eps]`.
pub fn mask_bce(pred: &ShadowMask, gt: &ShadowMask) -> Result<f64> {
    pred.check_same_shape(gt)?;
    bce_over(pred, gt, None)
}

fn bce_over(pred: &ShadowMask, gt: &ShadowMask, region: Option<&[bool]>) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (i, (p, g)) in pred.values.iter().zip(&gt.values).enumerate() {
        if region.is_some_and(|r| !r[i]) {
            continue;
        }
        let p = p.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
        sum += g * p.ln() + (1.0 - g) * (1.0 - p).ln();
        n += 1;
    }
    if n == 0 {
        return Err(Error::DegenerateRegion);
    }
    Ok(-sum / n as f64)
}

/// Soft IoU loss `1 - E[p g] / E[p + g - p g]`.
pub fn mask_iou_loss(pred: &ShadowMask, gt: &ShadowMask) -> Result<f64> {
    pred.check_same_shape(gt)?;
    iou_over(pred, gt, None)
}

fn iou_over(pred: &ShadowMask, gt: &ShadowMask, region: Option<&[bool]>) -> Result<f64> {
    let mut inter = 0.0;
    let mut union = 0.0;
    for (i, (p, g)) in pred.values.iter().zip(&gt.values).enumerate() {
        if region.is_some_and(|r| !r[i]) {
            continue;
        }
        inter += p * g;
        union += p + g - p * g;
    }
    if union <= 0.0 {
        return Err(Error::DegenerateDenominator);
    }
    // The pixel count cancels between the two expectations.
    Ok(1.0 - inter / union)
}

/// Light-estimation loss: BCE plus IoU over the ground-truth shadow dilated by `dilation`.
pub fn light_estimation_loss(pred: &ShadowMask, gt: &ShadowMask, dilation: usize) -> Result<f64> {
    pred.check_same_shape(gt)?;
    if dilation.is_multiple_of(2) {
        return Err(Error::InvalidArgument("dilation kernel must be odd".into()));
    }
    let region = dilate(&gt.binarize(0.5), gt.width, gt.height, dilation);
    Ok(bce_over(pred, gt, Some(&region))? + iou_over(pred, gt, Some(&region))?)
}
