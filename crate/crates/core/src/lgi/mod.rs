//! Light-geometry interaction (LGI) maps.
//!
//! For every pixel with valid depth the surface point `p` is lifted to camera
//! space and a ray is cast toward the light. `N` evenly spaced samples along
//! the part of that ray inside the camera frustum are reprojected into the
//! depth map; each sample is replaced by the visible surface point on its
//! camera ray. The elevation of `p -> surface` minus the elevation of
//! `p -> light` gives one difference per sample. The three output channels are
//! the minimum, the maximum and the value closest to zero.
//!
//! A sample that lands on the visible surface lies exactly on the light ray,
//! so a difference near zero marks a likely occluder between `p` and the light.

mod gradient;
mod kernel;
pub mod real;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, DepthMap, LightKind, LightSpec, Point3};

pub use gradient::{soft_mask_jet, LightParam, LightPlacement, SoftMaskJet};
use kernel::{Frustum, Kernel, Target, V3};

/// Depth lookup used when a reprojected sample falls between pixel centers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interp {
    Nearest,
    /// Bilinear over the four neighbors; falls back to nearest if any is invalid.
    Bilinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LgiConfig {
    pub n_samples: usize,
    /// Hard-mask threshold in radians.
    pub eta: f64,
    pub z_near: f64,
    /// Far clip for directional rays. `None` uses the largest valid depth.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_far: Option<f64>,
    /// Soft-mask temperature in radians.
    pub softness_beta: f64,
    pub interp: Interp,
}

pub const DEFAULT_N_SAMPLES: usize = 16;
pub const DEFAULT_ETA: f64 = 5.0 * std::f64::consts::PI / 180.0;
pub const DEFAULT_Z_NEAR: f64 = 1e-4;
pub const DEFAULT_SOFTNESS_BETA: f64 = std::f64::consts::PI / 180.0;

impl Default for LgiConfig {
    fn default() -> Self {
        LgiConfig {
            n_samples: DEFAULT_N_SAMPLES,
            eta: DEFAULT_ETA,
            z_near: DEFAULT_Z_NEAR,
            z_far: None,
            softness_beta: DEFAULT_SOFTNESS_BETA,
            interp: Interp::Bilinear,
        }
    }
}

impl LgiConfig {
    pub fn with_samples(mut self, n: usize) -> Self {
        self.n_samples = n;
        self
    }

    pub fn with_interp(mut self, interp: Interp) -> Self {
        self.interp = interp;
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::InvalidArgument("n_samples must be >= 1".into()));
        }
        if !(self.eta > 0.0) {
            return Err(Error::InvalidArgument("eta must be > 0".into()));
        }
        if !(self.z_near > 0.0) || !self.z_near.is_finite() {
            return Err(Error::InvalidArgument("z_near must be > 0".into()));
        }
        if let Some(z_far) = self.z_far {
            if !(z_far > self.z_near) {
                return Err(Error::InvalidArgument("z_far must exceed z_near".into()));
            }
        }
        if !(self.softness_beta > 0.0) {
            return Err(Error::InvalidArgument("softness_beta must be > 0".into()));
        }
        Ok(())
    }
}

/// Three LGI channels (radians) and the per-pixel validity flag.
///
/// Invalid pixels hold 0 in every channel.
#[derive(Debug, Clone, PartialEq)]
pub struct LgiMaps {
    pub width: usize,
    pub height: usize,
    /// Minimum elevation difference.
    pub c1: Vec<f64>,
    /// Maximum elevation difference.
    pub c2: Vec<f64>,
    /// Elevation difference with the smallest magnitude.
    pub c3: Vec<f64>,
    pub valid: Vec<bool>,
}

impl LgiMaps {
    pub fn empty(width: usize, height: usize) -> Self {
        let n = width * height;
        LgiMaps {
            width,
            height,
            c1: vec![0.0; n],
            c2: vec![0.0; n],
            c3: vec![0.0; n],
            valid: vec![false; n],
        }
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Largest absolute difference over all three channels and all pixels.
    pub fn max_abs_diff(&self, other: &LgiMaps) -> Result<f64> {
        if (self.width, self.height) != (other.width, other.height) {
            return Err(Error::shape(
                format!("{}x{}", self.width, self.height),
                format!("{}x{}", other.width, other.height),
            ));
        }
        let chans = [(&self.c1, &other.c1), (&self.c2, &other.c2), (&self.c3, &other.c3)];
        Ok(chans
            .iter()
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max))
    }

    pub fn mirrored(&self) -> LgiMaps {
        let flip = |src: &Vec<f64>| mirror_rows(src, self.width);
        LgiMaps {
            width: self.width,
            height: self.height,
            c1: flip(&self.c1),
            c2: flip(&self.c2),
            c3: flip(&self.c3),
            valid: mirror_rows(&self.valid, self.width),
        }
    }

    /// Channel-interleaved `(c1, c2, c3)` data for a 3-band raster.
    pub fn interleaved(&self) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.c1.len() * 3);
        for i in 0..self.c1.len() {
            out.extend([self.c1[i] as f32, self.c2[i] as f32, self.c3[i] as f32]);
        }
        out
    }

    pub fn validity_mask(&self) -> ShadowMask {
        ShadowMask::from_bools(self.width, self.height, &self.valid)
    }
}

fn mirror_rows<T: Copy>(src: &[T], width: usize) -> Vec<T> {
    src.chunks(width)
        .flat_map(|row| row.iter().rev().copied())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskKind {
    Hard,
    Soft,
}

/// Per-pixel shadow indicator in `[0, 1]`, 1 = shadowed.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowMask {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    pub kind: MaskKind,
}

impl ShadowMask {
    pub fn new(width: usize, height: usize, values: Vec<f64>, kind: MaskKind) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::shape(
                format!("{} values for {width}x{height}", width * height),
                format!("{} values", values.len()),
            ));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument("mask values must lie in [0, 1]".into()));
        }
        if kind == MaskKind::Hard && values.iter().any(|v| *v != 0.0 && *v != 1.0) {
            return Err(Error::InvalidArgument("hard masks hold only 0 and 1".into()));
        }
        Ok(ShadowMask {
            width,
            height,
            values,
            kind,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        ShadowMask {
            width,
            height,
            values: vec![0.0; width * height],
            kind: MaskKind::Hard,
        }
    }

    pub fn from_bools(width: usize, height: usize, bits: &[bool]) -> Self {
        ShadowMask {
            width,
            height,
            values: bits.iter().map(|b| if *b { 1.0 } else { 0.0 }).collect(),
            kind: MaskKind::Hard,
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn binarize(&self, threshold: f64) -> Vec<bool> {
        self.values.iter().map(|v| *v >= threshold).collect()
    }

    pub fn positive_count(&self) -> usize {
        self.values.iter().filter(|v| **v >= 0.5).count()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len().max(1) as f64
    }

    pub fn check_same_shape(&self, other: &ShadowMask) -> Result<()> {
        if (self.width, self.height) != (other.width, other.height) {
            return Err(Error::shape(
                format!("{}x{}", self.width, self.height),
                format!("{}x{}", other.width, other.height),
            ));
        }
        Ok(())
    }
}

/// One point along a light ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaySample {
    /// Ray parameter: fraction of `l - p` for point lights, distance along
    /// the unit direction for directional lights.
    pub delta: f64,
    pub point: Point3,
    pub in_frustum: bool,
}

/// Elevation angle of `to - from` above the camera plane, in `[-pi/2, pi/2]`.
pub fn elevation_angle(from: Point3, to: Point3) -> Result<f64> {
    let v = to - from;
    kernel::elevation(V3::new(v.x, v.y, v.z)).ok_or(Error::DegenerateVector)
}

/// Samples the ray from `p` toward `light`, clipped to the camera frustum.
///
/// Samples sit at `n * extent / N` for `n = 1..=N`. Point lights cap the
/// extent at the light itself. When no positive extent is inside the
/// frustum, point lights report the unclipped samples flagged out-of-frustum
/// and directional lights report nothing.
pub fn sample_ray(
    p: Point3,
    light: &LightSpec,
    cfg: &LgiConfig,
    intrinsics: &CameraIntrinsics,
) -> Result<Vec<RaySample>> {
    if !(p.z > 0.0) {
        return Err(Error::BehindCamera(p.z));
    }
    cfg.validate()?;
    let z_far = cfg.z_far.unwrap_or(f64::INFINITY);
    let frustum = Frustum::new(intrinsics, cfg.z_near, z_far);
    let pv = V3::new(p.x, p.y, p.z);
    let (w, cap) = match light.kind {
        LightKind::Point { position } => (position - p, true),
        LightKind::Directional { direction } => (direction, false),
    };
    if w.norm() == 0.0 {
        return Err(Error::DegenerateVector);
    }
    let n = cfg.n_samples as f64;
    let extent = frustum.extent(pv, V3::new(w.x, w.y, w.z), cap);
    let (s_max, in_frustum) = match extent {
        Some((s, _)) => (s, true),
        None if cap => (1.0, false),
        None => return Ok(Vec::new()),
    };
    Ok((1..=cfg.n_samples)
        .map(|i| {
            let delta = s_max * i as f64 / n;
            RaySample {
                delta,
                point: p + w * delta,
                in_frustum,
            }
        })
        .collect())
}

fn light_target(light: &LightSpec) -> Result<Target<f64>> {
    light.validate()?;
    Ok(match light.kind {
        LightKind::Point { position } => Target::Point(V3::new(position.x, position.y, position.z)),
        LightKind::Directional { direction } => {
            Target::Direction(V3::new(direction.x, direction.y, direction.z))
        }
    })
}

fn resolve_z_far(depth: &DepthMap, cfg: &LgiConfig) -> f64 {
    cfg.z_far
        .or_else(|| depth.max_valid().map(|d| d as f64))
        .unwrap_or(f64::INFINITY)
}

/// Computes LGI maps for a point or directional light.
///
/// Rows are evaluated in parallel on the current rayon pool; the output does
/// not depend on how rows are partitioned.
pub fn compute_lgi(
    depth: &DepthMap,
    intrinsics: &CameraIntrinsics,
    light: &LightSpec,
    cfg: &LgiConfig,
) -> Result<LgiMaps> {
    depth.check_matches(intrinsics)?;
    intrinsics.validate()?;
    cfg.validate()?;
    let target = light_target(light)?;
    let z_far = match target {
        Target::Point(_) => cfg.z_far.unwrap_or(f64::INFINITY),
        Target::Direction(_) => resolve_z_far(depth, cfg),
    };
    let kernel = Kernel::new(depth, intrinsics, cfg, z_far);
    Ok(run_kernel(&kernel, target))
}

/// LGI maps for a light at infinity; `direction` points toward the light.
pub fn lgi_sunlight(
    depth: &DepthMap,
    intrinsics: &CameraIntrinsics,
    direction: Point3,
    cfg: &LgiConfig,
) -> Result<LgiMaps> {
    let light = LightSpec::directional(direction)?;
    compute_lgi(depth, intrinsics, &light, cfg)
}

fn run_kernel(kernel: &Kernel<'_>, target: Target<f64>) -> LgiMaps {
    let (w, h) = (kernel.depth.width(), kernel.depth.height());
    let rows: Vec<Vec<Option<kernel::PixelLgi<f64>>>> = (0..h)
        .into_par_iter()
        .map(|v| (0..w).map(|u| kernel.pixel(u, v, target, None)).collect())
        .collect();
    let mut maps = LgiMaps::empty(w, h);
    for (i, px) in rows.into_iter().flatten().enumerate() {
        if let Some(px) = px {
            maps.c1[i] = px.c1;
            maps.c2[i] = px.c2;
            maps.c3[i] = px.c3;
            maps.valid[i] = true;
        }
    }
    maps
}

/// Binary mask: 1 where the pixel is valid and `|c3| < eta`.
pub fn hard_mask(maps: &LgiMaps, eta: f64) -> ShadowMask {
    let values = maps
        .c3
        .iter()
        .zip(&maps.valid)
        .map(|(c3, valid)| if *valid && c3.abs() < eta { 1.0 } else { 0.0 })
        .collect();
    ShadowMask {
        width: maps.width,
        height: maps.height,
        values,
        kind: MaskKind::Hard,
    }
}

/// Sigmoid relaxation `sigmoid((eta - |c3|) / beta)`; 0 at invalid pixels.
pub fn soft_mask(maps: &LgiMaps, eta: f64, beta: f64) -> Result<ShadowMask> {
    if !(beta > 0.0) {
        return Err(Error::InvalidArgument("beta must be > 0".into()));
    }
    let values = maps
        .c3
        .iter()
        .zip(&maps.valid)
        .map(|(c3, valid)| if *valid { sigmoid((eta - c3.abs()) / beta) } else { 0.0 })
        .collect();
    Ok(ShadowMask {
        width: maps.width,
        height: maps.height,
        values,
        kind: MaskKind::Soft,
    })
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
