//! Forward-mode derivative of the soft shadow mask with respect to the light's
//! azimuth or elevation.

use rayon::prelude::*;

use super::kernel::{Kernel, Signature, Target, V3};
use super::real::{Dual, Real};
use super::LgiConfig;
use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, DepthMap, Point3};

/// A point light placed on a sphere around `anchor`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LightPlacement {
    pub anchor: Point3,
    pub azimuth: f64,
    pub elevation: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LightParam {
    Azimuth,
    Elevation,
}

impl LightPlacement {
    pub fn perturbed(mut self, param: LightParam, step: f64) -> Self {
        match param {
            LightParam::Azimuth => self.azimuth += step,
            LightParam::Elevation => self.elevation += step,
        }
        self
    }

    pub fn position(&self) -> Point3 {
        let p = self.position_dual(None);
        Point3::new(p.x.v, p.y.v, p.z.v)
    }

    fn position_dual(&self, param: Option<LightParam>) -> V3<Dual> {
        let a = match param {
            Some(LightParam::Azimuth) => Dual::variable(self.azimuth),
            _ => Dual::cst(self.azimuth),
        };
        let e = match param {
            Some(LightParam::Elevation) => Dual::variable(self.elevation),
            _ => Dual::cst(self.elevation),
        };
        let (sa, ca) = (sin(a), cos(a));
        let (se, ce) = (sin(e), cos(e));
        let r = Dual::cst(self.distance);
        V3::new(
            Dual::cst(self.anchor.x) + r * ce * ca,
            Dual::cst(self.anchor.y) + r * ce * sa,
            Dual::cst(self.anchor.z) + r * se,
        )
    }
}

fn sin(x: Dual) -> Dual {
    Dual::new(x.v.sin(), x.d * x.v.cos())
}

fn cos(x: Dual) -> Dual {
    Dual::new(x.v.cos(), -x.d * x.v.sin())
}

/// Soft-mask values and their derivative with respect to one light parameter.
#[derive(Debug, Clone)]
pub struct SoftMaskJet {
    pub width: usize,
    pub height: usize,
    pub value: Vec<f64>,
    pub gradient: Vec<f64>,
    pub valid: Vec<bool>,
    /// Hash of each pixel's discrete choices (active frustum bound, fetch
    /// cells, argmin sample). The derivative is exact wherever this does not
    /// change under a small perturbation.
    pub signature: Vec<u64>,
}

impl SoftMaskJet {
    pub fn mean_value(&self, pixels: &[usize]) -> f64 {
        pixels.iter().map(|i| self.value[*i]).sum::<f64>() / pixels.len() as f64
    }

    pub fn mean_gradient(&self, pixels: &[usize]) -> f64 {
        pixels.iter().map(|i| self.gradient[*i]).sum::<f64>() / pixels.len() as f64
    }
}

/// Evaluates the soft mask for a point light at `placement` together with
/// its derivative with respect to `param`.
#[allow(clippy::too_many_arguments)]
pub fn soft_mask_jet(
    depth: &DepthMap,
    intrinsics: &CameraIntrinsics,
    placement: LightPlacement,
    cfg: &LgiConfig,
    eta: f64,
    beta: f64,
    param: LightParam,
) -> Result<SoftMaskJet> {
    depth.check_matches(intrinsics)?;
    cfg.validate()?;
    if !(beta > 0.0) {
        return Err(Error::InvalidArgument("beta must be > 0".into()));
    }
    if !(placement.distance > 0.0) {
        return Err(Error::InvalidArgument("light distance must be > 0".into()));
    }
    let kernel = Kernel::new(depth, intrinsics, cfg, cfg.z_far.unwrap_or(f64::INFINITY));
    let light = Target::Point(placement.position_dual(Some(param)));
    let (w, h) = (depth.width(), depth.height());

    let rows: Vec<Vec<(f64, f64, bool, u64)>> = (0..h)
        .into_par_iter()
        .map(|v| {
            (0..w)
                .map(|u| {
                    let mut sig = Signature::default();
                    match kernel.pixel(u, v, light, Some(&mut sig)) {
                        Some(px) => {
                            let x = (Dual::cst(eta) - px.c3.abs()) / Dual::cst(beta);
                            let s = Dual::cst(1.0) / (Dual::cst(1.0) + (-x).exp());
                            (s.v, s.d, true, sig.0)
                        }
                        None => (0.0, 0.0, false, sig.0),
                    }
                })
                .collect()
        })
        .collect();

    let n = w * h;
    let mut jet = SoftMaskJet {
        width: w,
        height: h,
        value: Vec::with_capacity(n),
        gradient: Vec::with_capacity(n),
        valid: Vec::with_capacity(n),
        signature: Vec::with_capacity(n),
    };
    for (value, grad, valid, sig) in rows.into_iter().flatten() {
        jet.value.push(value);
        jet.gradient.push(grad);
        jet.valid.push(valid);
        jet.signature.push(sig);
    }
    Ok(jet)
}
