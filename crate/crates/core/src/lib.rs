//! Light-geometry interaction (LGI) maps and shadow masks from depth maps.
//!
//! - [`geometry`]: pinhole camera, depth maps, lights.
//! - [`lgi`]: ray sampling toward the light, elevation differences, LGI
//!   channels, hard and soft shadow masks.
//! - [`synth`]: analytic scenes, exact depth rendering and the shadow-ray oracle.
//! - [`metrics`]: IoU, BER, RMSE.
//! - [`bridgemath`]: Brownian-bridge matching kernels and training losses.
//! - [`io`]: PFM, PNG mask and JSON scene formats.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bridgemath;
pub mod error;
pub mod geometry;
pub mod io;
pub mod lgi;
pub mod metrics;
pub mod synth;

pub use error::{Error, Result};
pub use geometry::{light_from_angles, CameraIntrinsics, DepthMap, LightKind, LightSpec, Point3};
pub use lgi::{
    compute_lgi, elevation_angle, hard_mask, lgi_sunlight, sample_ray, soft_mask, Interp,
    LgiConfig, LgiMaps, MaskKind, ShadowMask,
};
