//! Analytic test scenes with exact depth and exact shadow ground truth.
//!
//! Everything here uses closed-form ray/primitive intersection and never
//! touches the depth-marching code in [`crate::lgi`].

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bridgemath::LinearImage;
use crate::error::{Error, Result};
use crate::geometry::{light_from_angles, CameraIntrinsics, DepthMap, LightKind, LightSpec, Point3};
use crate::lgi::{MaskKind, ShadowMask};

/// Analytic primitives in camera coordinates (x right, y down, z forward).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Primitive {
    /// Horizontal plane `y = y`.
    GroundPlane { y: f64 },
    /// Fronto-parallel plane `z = z`.
    Wall { z: f64 },
    Sphere { center: Point3, radius: f64 },
    /// Axis-aligned box.
    #[serde(rename = "box")]
    BoxAA { min: Point3, max: Point3 },
}

impl Primitive {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Primitive::GroundPlane { y } if !y.is_finite() => {
                Err(Error::InvalidArgument("ground plane height must be finite".into()))
            }
            Primitive::Wall { z } if !z.is_finite() => {
                Err(Error::InvalidArgument("wall offset must be finite".into()))
            }
            Primitive::Sphere { center, radius } if !(radius > 0.0) || !center.is_finite() => {
                Err(Error::InvalidArgument("sphere radius must be > 0".into()))
            }
            Primitive::BoxAA { min, max }
                if !(min.x < max.x && min.y < max.y && min.z < max.z) =>
            {
                Err(Error::InvalidArgument("box min must be < max componentwise".into()))
            }
            _ => Ok(()),
        }
    }

    /// Nearest intersection with `t` in `(t_min, t_max)` and the geometric normal there.
    pub fn intersect(&self, origin: Point3, dir: Point3, t_min: f64, t_max: f64) -> Option<(f64, Point3)> {
        let in_range = |t: f64| t > t_min && t < t_max;
        match *self {
            Primitive::GroundPlane { y } => {
                if dir.y == 0.0 {
                    return None;
                }
                let t = (y - origin.y) / dir.y;
                in_range(t).then_some((t, Point3::new(0.0, -1.0, 0.0)))
            }
            Primitive::Wall { z } => {
                if dir.z == 0.0 {
                    return None;
                }
                let t = (z - origin.z) / dir.z;
                in_range(t).then_some((t, Point3::new(0.0, 0.0, -1.0)))
            }
            Primitive::Sphere { center, radius } => {
                let oc = origin - center;
                let a = dir.dot(dir);
                let half_b = oc.dot(dir);
                let c = oc.dot(oc) - radius * radius;
                let disc = half_b * half_b - a * c;
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                // Numerically stable root pair.
                let q = if half_b > 0.0 { -half_b - sq } else { -half_b + sq };
                let (mut t0, mut t1) = if q != 0.0 { (q / a, c / q) } else { (0.0, 0.0) };
                if t0 > t1 {
                    std::mem::swap(&mut t0, &mut t1);
                }
                let t = if in_range(t0) {
                    t0
                } else if in_range(t1) {
                    t1
                } else {
                    return None;
                };
                let n = (origin + dir * t - center) / radius;
                Some((t, n))
            }
            Primitive::BoxAA { min, max } => {
                let mut t_enter = f64::NEG_INFINITY;
                let mut t_exit = f64::INFINITY;
                let mut n_enter = Point3::ORIGIN;
                let mut n_exit = Point3::ORIGIN;
                let axes = [
                    (origin.x, dir.x, min.x, max.x, Point3::new(1.0, 0.0, 0.0)),
                    (origin.y, dir.y, min.y, max.y, Point3::new(0.0, 1.0, 0.0)),
                    (origin.z, dir.z, min.z, max.z, Point3::new(0.0, 0.0, 1.0)),
                ];
                for (o, d, lo, hi, axis) in axes {
                    if d == 0.0 {
                        if o < lo || o > hi {
                            return None;
                        }
                        continue;
                    }
                    let (mut ta, mut tb) = ((lo - o) / d, (hi - o) / d);
                    let (mut na, mut nb) = (-axis, axis);
                    if ta > tb {
                        std::mem::swap(&mut ta, &mut tb);
                        std::mem::swap(&mut na, &mut nb);
                    }
                    if ta > t_enter {
                        t_enter = ta;
                        n_enter = na;
                    }
                    if tb < t_exit {
                        t_exit = tb;
                        n_exit = nb;
                    }
                }
                if t_enter > t_exit {
                    return None;
                }
                if in_range(t_enter) {
                    Some((t_enter, n_enter))
                } else if in_range(t_exit) {
                    Some((t_exit, n_exit))
                } else {
                    None
                }
            }
        }
    }

    pub fn contains(&self, p: Point3) -> bool {
        match *self {
            Primitive::Sphere { center, radius } => (p - center).norm() < radius,
            Primitive::BoxAA { min, max } => {
                p.x > min.x && p.x < max.x && p.y > min.y && p.y < max.y && p.z > min.z && p.z < max.z
            }
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AnalyticScene {
    pub primitives: Vec<Primitive>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub point: Point3,
    /// Unit normal facing the incoming ray.
    pub normal: Point3,
    pub primitive: usize,
}

impl AnalyticScene {
    pub fn new(primitives: Vec<Primitive>) -> Result<Self> {
        let scene = AnalyticScene { primitives };
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        self.primitives.iter().try_for_each(Primitive::validate)
    }

    pub fn is_empty(&self) -> bool {
        self.primitives.is_empty()
    }

    pub fn trace(&self, origin: Point3, dir: Point3, t_min: f64, t_max: f64) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        for (i, prim) in self.primitives.iter().enumerate() {
            let limit = best.map_or(t_max, |h| h.t);
            if let Some((t, n)) = prim.intersect(origin, dir, t_min, limit) {
                let n = n.normalized().unwrap_or(n);
                let n = if n.dot(dir) > 0.0 { -n } else { n };
                best = Some(Hit {
                    t,
                    point: origin + dir * t,
                    normal: n,
                    primitive: i,
                });
            }
        }
        best
    }

    pub fn occluded(&self, origin: Point3, dir: Point3, t_max: f64) -> bool {
        self.primitives
            .iter()
            .any(|p| p.intersect(origin, dir, 0.0, t_max).is_some())
    }

    /// Whether `p` sees the light, using a shadow ray offset by `epsilon`.
    pub fn light_visible(&self, p: Point3, light: &LightSpec, cfg: &OracleConfig) -> bool {
        let (dir, dist) = match light.kind {
            LightKind::Point { position } => {
                let v = position - p;
                let dist = v.norm();
                if dist <= cfg.shadow_epsilon {
                    return true;
                }
                (v / dist, dist)
            }
            LightKind::Directional { direction } => (direction, f64::INFINITY),
        };
        let origin = p + dir * cfg.shadow_epsilon;
        let t_max = (dist - cfg.shadow_epsilon).min(cfg.max_t.unwrap_or(f64::INFINITY));
        !self.occluded(origin, dir, t_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    /// Shadow-ray origin offset toward the light.
    pub shadow_epsilon: f64,
    /// Upper bound on shadow-ray length; unbounded when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_t: Option<f64>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            shadow_epsilon: 1e-5,
            max_t: None,
        }
    }
}

/// Exact depth (camera z of the nearest hit) per pixel center; NaN where nothing is hit.
pub fn render_depth(scene: &AnalyticScene, intrinsics: &CameraIntrinsics) -> Result<DepthMap> {
    if scene.is_empty() {
        return Err(Error::InvalidArgument("scene has no primitives".into()));
    }
    scene.validate()?;
    intrinsics.validate()?;
    let (w, h) = (intrinsics.width, intrinsics.height);
    let values: Vec<f32> = (0..h)
        .into_par_iter()
        .flat_map_iter(|v| {
            (0..w).map(move |u| {
                let dir = intrinsics.ray_direction(u as f64, v as f64);
                match scene.trace(Point3::ORIGIN, dir, 0.0, f64::INFINITY) {
                    Some(hit) => (hit.t * dir.z) as f32,
                    None => f32::NAN,
                }
            })
        })
        .collect();
    DepthMap::new(w, h, values)
}

/// Ground-truth hard shadow mask by exact shadow rays from every lifted pixel.
pub fn oracle_shadow_mask(
    scene: &AnalyticScene,
    depth: &DepthMap,
    intrinsics: &CameraIntrinsics,
    light: &LightSpec,
    cfg: &OracleConfig,
) -> Result<ShadowMask> {
    depth.check_matches(intrinsics)?;
    light.validate()?;
    if !(cfg.shadow_epsilon > 0.0) {
        return Err(Error::InvalidArgument("shadow_epsilon must be > 0".into()));
    }
    let (w, h) = (depth.width(), depth.height());
    let values: Vec<f64> = (0..h)
        .into_par_iter()
        .flat_map_iter(|v| {
            (0..w).map(move |u| {
                let d = depth.get(u, v);
                if !crate::geometry::is_valid_depth(d) {
                    return 0.0;
                }
                let p = intrinsics.lift_unchecked(u as f64, v as f64, d as f64);
                if scene.light_visible(p, light, cfg) {
                    0.0
                } else {
                    1.0
                }
            })
        })
        .collect();
    ShadowMask::new(w, h, values, MaskKind::Hard)
}

/// Diffuse surface reflectance used by [`render_direct`].
pub const ALBEDO: f64 = 0.8;

/// Direct-only linear radiance: Lambertian surfaces, hard shadows, inverse
/// square falloff for point lights. No tone mapping.
pub fn render_direct(
    scene: &AnalyticScene,
    intrinsics: &CameraIntrinsics,
    lights: &[LightSpec],
    cfg: &OracleConfig,
) -> Result<LinearImage> {
    scene.validate()?;
    intrinsics.validate()?;
    for l in lights {
        l.validate()?;
    }
    let (w, h) = (intrinsics.width, intrinsics.height);
    let data: Vec<f64> = (0..h)
        .into_par_iter()
        .flat_map_iter(|v| {
            (0..w).flat_map(move |u| {
                let dir = intrinsics.ray_direction(u as f64, v as f64);
                let mut rgb = [0.0f64; 3];
                if let Some(hit) = scene.trace(Point3::ORIGIN, dir, 0.0, f64::INFINITY) {
                    for light in lights {
                        let c = direct_contribution(scene, &hit, light, cfg);
                        for ch in 0..3 {
                            rgb[ch] += c[ch];
                        }
                    }
                }
                rgb
            })
        })
        .collect();
    LinearImage::new(w, h, data)
}

fn direct_contribution(scene: &AnalyticScene, hit: &Hit, light: &LightSpec, cfg: &OracleConfig) -> [f64; 3] {
    let (to_light, falloff) = match light.kind {
        LightKind::Point { position } => {
            let v = position - hit.point;
            let r2 = v.dot(v);
            (v / r2.sqrt(), 1.0 / r2)
        }
        LightKind::Directional { direction } => (direction, 1.0),
    };
    let cos = hit.normal.dot(to_light);
    if cos <= 0.0 || !scene.light_visible(hit.point, light, cfg) {
        return [0.0; 3];
    }
    let s = ALBEDO / PI * light.intensity * cos * falloff;
    [s * light.color[0], s * light.color[1], s * light.color[2]]
}

/// One scene of a verification suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteEntry {
    pub scene: AnalyticScene,
    pub light: LightSpec,
    pub intrinsics: CameraIntrinsics,
}

pub const DEFAULT_SUITE_SIZE: usize = 20;
pub const DEFAULT_SUITE_RESOLUTION: usize = 256;

/// The default front-lit suite: 20 scenes at 256x256.
pub fn scene_suite(seed: u64) -> Vec<SuiteEntry> {
    scene_suite_with(seed, DEFAULT_SUITE_SIZE, DEFAULT_SUITE_RESOLUTION)
}

/// Front-lit desk-scale scenes: ground plane, optional back wall, one sphere
/// or box resting on the ground, and a point light between the camera and the
/// occluder so the camera sees every occluder surface that matters.
pub fn scene_suite_with(seed: u64, count: usize, resolution: usize) -> Vec<SuiteEntry> {
    generate_suite(seed, count, resolution, Lighting::Front)
}

/// Fixed reference scene: a sphere resting on the ground, lit from above-left
/// and in front, seen through the default intrinsics.
pub fn sphere_scene(resolution: usize) -> SuiteEntry {
    let center = Point3::new(0.0, 0.55, 3.0);
    SuiteEntry {
        scene: AnalyticScene {
            primitives: vec![Primitive::GroundPlane { y: 1.0 }, Primitive::Sphere { center, radius: 0.45 }],
        },
        light: light_from_angles(SPHERE_LIGHT_AZIMUTH, SPHERE_LIGHT_ELEVATION, 2.5, center)
            .expect("constant light placement is valid"),
        intrinsics: CameraIntrinsics::default_for(resolution, resolution),
    }
}

pub const SPHERE_LIGHT_AZIMUTH: f64 = -PI / 2.0 - 0.5;
pub const SPHERE_LIGHT_ELEVATION: f64 = -0.6;

/// Back-lit scenes where the camera cannot see the occluding surfaces. These
/// are expected to disagree with the oracle and are kept only for diagnostics.
pub fn ambiguous_suite(seed: u64, count: usize, resolution: usize) -> Vec<SuiteEntry> {
    generate_suite(seed, count, resolution, Lighting::Back)
}

#[derive(Clone, Copy, PartialEq)]
enum Lighting {
    Front,
    Back,
}

fn generate_suite(seed: u64, count: usize, resolution: usize, lighting: Lighting) -> Vec<SuiteEntry> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let entry = random_entry(&mut rng, resolution, lighting);
        if has_visible_cast_shadow(&entry) {
            out.push(entry);
        }
    }
    out
}

fn random_entry(rng: &mut ChaCha8Rng, resolution: usize, lighting: Lighting) -> SuiteEntry {
    let f = resolution as f64 * rng.random_range(0.9..1.2);
    let c = resolution as f64 / 2.0;
    let intrinsics = CameraIntrinsics {
        fx: f,
        fy: f,
        cx: c,
        cy: c,
        width: resolution,
        height: resolution,
    };

    let ground = rng.random_range(0.8..1.2);
    let mut primitives = vec![Primitive::GroundPlane { y: ground }];
    let wall_gap = rng.random_bool(0.5).then(|| rng.random_range(0.3..0.8));

    let cx = rng.random_range(-0.4..0.4);
    let cz = rng.random_range(2.4..3.4);
    let (occluder, anchor, back) = if rng.random_bool(0.5) {
        let r = rng.random_range(0.25..0.45);
        let lift = rng.random_range(0.0..0.05);
        let center = Point3::new(cx, ground - r - lift, cz);
        (Primitive::Sphere { center, radius: r }, center, cz + r)
    } else {
        let hx = rng.random_range(0.15..0.4);
        let hy = rng.random_range(0.15..0.4);
        let hz = rng.random_range(0.15..0.4);
        let min = Point3::new(cx - hx, ground - 2.0 * hy, cz - hz);
        let max = Point3::new(cx + hx, ground, cz + hz);
        (Primitive::BoxAA { min, max }, (min + max) / 2.0, max.z)
    };
    primitives.push(occluder);
    // A wall, when present, stands a short way behind the occluder so shadows fall on it.
    if let Some(gap) = wall_gap {
        primitives.insert(1, Primitive::Wall { z: back + gap });
    }

    let azimuth = -PI / 2.0 + rng.random_range(-0.9..0.9);
    let elevation = match lighting {
        Lighting::Front => -rng.random_range(0.5..0.9),
        Lighting::Back => rng.random_range(0.4..0.9),
    };
    let distance = rng.random_range(2.0..3.0);
    let light = light_from_angles(azimuth, elevation, distance, anchor)
        .expect("suite light parameters are in range");
    let light = light
        .with_color([
            rng.random_range(0.7..1.0),
            rng.random_range(0.7..1.0),
            rng.random_range(0.7..1.0),
        ])
        .with_radius(rng.random_range(0.0..0.2))
        .with_intensity(rng.random_range(5.0..20.0));

    SuiteEntry {
        scene: AnalyticScene { primitives },
        light,
        intrinsics,
    }
}

/// The occluder must shadow some visible ground or wall pixel at low resolution.
fn has_visible_cast_shadow(entry: &SuiteEntry) -> bool {
    let n = 64;
    let scale = n as f64 / entry.intrinsics.width as f64;
    let k = CameraIntrinsics {
        fx: entry.intrinsics.fx * scale,
        fy: entry.intrinsics.fy * scale,
        cx: entry.intrinsics.cx * scale,
        cy: entry.intrinsics.cy * scale,
        width: n,
        height: n,
    };
    let cfg = OracleConfig::default();
    let mut shadowed = 0;
    for v in 0..n {
        for u in 0..n {
            let dir = k.ray_direction(u as f64, v as f64);
            let Some(hit) = entry.scene.trace(Point3::ORIGIN, dir, 0.0, f64::INFINITY) else {
                continue;
            };
            let background = matches!(
                entry.scene.primitives[hit.primitive],
                Primitive::GroundPlane { .. } | Primitive::Wall { .. }
            );
            if background && !entry.scene.light_visible(hit.point, &entry.light, &cfg) {
                shadowed += 1;
            }
        }
    }
    shadowed >= 8
}
