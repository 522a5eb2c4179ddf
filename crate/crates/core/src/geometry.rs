//! Pinhole camera model, depth maps and light descriptions.
//!
//! Camera frame: x right, y down, z forward. Integer pixel coordinates are
//! pixel centers, so pixel `(0, 0)` is the center of the top-left pixel.

use std::ops::{Add, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ORIGIN: Point3 = Point3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn dot(self, other: Point3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Option<Point3> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self / n)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn max_abs_diff(self, other: Point3) -> f64 {
        (self.x - other.x)
            .abs()
            .max((self.y - other.y).abs())
            .max((self.z - other.z).abs())
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(a: [f64; 3]) -> Self {
        Point3::new(a[0], a[1], a[2])
    }
}

impl From<Point3> for [f64; 3] {
    fn from(p: Point3) -> Self {
        [p.x, p.y, p.z]
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Div<f64> for Point3 {
    type Output = Point3;
    fn div(self, s: f64) -> Point3 {
        Point3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Point3 {
    type Output = Point3;
    fn neg(self) -> Point3 {
        Point3::new(-self.x, -self.y, -self.z)
    }
}

/// Pinhole intrinsics `K = [[fx, 0, cx], [0, fy, cy], [0, 0, 1]]` plus the
/// image size they apply to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = CameraIntrinsics {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    /// The normalized-scene camera: `fx = W, fy = H, cx = W/2, cy = H/2`.
    ///
    /// With depth in `(0, 1]` this maps the image onto `x, y` in roughly
    /// `[-0.5, 0.5]`.
    pub fn default_for(width: usize, height: usize) -> Self {
        CameraIntrinsics {
            fx: width as f64,
            fy: height as f64,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            width,
            height,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.fx, self.fy, self.cx, self.cy]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "focal lengths must be finite and positive (fx = {}, fy = {})",
                self.fx, self.fy
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidArgument(format!(
                "image size must be at least 1x1 (got {}x{})",
                self.width, self.height
            )));
        }
        Ok(())
    }

    /// Lifts pixel `(u, v)` at depth `d` to the camera-space point `d * K^-1 [u v 1]^T`.
    pub fn lift(&self, u: f64, v: f64, d: f64) -> Result<Point3> {
        if !d.is_finite() || d <= 0.0 {
            return Err(Error::InvalidDepth(d));
        }
        Ok(self.lift_unchecked(u, v, d))
    }

    #[inline]
    pub(crate) fn lift_unchecked(&self, u: f64, v: f64, d: f64) -> Point3 {
        Point3::new((u - self.cx) * d / self.fx, (v - self.cy) * d / self.fy, d)
    }

    /// Projects a camera-space point to (possibly out-of-image) pixel coordinates.
    pub fn project(&self, p: Point3) -> Result<(f64, f64)> {
        if !(p.z > 0.0) {
            return Err(Error::BehindCamera(p.z));
        }
        Ok((self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy))
    }

    /// Direction of the camera ray through pixel `(u, v)`, scaled so `z = 1`.
    pub fn ray_direction(&self, u: f64, v: f64) -> Point3 {
        self.lift_unchecked(u, v, 1.0)
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }
}

/// Single-channel depth grid, row-major, depth measured along camera +z.
///
/// Entries that are non-finite or `<= 0` are invalid (no surface).
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    values: Vec<f32>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::shape(
                format!("{} values for {width}x{height}", width * height),
                format!("{} values", values.len()),
            ));
        }
        Ok(DepthMap {
            width,
            height,
            values,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        DepthMap {
            width,
            height,
            values,
        }
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        DepthMap {
            width,
            height,
            values: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.values[y * self.width + x]
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        is_valid_depth(self.get(x, y))
    }

    pub fn valid_count(&self) -> usize {
        self.values.iter().filter(|d| is_valid_depth(**d)).count()
    }

    /// Largest valid depth, if any entry is valid.
    pub fn max_valid(&self) -> Option<f32> {
        self.values
            .iter()
            .copied()
            .filter(|d| is_valid_depth(*d))
            .reduce(f32::max)
    }

    /// Mean of the lifted points over all valid pixels.
    pub fn centroid(&self, k: &CameraIntrinsics) -> Option<Point3> {
        let mut sum = Point3::ORIGIN;
        let mut n = 0usize;
        for y in 0..self.height {
            for x in 0..self.width {
                let d = self.get(x, y);
                if is_valid_depth(d) {
                    sum = sum + k.lift_unchecked(x as f64, y as f64, d as f64);
                    n += 1;
                }
            }
        }
        (n > 0).then(|| sum / n as f64)
    }

    /// Horizontally mirrored copy (column `x` becomes `width - 1 - x`).
    pub fn mirrored(&self) -> DepthMap {
        DepthMap::from_fn(self.width, self.height, |x, y| {
            self.get(self.width - 1 - x, y)
        })
    }

    pub fn check_matches(&self, k: &CameraIntrinsics) -> Result<()> {
        if self.width != k.width || self.height != k.height {
            return Err(Error::shape(
                format!("{}x{} (intrinsics)", k.width, k.height),
                format!("{}x{} (depth)", self.width, self.height),
            ));
        }
        Ok(())
    }
}

#[inline]
pub fn is_valid_depth(d: f32) -> bool {
    d.is_finite() && d > 0.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LightKind {
    Point { position: Point3 },
    /// `direction` is the unit vector pointing from the scene toward the light.
    Directional { direction: Point3 },
}

/// Spherical placement metadata for a light, relative to some anchor point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LightAngles {
    pub azimuth: f64,
    pub elevation: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LightSpec {
    pub kind: LightKind,
    /// Linear RGB in `[0, 1]`.
    pub color: [f64; 3],
    pub radius: f64,
    pub intensity: f64,
    pub angles: Option<LightAngles>,
}

impl LightSpec {
    pub fn point(position: Point3) -> Self {
        LightSpec {
            kind: LightKind::Point { position },
            color: [1.0; 3],
            radius: 0.0,
            intensity: 1.0,
            angles: None,
        }
    }

    /// A directional light; `direction` points toward the light and is normalized here.
    pub fn directional(direction: Point3) -> Result<Self> {
        let direction = direction.normalized().ok_or(Error::DegenerateVector)?;
        Ok(LightSpec {
            kind: LightKind::Directional { direction },
            color: [1.0; 3],
            radius: 0.0,
            intensity: 1.0,
            angles: None,
        })
    }

    pub fn with_color(mut self, color: [f64; 3]) -> Self {
        self.color = color;
        self
    }

    pub fn with_intensity(mut self, intensity: f64) -> Self {
        self.intensity = intensity;
        self
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = radius;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            LightKind::Point { position } => {
                if !position.is_finite() {
                    return Err(Error::InvalidArgument(
                        "light position must be finite".into(),
                    ));
                }
            }
            LightKind::Directional { direction } => {
                if !direction.is_finite() || (direction.norm() - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidArgument(format!(
                        "light direction must have unit norm (|d| = {})",
                        direction.norm()
                    )));
                }
            }
        }
        if self.color.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::InvalidArgument("light color outside [0, 1]".into()));
        }
        if !(self.radius >= 0.0) || !(self.intensity >= 0.0) {
            return Err(Error::InvalidArgument(
                "light radius and intensity must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Places a point light at `anchor + distance * (cos e cos a, cos e sin a, sin e)`.
///
/// Azimuth is measured in the camera xy-plane from +x toward +y; elevation is
/// measured from that plane toward +z.
pub fn light_from_angles(
    azimuth: f64,
    elevation: f64,
    distance: f64,
    anchor: Point3,
) -> Result<LightSpec> {
    if !(distance > 0.0) || !distance.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "light distance must be positive (got {distance})"
        )));
    }
    if !(elevation.abs() < std::f64::consts::FRAC_PI_2) || !azimuth.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "elevation must lie in (-pi/2, pi/2) (got {elevation})"
        )));
    }
    let mut light = LightSpec::point(anchor + angles_to_offset(azimuth, elevation) * distance);
    light.angles = Some(LightAngles {
        azimuth,
        elevation,
        distance,
    });
    Ok(light)
}

pub(crate) fn angles_to_offset(azimuth: f64, elevation: f64) -> Point3 {
    let (se, ce) = elevation.sin_cos();
    let (sa, ca) = azimuth.sin_cos();
    Point3::new(ce * ca, ce * sa, se)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};

    #[test]
    fn lift_principal_point_is_optical_axis() {
        let k = CameraIntrinsics::default_for(512, 512);
        let p = k.lift(256.0, 256.0, 0.7).unwrap();
        assert_eq!(p, Point3::new(0.0, 0.0, 0.7));
    }

    #[test]
    fn lift_direct_substitution() {
        let k = CameraIntrinsics::new(1.0, 1.0, 0.0, 0.0, 4, 4).unwrap();
        assert_eq!(k.lift(1.0, 0.0, 2.0).unwrap(), Point3::new(2.0, 0.0, 2.0));
    }

    #[test]
    fn lift_round_trips_through_project() {
        let k = CameraIntrinsics::default_for(640, 480);
        let p = k.lift(480.0, 120.0, 1.5).unwrap();
        let (u, v) = k.project(p).unwrap();
        assert_abs_diff_eq!(u, 480.0, epsilon = 1e-9);
        assert_abs_diff_eq!(v, 120.0, epsilon = 1e-9);
    }

    #[test]
    fn lift_rejects_bad_depth() {
        let k = CameraIntrinsics::default_for(8, 8);
        for d in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(matches!(k.lift(1.0, 1.0, d), Err(Error::InvalidDepth(_))));
        }
    }

    #[test]
    fn project_examples() {
        let k = CameraIntrinsics::default_for(640, 480);
        assert_eq!(k.project(Point3::new(0.0, 0.0, 5.0)).unwrap(), (320.0, 240.0));
        let k = CameraIntrinsics::new(100.0, 100.0, 50.0, 50.0, 100, 100).unwrap();
        assert_eq!(k.project(Point3::new(1.0, 2.0, 4.0)).unwrap(), (75.0, 100.0));
        assert!(matches!(
            k.project(Point3::new(1.0, 1.0, 0.0)),
            Err(Error::BehindCamera(_))
        ));
    }

    #[test]
    fn intrinsics_validation() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 0.0, 0.0, 1, 1).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 0.0, 0.0, 0, 1).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 0.0, 0.0, 1, 1).is_ok());
    }

    #[test]
    fn light_from_angles_examples() {
        let l = light_from_angles(0.0, 0.0, 1.0, Point3::ORIGIN).unwrap();
        assert_eq!(l.kind, LightKind::Point { position: Point3::new(1.0, 0.0, 0.0) });

        let l = light_from_angles(0.0, FRAC_PI_2 - 1e-9, 1.0, Point3::ORIGIN).unwrap();
        let LightKind::Point { position } = l.kind else { unreachable!() };
        assert!(position.max_abs_diff(Point3::new(0.0, 0.0, 1.0)) < 1e-8);

        let l = light_from_angles(FRAC_PI_2, FRAC_PI_4, 2.0, Point3::new(0.0, 0.0, 1.0)).unwrap();
        let LightKind::Point { position } = l.kind else { unreachable!() };
        assert!(position.max_abs_diff(Point3::new(0.0, SQRT_2, 1.0 + SQRT_2)) < 1e-12);

        assert!(light_from_angles(0.0, FRAC_PI_2, 1.0, Point3::ORIGIN).is_err());
        assert!(light_from_angles(0.0, 0.0, 0.0, Point3::ORIGIN).is_err());
    }

    #[test]
    fn directional_light_is_normalized() {
        let l = LightSpec::directional(Point3::new(3.0, 0.0, 4.0)).unwrap();
        l.validate().unwrap();
        assert!(LightSpec::directional(Point3::ORIGIN).is_err());
    }

    #[test]
    fn depth_map_validity_and_mirror() {
        let d = DepthMap::new(3, 1, vec![1.0, f32::NAN, -2.0]).unwrap();
        assert!(d.is_valid(0, 0));
        assert!(!d.is_valid(1, 0));
        assert!(!d.is_valid(2, 0));
        assert_eq!(d.valid_count(), 1);
        assert_eq!(d.mirrored().get(2, 0), 1.0);
        assert!(DepthMap::new(2, 2, vec![1.0; 3]).is_err());
    }

    proptest! {
        #[test]
        fn project_lift_round_trip(u in -0.5f64..639.5, v in -0.5f64..479.5, d in prop::sample::select(vec![0.01, 1.0, 10.0])) {
            let k = CameraIntrinsics::default_for(640, 480);
            let (pu, pv) = k.project(k.lift(u, v, d).unwrap()).unwrap();
            prop_assert!((pu - u).abs() < 1e-6 && (pv - v).abs() < 1e-6);
        }

        #[test]
        fn lift_is_linear_in_depth(u in 0.0f64..64.0, v in 0.0f64..64.0, d in 0.01f64..10.0, a in 0.1f64..10.0) {
            let k = CameraIntrinsics::new(70.0, 60.0, 31.5, 30.0, 64, 64).unwrap();
            let p = k.lift(u, v, d).unwrap() * a;
            let q = k.lift(u, v, a * d).unwrap();
            prop_assert!(p.max_abs_diff(q) <= 1e-12 * (1.0 + q.norm()));
        }

        #[test]
        fn project_is_fixed_point_of_lift(x in -5.0f64..5.0, y in -5.0f64..5.0, z in 0.05f64..20.0) {
            let k = CameraIntrinsics::default_for(320, 240);
            let (u, v) = k.project(Point3::new(x, y, z)).unwrap();
            let back = k.lift(u, v, z).unwrap();
            let (u2, v2) = k.project(back).unwrap();
            prop_assert!((u - u2).abs() < 1e-9 && (v - v2).abs() < 1e-9);
        }

        #[test]
        fn light_elevation_matches_requested(a in -3.0f64..3.0, e in -1.5f64..1.5, dist in 0.1f64..100.0) {
            let anchor = Point3::new(0.3, -0.2, 2.0);
            let l = light_from_angles(a, e, dist, anchor).unwrap();
            let LightKind::Point { position } = l.kind else { unreachable!() };
            let v = position - anchor;
            let elev = (v.z / v.norm()).asin();
            prop_assert!((elev - e).abs() < 1e-9);
        }
    }
}
