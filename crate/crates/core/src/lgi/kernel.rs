//! Per-pixel LGI evaluation, generic over the scalar type.
//!
//! Pixel coordinates are handled as offsets from the principal point wherever
//! possible. That keeps the whole kernel bitwise equivariant under a horizontal
//! mirror when `cx` sits at the image center.

use std::ops::{Add, Mul, Sub};

use super::real::Real;
use super::{Interp, LgiConfig};
use crate::geometry::{is_valid_depth, CameraIntrinsics, DepthMap};

#[derive(Debug, Clone, Copy)]
pub(crate) struct V3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> V3<T> {
    #[inline]
    pub fn new(x: T, y: T, z: T) -> Self {
        V3 { x, y, z }
    }

    #[inline]
    pub fn norm(self) -> T {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

impl V3<f64> {
    #[inline]
    pub fn lift<T: Real>(self) -> V3<T> {
        V3::new(T::cst(self.x), T::cst(self.y), T::cst(self.z))
    }
}

impl<T: Real> Add for V3<T> {
    type Output = V3<T>;
    #[inline]
    fn add(self, o: V3<T>) -> V3<T> {
        V3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> Sub for V3<T> {
    type Output = V3<T>;
    #[inline]
    fn sub(self, o: V3<T>) -> V3<T> {
        V3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> Mul<T> for V3<T> {
    type Output = V3<T>;
    #[inline]
    fn mul(self, s: T) -> V3<T> {
        V3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Elevation of `v` above the camera plane (normal `+z`), or `None` for a zero vector.
#[inline]
pub(crate) fn elevation<T: Real>(v: V3<T>) -> Option<T> {
    let n = v.norm();
    if !(n.val() > 0.0) {
        return None;
    }
    let r = v.z / n;
    let r = if r.val() > 1.0 {
        T::cst(1.0)
    } else if r.val() < -1.0 {
        T::cst(-1.0)
    } else {
        r
    };
    Some(r.asin())
}

/// The camera-visible region as linear constraints on `x/z` and `y/z`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Frustum {
    pub z_near: f64,
    pub z_far: f64,
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
}

impl Frustum {
    pub fn new(k: &CameraIntrinsics, z_near: f64, z_far: f64) -> Self {
        Frustum {
            z_near,
            z_far,
            x_lo: (-0.5 - k.cx) / k.fx,
            x_hi: (k.width as f64 - 0.5 - k.cx) / k.fx,
            y_lo: (-0.5 - k.cy) / k.fy,
            y_hi: (k.height as f64 - 0.5 - k.cy) / k.fy,
        }
    }

    /// Largest `s` such that `p + s·w` stays inside, capped at 1 when `cap_at_one`.
    ///
    /// Every constraint is `c0 + c1·s >= 0` and holds at `s = 0` when `p` is
    /// inside, so the feasible set is `[0, s_max]`. Returns the active
    /// constraint id alongside (0 = the cap).
    pub fn extent<T: Real>(&self, p: V3<f64>, w: V3<T>, cap_at_one: bool) -> Option<(T, u8)> {
        let mut best: Option<(T, u8)> = cap_at_one.then(|| (T::cst(1.0), 0));
        let mut consider = |c0: f64, c1: T, id: u8| -> bool {
            if c0 < 0.0 {
                return false;
            }
            if c1.val() < 0.0 {
                let s = T::cst(c0) / -c1;
                if best.is_none_or(|(b, _)| s.val() < b.val()) {
                    best = Some((s, id));
                }
            }
            true
        };
        let inside = consider(p.z - self.z_near, w.z, 1)
            && (!self.z_far.is_finite() || consider(self.z_far - p.z, -w.z, 2))
            && consider(p.x - self.x_lo * p.z, w.x - w.z.scale(self.x_lo), 3)
            && consider(self.x_hi * p.z - p.x, w.z.scale(self.x_hi) - w.x, 4)
            && consider(p.y - self.y_lo * p.z, w.y - w.z.scale(self.y_lo), 5)
            && consider(self.y_hi * p.z - p.y, w.z.scale(self.y_hi) - w.y, 6);
        if !inside {
            return None;
        }
        best.filter(|(s, _)| s.val() > 0.0 && s.val().is_finite())
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Target<T> {
    /// Light position.
    Point(V3<T>),
    /// Direction toward the light.
    Direction(V3<T>),
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct PixelLgi<T> {
    pub c1: T,
    pub c2: T,
    pub c3: T,
}

pub(crate) struct Kernel<'a> {
    pub depth: &'a DepthMap,
    pub k: &'a CameraIntrinsics,
    pub frustum: Frustum,
    pub n_samples: usize,
    pub interp: Interp,
}

/// Running hash of the discrete decisions taken for one pixel.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Signature(pub u64);

impl Signature {
    #[inline]
    fn mix(&mut self, v: u64) {
        self.0 = (self.0 ^ v).wrapping_mul(0x0000_0100_0000_01b3).rotate_left(17);
    }
}

impl<'a> Kernel<'a> {
    pub fn new(depth: &'a DepthMap, k: &'a CameraIntrinsics, cfg: &LgiConfig, z_far: f64) -> Self {
        Kernel {
            depth,
            k,
            frustum: Frustum::new(k, cfg.z_near, z_far),
            n_samples: cfg.n_samples,
            interp: cfg.interp,
        }
    }

    /// The lifted surface point at pixel `(u, v)`, if its depth is valid.
    #[inline]
    pub fn surface_point(&self, u: usize, v: usize) -> Option<V3<f64>> {
        let d = self.depth.get(u, v);
        if !is_valid_depth(d) {
            return None;
        }
        let p = self.k.lift_unchecked(u as f64, v as f64, d as f64);
        Some(V3::new(p.x, p.y, p.z))
    }

    pub fn pixel<T: Real>(
        &self,
        u: usize,
        v: usize,
        target: Target<T>,
        mut sig: Option<&mut Signature>,
    ) -> Option<PixelLgi<T>> {
        let p = self.surface_point(u, v)?;
        let pt = p.lift::<T>();
        let (w, cap) = match target {
            Target::Point(l) => (l - pt, true),
            Target::Direction(d) => (d, false),
        };
        let e_light = elevation(w)?;
        let (s_max, active) = self.frustum.extent(p, w, cap)?;
        if let Some(s) = sig.as_deref_mut() {
            s.mix(active as u64);
        }

        let k = self.k;
        let (ou, ov) = (u as f64 - k.cx, v as f64 - k.cy);
        let n_total = self.n_samples as f64;
        let mut best: Option<(PixelLgi<T>, f64)> = None;
        let mut argmin = usize::MAX;

        for n in 1..=self.n_samples {
            let s_n = s_max.scale(n as f64) / T::cst(n_total);
            let sample = pt + w * s_n;
            if !(sample.z.val() > 0.0) {
                mark(&mut sig, 1);
                continue;
            }
            let tx = sample.x.scale(k.fx) / sample.z;
            let ty = sample.y.scale(k.fy) / sample.z;
            let (dx, dy) = (tx.val() - ou, ty.val() - ov);
            if dx * dx + dy * dy < 0.25 {
                mark(&mut sig, 2);
                continue;
            }
            let Some(depth) = self.fetch(tx, ty, &mut sig) else {
                mark(&mut sig, 3);
                continue;
            };
            let surface = sample * (depth / sample.z);
            let Some(e_surface) = elevation(surface - pt) else {
                mark(&mut sig, 4);
                continue;
            };
            let e_d = e_surface - e_light;
            let a = e_d.abs().val();
            best = Some(match best {
                None => {
                    argmin = n;
                    (
                        PixelLgi {
                            c1: e_d,
                            c2: e_d,
                            c3: e_d,
                        },
                        a,
                    )
                }
                Some((mut acc, best_abs)) => {
                    if e_d.val() < acc.c1.val() {
                        acc.c1 = e_d;
                    }
                    if e_d.val() > acc.c2.val() {
                        acc.c2 = e_d;
                    }
                    if a < best_abs {
                        acc.c3 = e_d;
                        argmin = n;
                        (acc, a)
                    } else {
                        (acc, best_abs)
                    }
                }
            });
        }
        if let Some(s) = sig {
            s.mix(argmin as u64);
        }
        best.map(|(px, _)| px)
    }

    /// Depth at offset `(tx, ty)` from the principal point.
    #[inline]
    fn fetch<T: Real>(&self, tx: T, ty: T, sig: &mut Option<&mut Signature>) -> Option<T> {
        let k = self.k;
        if self.interp == Interp::Bilinear {
            if let Some((d, cell)) = self.bilinear(k.cx + tx.val(), k.cy + ty.val(), tx, ty) {
                mark(sig, 0x10 ^ (cell << 8));
                return Some(d);
            }
        }
        let x = nearest_index(tx.val(), k.cx, k.width)?;
        let y = nearest_index(ty.val(), k.cy, k.height)?;
        let d = self.depth.get(x, y);
        mark(sig, 0x20 ^ (((y * k.width + x) as u64) << 8));
        is_valid_depth(d).then(|| T::cst(d as f64))
    }

    #[inline]
    fn bilinear<T: Real>(&self, u: f64, v: f64, tx: T, ty: T) -> Option<(T, u64)> {
        let (w, h) = (self.k.width, self.k.height);
        let (u0, v0) = (u.floor(), v.floor());
        if !(u0 >= -1.0 && v0 >= -1.0 && u0 <= w as f64 && v0 <= h as f64) {
            return None;
        }
        let clamp = |i: f64, n: usize| (i.max(0.0) as usize).min(n - 1);
        let (xa, xb) = (clamp(u0, w), clamp(u0 + 1.0, w));
        let (ya, yb) = (clamp(v0, h), clamp(v0 + 1.0, h));
        let d00 = self.depth.get(xa, ya);
        let d10 = self.depth.get(xb, ya);
        let d01 = self.depth.get(xa, yb);
        let d11 = self.depth.get(xb, yb);
        if ![d00, d10, d01, d11].into_iter().all(is_valid_depth) {
            return None;
        }
        let fu = tx - T::cst(u0 - self.k.cx);
        let fv = ty - T::cst(v0 - self.k.cy);
        let one = T::cst(1.0);
        let top = T::cst(d00 as f64) * (one - fu) + T::cst(d10 as f64) * fu;
        let bottom = T::cst(d01 as f64) * (one - fu) + T::cst(d11 as f64) * fu;
        let d = top * (one - fv) + bottom * fv;
        let cell = ((v0 + 1.0) as u64) * (w as u64 + 2) + (u0 + 1.0) as u64;
        Some((d, cell))
    }
}

#[inline]
fn mark(sig: &mut Option<&mut Signature>, v: u64) {
    if let Some(s) = sig.as_deref_mut() {
        s.mix(v);
    }
}

/// Nearest pixel index for offset `t` from principal point `c`.
///
/// Exact half-pixel ties resolve toward the principal point, which makes the
/// rule symmetric under `t -> -t` when `c` is the image center.
#[inline]
pub(crate) fn nearest_index(t: f64, c: f64, size: usize) -> Option<usize> {
    let u = c + t;
    let i = if t.is_sign_negative() {
        (u + 0.5).floor()
    } else {
        (u - 0.5).ceil()
    };
    if !(i > -1.5 && i < size as f64 + 0.5) {
        return None;
    }
    Some((i.max(0.0) as usize).min(size - 1))
}
