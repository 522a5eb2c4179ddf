//! Mask and image metrics: confusion counts, IoU, balanced error rate, RMSE.

use serde::{Deserialize, Serialize};

use crate::bridgemath::Image;
use crate::error::{Error, Result};
use crate::lgi::ShadowMask;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// Counts after binarizing both masks (`value >= threshold` is positive).
pub fn confusion(pred: &ShadowMask, gt: &ShadowMask, threshold: f64) -> Result<ConfusionCounts> {
    pred.check_same_shape(gt)?;
    let mut c = ConfusionCounts::default();
    for (p, g) in pred.values.iter().zip(&gt.values) {
        match (*p >= threshold, *g >= threshold) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

pub fn iou(c: &ConfusionCounts) -> Result<f64> {
    let union = c.tp + c.fp + c.fn_;
    if union == 0 {
        return Err(Error::DegenerateDenominator);
    }
    Ok(c.tp as f64 / union as f64)
}

/// Balanced error rate `1 - (TPR + TNR) / 2`.
pub fn ber(c: &ConfusionCounts) -> Result<f64> {
    let pos = c.tp + c.fn_;
    let neg = c.tn + c.fp;
    if pos == 0 || neg == 0 {
        return Err(Error::DegenerateClass);
    }
    Ok(1.0 - 0.5 * (c.tp as f64 / pos as f64 + c.tn as f64 / neg as f64))
}

/// Root mean squared difference over every channel of the pixels in
/// `region` (all pixels when `None`).
pub fn rmse(a: &Image, b: &Image, region: Option<&[bool]>) -> Result<f64> {
    a.check_same_shape(b)?;
    if let Some(r) = region {
        if r.len() != a.pixel_count() {
            return Err(Error::shape(format!("{} region pixels", a.pixel_count()), format!("{}", r.len())));
        }
    }
    let c = a.channels;
    let mut sum = 0.0;
    let mut n = 0usize;
    for (i, (pa, pb)) in a.data.chunks(c).zip(b.data.chunks(c)).enumerate() {
        if region.is_some_and(|r| !r[i]) {
            continue;
        }
        sum += pa.iter().zip(pb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
        n += c;
    }
    if n == 0 {
        return Err(Error::DegenerateRegion);
    }
    Ok((sum / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lgi::MaskKind;
    use proptest::prelude::*;

    fn m(v: &[f64]) -> ShadowMask {
        ShadowMask::new(2, 2, v.to_vec(), MaskKind::Hard).unwrap()
    }

    #[test]
    fn fixture_counts() {
        let c = confusion(&m(&[1.0, 1.0, 0.0, 0.0]), &m(&[1.0, 0.0, 1.0, 0.0]), 0.5).unwrap();
        assert_eq!(c, ConfusionCounts { tp: 1, fp: 1, fn_: 1, tn: 1 });
        assert_eq!(iou(&c).unwrap(), 1.0 / 3.0);
        assert_eq!(ber(&c).unwrap(), 0.5);
    }

    #[test]
    fn identical_and_complementary() {
        let g = m(&[1.0, 0.0, 0.0, 1.0]);
        let c = confusion(&g, &g, 0.5).unwrap();
        assert_eq!((c.fp, c.fn_), (0, 0));
        assert_eq!(iou(&c).unwrap(), 1.0);
        assert_eq!(ber(&c).unwrap(), 0.0);
        let c = confusion(&m(&[0.0, 1.0, 1.0, 0.0]), &g, 0.5).unwrap();
        assert_eq!((c.tp, c.tn), (0, 0));
        assert_eq!(iou(&c).unwrap(), 0.0);
        assert_eq!(ber(&c).unwrap(), 1.0);
        let c = confusion(&m(&[1.0; 4]), &g, 0.5).unwrap();
        assert_eq!(ber(&c).unwrap(), 0.5);
    }

    #[test]
    fn threshold_is_inclusive() {
        let soft = ShadowMask::new(2, 2, vec![0.5, 0.49, 0.0, 0.0], MaskKind::Soft).unwrap();
        let c = confusion(&soft, &m(&[1.0, 1.0, 0.0, 0.0]), 0.5).unwrap();
        assert_eq!((c.tp, c.fn_), (1, 1));
    }

    #[test]
    fn degenerate_cases() {
        let z = m(&[0.0; 4]);
        let c = confusion(&z, &z, 0.5).unwrap();
        assert!(matches!(iou(&c), Err(Error::DegenerateDenominator)));
        assert!(matches!(ber(&c), Err(Error::DegenerateClass)));
        let other = ShadowMask::zeros(3, 2);
        assert!(matches!(confusion(&z, &other, 0.5), Err(Error::ShapeMismatch { .. })));
        let a = Image::zeros(2, 2, 3);
        assert!(matches!(rmse(&a, &a, Some(&[false; 4])), Err(Error::DegenerateRegion)));
    }

    #[test]
    fn rmse_examples() {
        let a = Image::new(2, 2, (0..12).map(|i| i as f64 * 0.1).collect()).unwrap();
        assert_eq!(rmse(&a, &a, None).unwrap(), 0.0);
        let b = Image::new(2, 2, a.data.iter().map(|v| v + 0.1).collect()).unwrap();
        assert!((rmse(&a, &b, None).unwrap() - 0.1).abs() < 1e-12);
        // Only pixel 3 differs; restricting to it gives its own RMS.
        let mut c = a.clone();
        c.data[9] += 3.0;
        assert!((rmse(&a, &c, Some(&[false, false, false, true])).unwrap() - 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(rmse(&a, &c, Some(&[true, true, true, false])).unwrap(), 0.0);
    }

    fn bits(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(prop_oneof![Just(0.0), Just(1.0)], n)
    }

    fn transpose(v: &[f64], w: usize, h: usize) -> Vec<f64> {
        (0..w * h).map(|i| v[(i % h) * w + i / h]).collect()
    }

    proptest! {
        #[test]
        fn metrics_invariant_under_transpose(p in bits(12), g in bits(12)) {
            let (pm, gm) = (ShadowMask::new(4, 3, p.clone(), MaskKind::Hard).unwrap(), ShadowMask::new(4, 3, g.clone(), MaskKind::Hard).unwrap());
            let pt = ShadowMask::new(3, 4, transpose(&p, 4, 3), MaskKind::Hard).unwrap();
            let gt = ShadowMask::new(3, 4, transpose(&g, 4, 3), MaskKind::Hard).unwrap();
            let a = confusion(&pm, &gm, 0.5).unwrap();
            let b = confusion(&pt, &gt, 0.5).unwrap();
            prop_assert_eq!(a, b);
            prop_assert_eq!(a.total(), 12);
        }

        #[test]
        fn ber_is_class_symmetric(p in bits(16), g in bits(16)) {
            let flip = |v: &[f64]| ShadowMask::new(4, 4, v.iter().map(|x| 1.0 - x).collect(), MaskKind::Hard).unwrap();
            let pm = ShadowMask::new(4, 4, p.clone(), MaskKind::Hard).unwrap();
            let gm = ShadowMask::new(4, 4, g.clone(), MaskKind::Hard).unwrap();
            if let Ok(b) = ber(&confusion(&pm, &gm, 0.5).unwrap()) {
                let f = ber(&confusion(&flip(&p), &flip(&g), 0.5).unwrap()).unwrap();
                prop_assert!((b - f).abs() < 1e-12);
            }
        }

        #[test]
        fn rmse_triangle_bound(
            a in proptest::collection::vec(-1.0f64..1.0, 27),
            b in proptest::collection::vec(-1.0f64..1.0, 27),
            c in proptest::collection::vec(-1.0f64..1.0, 27),
            r in proptest::collection::vec(any::<bool>(), 9),
        ) {
            prop_assume!(r.iter().any(|x| *x));
            let (a, b, c) = (Image::new(3, 3, a).unwrap(), Image::new(3, 3, b).unwrap(), Image::new(3, 3, c).unwrap());
            let ac = rmse(&a, &c, Some(&r)).unwrap();
            prop_assert!(ac <= rmse(&a, &b, Some(&r)).unwrap() + rmse(&b, &c, Some(&r)).unwrap() + 1e-12);
        }
    }
}
