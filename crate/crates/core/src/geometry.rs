//! Axis-aligned box algebra.
//!
//! Boxes are stored as top-left corner plus extent `(x, y, w, h)`, the layout
//! used by MOTChallenge files. Corner form is computed on demand.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("box has non-finite component ({x}, {y}, {w}, {h})")]
    NonFinite { x: f64, y: f64, w: f64, h: f64 },
    #[error("box extent must be positive, got w={w} h={h}")]
    NonPositiveExtent { w: f64, h: f64 },
    #[error("buffer scale {0} outside [0, 2]")]
    BufferOutOfRange(f64),
}

/// Axis-aligned bounding box in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub(crate) x: f64,
    pub(crate) y: f64,
    pub(crate) w: f64,
    pub(crate) h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self, GeometryError> {
        if !(x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite()) {
            return Err(GeometryError::NonFinite { x, y, w, h });
        }
        if w <= 0.0 || h <= 0.0 {
            return Err(GeometryError::NonPositiveExtent { w, h });
        }
        Ok(Self { x, y, w, h })
    }

    /// Builds a box from corner coordinates `(x1, y1, x2, y2)`.
    pub fn from_corners(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self, GeometryError> {
        Self::new(x1, y1, x2 - x1, y2 - y1)
    }

    #[inline]
    pub fn x(&self) -> f64 {
        self.x
    }

    #[inline]
    pub fn y(&self) -> f64 {
        self.y
    }

    #[inline]
    pub fn w(&self) -> f64 {
        self.w
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    #[inline]
    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    #[inline]
    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Same box shifted by `(dx, dy)`.
    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            x: self.x + dx,
            y: self.y + dy,
            ..*self
        }
    }

    /// Returns `(x, y, w, h)`.
    pub fn to_xywh(&self) -> [f64; 4] {
        [self.x, self.y, self.w, self.h]
    }
}

/// Proportional expansion factor applied to a box's width and height on each side.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct BufferScale(f64);

impl BufferScale {
    pub const MAX: f64 = 2.0;
    pub const ZERO: BufferScale = BufferScale(0.0);

    pub fn new(b: f64) -> Result<Self, GeometryError> {
        if !b.is_finite() || !(0.0..=Self::MAX).contains(&b) {
            return Err(GeometryError::BufferOutOfRange(b));
        }
        Ok(Self(b))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl std::fmt::Display for BufferScale {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Expands `bbox` by `b·w` horizontally and `b·h` vertically on every side.
///
/// The center and aspect ratio are unchanged; both sides scale by `1 + 2b`.
pub fn buffer_box(bbox: &BoundingBox, b: BufferScale) -> BoundingBox {
    let b = b.value();
    if b == 0.0 {
        return *bbox;
    }
    let dw = b * bbox.w;
    let dh = b * bbox.h;
    BoundingBox {
        x: bbox.x - dw,
        y: bbox.y - dh,
        w: bbox.w + 2.0 * dw,
        h: bbox.h + 2.0 * dh,
    }
}

fn intersection_area(a: &BoundingBox, c: &BoundingBox) -> f64 {
    let iw = a.right().min(c.right()) - a.x.max(c.x);
    let ih = a.bottom().min(c.bottom()) - a.y.max(c.y);
    if iw <= 0.0 || ih <= 0.0 {
        0.0
    } else {
        iw * ih
    }
}

/// Smallest box enclosing both inputs, as `(x1, y1, x2, y2)`.
fn hull(a: &BoundingBox, c: &BoundingBox) -> (f64, f64, f64, f64) {
    (
        a.x.min(c.x),
        a.y.min(c.y),
        a.right().max(c.right()),
        a.bottom().max(c.bottom()),
    )
}

/// Intersection over union.
pub fn iou(a: &BoundingBox, c: &BoundingBox) -> f64 {
    let inter = intersection_area(a, c);
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.area() + c.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// IoU of the two boxes after both are buffered by `b`.
pub fn biou(a: &BoundingBox, c: &BoundingBox, b: BufferScale) -> f64 {
    iou(&buffer_box(a, b), &buffer_box(c, b))
}

/// Generalized IoU: `iou - |hull \ union| / |hull|`.
pub fn giou(a: &BoundingBox, c: &BoundingBox) -> f64 {
    let inter = intersection_area(a, c);
    let union = a.area() + c.area() - inter;
    let (x1, y1, x2, y2) = hull(a, c);
    let hull_area = (x2 - x1) * (y2 - y1);
    let value = inter / union - (hull_area - union) / hull_area;
    value.clamp(-1.0, 1.0)
}

/// Distance IoU: `iou - d²/diag²` with `d` the center distance and `diag`
/// the diagonal of the enclosing box.
pub fn diou(a: &BoundingBox, c: &BoundingBox) -> f64 {
    let (ax, ay) = a.center();
    let (cx, cy) = c.center();
    let dist2 = (ax - cx).powi(2) + (ay - cy).powi(2);
    let (x1, y1, x2, y2) = hull(a, c);
    let diag2 = (x2 - x1).powi(2) + (y2 - y1).powi(2);
    (iou(a, c) - dist2 / diag2).clamp(-1.0, 1.0)
}

/// Box similarity used for association.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Similarity {
    Iou,
    Giou,
    Diou,
    /// IoU of buffered boxes; the buffer comes from the matching round.
    Buffered,
}

impl Similarity {
    /// Score in `[0, 1]`. GIoU and DIoU are mapped affinely with `(1 + g) / 2`.
    pub fn score(self, a: &BoundingBox, c: &BoundingBox, b: BufferScale) -> f64 {
        match self {
            Similarity::Iou => iou(a, c),
            Similarity::Giou => (1.0 + giou(a, c)) / 2.0,
            Similarity::Diou => (1.0 + diou(a, c)) / 2.0,
            Similarity::Buffered => biou(a, c, b),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Similarity::Iou => "IoU",
            Similarity::Giou => "GIoU",
            Similarity::Diou => "DIoU",
            Similarity::Buffered => "BIoU",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bb(x: f64, y: f64, w: f64, h: f64) -> BoundingBox {
        BoundingBox::new(x, y, w, h).unwrap()
    }

    fn b(v: f64) -> BufferScale {
        BufferScale::new(v).unwrap()
    }

    #[test]
    fn rejects_invalid_boxes() {
        assert!(BoundingBox::new(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(BoundingBox::new(0.0, 0.0, 1.0, -1.0).is_err());
        assert!(BoundingBox::new(f64::NAN, 0.0, 1.0, 1.0).is_err());
        assert!(BoundingBox::new(0.0, f64::INFINITY, 1.0, 1.0).is_err());
    }

    #[test]
    fn rejects_invalid_buffer() {
        assert!(BufferScale::new(-0.1).is_err());
        assert!(BufferScale::new(2.01).is_err());
        assert!(BufferScale::new(f64::NAN).is_err());
        assert!(BufferScale::new(2.0).is_ok());
    }

    #[test]
    fn buffer_box_examples() {
        assert_eq!(buffer_box(&bb(0.0, 0.0, 10.0, 10.0), b(0.0)), bb(0.0, 0.0, 10.0, 10.0));
        assert_eq!(
            buffer_box(&bb(0.0, 0.0, 10.0, 10.0), b(0.5)),
            bb(-5.0, -5.0, 20.0, 20.0)
        );
        let out = buffer_box(&bb(3.0, 7.0, 4.0, 2.0), b(0.3));
        let expected = [1.8, 6.4, 6.4, 3.2];
        for (got, want) in out.to_xywh().iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn iou_examples() {
        let a = bb(0.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &bb(100.0, 100.0, 10.0, 10.0)), 0.0);
        assert!((iou(&a, &bb(5.0, 0.0, 10.0, 10.0)) - 1.0 / 3.0).abs() < 1e-15);
        // touching edges share no area
        assert_eq!(iou(&a, &bb(10.0, 0.0, 10.0, 10.0)), 0.0);
    }

    #[test]
    fn biou_bridges_gap() {
        let a = bb(0.0, 0.0, 10.0, 10.0);
        let c = bb(12.0, 0.0, 10.0, 10.0);
        assert_eq!(biou(&a, &c, b(0.0)), 0.0);
        // buffered: [-3, 13] and [9, 25] on x, overlap 4 x 16
        let got = biou(&a, &c, b(0.3));
        let inter = 4.0 * 16.0;
        let want = inter / (2.0 * 256.0 - inter);
        assert!((got - want).abs() < 1e-12);
        assert!(got > 0.0);
        assert_eq!(biou(&a, &a, b(1.7)), 1.0);
    }

    #[test]
    fn giou_examples() {
        let a = bb(0.0, 0.0, 10.0, 10.0);
        assert_eq!(giou(&a, &a), 1.0);
        assert!((giou(&a, &bb(5.0, 0.0, 10.0, 10.0)) - 1.0 / 3.0).abs() < 1e-15);
        let far = giou(&a, &bb(1000.0, 1000.0, 10.0, 10.0));
        assert!(far < -0.99);
    }

    #[test]
    fn diou_examples() {
        let a = bb(0.0, 0.0, 10.0, 10.0);
        assert_eq!(diou(&a, &a), 1.0);
        assert!((diou(&a, &bb(10.0, 0.0, 10.0, 10.0)) + 0.2).abs() < 1e-15);
        let outer = bb(-5.0, -5.0, 20.0, 20.0);
        assert_eq!(diou(&a, &outer), iou(&a, &outer));
    }

    #[test]
    fn mapped_similarities_in_unit_range() {
        let a = bb(0.0, 0.0, 10.0, 10.0);
        let c = bb(40.0, 3.0, 7.0, 12.0);
        for s in [Similarity::Iou, Similarity::Giou, Similarity::Diou, Similarity::Buffered] {
            let v = s.score(&a, &c, b(0.4));
            assert!((0.0..=1.0).contains(&v), "{s:?} {v}");
        }
    }

    fn arb_box() -> impl Strategy<Value = BoundingBox> {
        (-500.0..500.0f64, -500.0..500.0f64, 0.5..200.0f64, 0.5..200.0f64)
            .prop_map(|(x, y, w, h)| bb(x, y, w, h))
    }

    proptest! {
        #[test]
        fn buffering_preserves_center_and_aspect(a in arb_box(), s in 0.0..=2.0f64) {
            let out = buffer_box(&a, b(s));
            let (cx, cy) = a.center();
            let (ox, oy) = out.center();
            prop_assert!((cx - ox).abs() <= 1e-12 * (1.0 + cx.abs()));
            prop_assert!((cy - oy).abs() <= 1e-12 * (1.0 + cy.abs()));
            prop_assert!((out.w() / out.h() - a.w() / a.h()).abs() <= 1e-12 * (a.w() / a.h()));
        }

        #[test]
        fn symmetric_and_in_range(a in arb_box(), c in arb_box(), s in 0.0..=2.0f64) {
            prop_assert_eq!(iou(&a, &c), iou(&c, &a));
            prop_assert_eq!(biou(&a, &c, b(s)), biou(&c, &a, b(s)));
            prop_assert_eq!(giou(&a, &c), giou(&c, &a));
            prop_assert_eq!(diou(&a, &c), diou(&c, &a));
            prop_assert!((0.0..=1.0).contains(&iou(&a, &c)));
            prop_assert!((0.0..=1.0).contains(&biou(&a, &c, b(s))));
            prop_assert!((-1.0..=1.0).contains(&giou(&a, &c)));
            prop_assert!((-1.0..=1.0).contains(&diou(&a, &c)));
        }

        #[test]
        fn zero_buffer_is_plain_iou(a in arb_box(), c in arb_box()) {
            prop_assert_eq!(biou(&a, &c, BufferScale::ZERO).to_bits(), iou(&a, &c).to_bits());
        }
    }
}
