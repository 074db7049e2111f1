//! Rectangle primitives on the pixel grid.
//!
//! A [`BBox`] covers the half-open pixel ranges `tl.x..br.x` and `tl.y..br.y`,
//! so its width is `br.x - tl.x` and a box produced from a pixel mask has
//! `br = max + 1`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Point {
    pub x: u32,
    pub y: u32,
}

impl Point {
    pub const fn new(x: u32, y: u32) -> Self {
        Self { x, y }
    }
}

/// Axis-aligned rectangle with strictly positive width and height.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BBox {
    tl: Point,
    br: Point,
}

impl BBox {
    pub fn new(x0: u32, y0: u32, x1: u32, y1: u32) -> Result<Self> {
        if x0 >= x1 || y0 >= y1 {
            return Err(Error::InvalidBox([x0, y0, x1, y1]));
        }
        Ok(Self {
            tl: Point::new(x0, y0),
            br: Point::new(x1, y1),
        })
    }

    /// Box covering a `width x height` block of pixels starting at `(x, y)`.
    pub fn from_xywh(x: u32, y: u32, width: u32, height: u32) -> Result<Self> {
        Self::new(x, y, x.saturating_add(width), y.saturating_add(height))
    }

    pub fn tl(&self) -> Point {
        self.tl
    }

    pub fn br(&self) -> Point {
        self.br
    }

    pub fn x0(&self) -> u32 {
        self.tl.x
    }

    pub fn y0(&self) -> u32 {
        self.tl.y
    }

    pub fn x1(&self) -> u32 {
        self.br.x
    }

    pub fn y1(&self) -> u32 {
        self.br.y
    }

    pub fn width(&self) -> u32 {
        self.br.x - self.tl.x
    }

    pub fn height(&self) -> u32 {
        self.br.y - self.tl.y
    }

    pub fn area(&self) -> u64 {
        u64::from(self.width()) * u64::from(self.height())
    }

    pub fn to_array(&self) -> [u32; 4] {
        [self.tl.x, self.tl.y, self.br.x, self.br.y]
    }

    /// Smallest box containing both.
    pub fn union(&self, other: &BBox) -> BBox {
        BBox {
            tl: Point::new(self.tl.x.min(other.tl.x), self.tl.y.min(other.tl.y)),
            br: Point::new(self.br.x.max(other.br.x), self.br.y.max(other.br.y)),
        }
    }

    /// Tight cover of a non-empty sequence of boxes.
    pub fn union_all<'a, I>(boxes: I) -> Option<BBox>
    where
        I: IntoIterator<Item = &'a BBox>,
    {
        boxes.into_iter().fold(None, |acc, b| match acc {
            None => Some(*b),
            Some(u) => Some(u.union(b)),
        })
    }

    pub fn contains(&self, other: &BBox) -> bool {
        self.tl.x <= other.tl.x
            && self.tl.y <= other.tl.y
            && self.br.x >= other.br.x
            && self.br.y >= other.br.y
    }

    /// Overlap of the two y-extents in pixels.
    pub fn y_overlap(&self, other: &BBox) -> u32 {
        let top = self.tl.y.max(other.tl.y);
        let bottom = self.br.y.min(other.br.y);
        bottom.saturating_sub(top)
    }

    pub fn translate(&self, dx: i64, dy: i64) -> Result<BBox> {
        let shift = |v: u32, d: i64| -> Result<u32> {
            u32::try_from(i64::from(v) + d).map_err(|_| Error::InvalidBox(self.to_array()))
        };
        BBox::new(
            shift(self.tl.x, dx)?,
            shift(self.tl.y, dy)?,
            shift(self.br.x, dx)?,
            shift(self.br.y, dy)?,
        )
    }
}

impl Serialize for BBox {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_array().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BBox {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let [x0, y0, x1, y1] = <[u32; 4]>::deserialize(deserializer)?;
        BBox::new(x0, y0, x1, y1).map_err(serde::de::Error::custom)
    }
}

/// Closed real interval on the x axis.
///
/// Partition cells of a row frame have fractional boundaries, so coverage is
/// computed on real spans rather than pixel boxes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XSpan {
    pub start: f64,
    pub end: f64,
}

impl XSpan {
    pub fn new(start: f64, end: f64) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

impl From<&BBox> for XSpan {
    fn from(b: &BBox) -> Self {
        XSpan::new(f64::from(b.x0()), f64::from(b.x1()))
    }
}

/// Width of a box, `BR.x - TL.x`.
pub fn len(b: &BBox) -> u32 {
    b.width()
}

/// Fraction of the x-extent of `u` that is covered by the x-extent of `v`.
/// Only x matters; a shared edge or a gap gives 0.
pub fn part_x(u: &BBox, v: &BBox) -> f64 {
    part_x_span(XSpan::from(u), XSpan::from(v))
}

pub fn part_x_span(u: XSpan, v: XSpan) -> f64 {
    let m = u.end.min(v.end);
    let n = u.start.max(v.start);
    let frac = (m - n) / u.len();
    if frac <= 0.0 {
        0.0
    } else {
        frac
    }
}

pub fn intersection_area(a: &BBox, b: &BBox) -> u64 {
    let w = a.x1().min(b.x1()).saturating_sub(a.x0().max(b.x0()));
    let h = a.y1().min(b.y1()).saturating_sub(a.y0().max(b.y0()));
    u64::from(w) * u64::from(h)
}

/// Intersection over union of two boxes.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = intersection_area(a, b);
    // both areas are positive, so the union never vanishes
    let union = a.area() + b.area() - inter;
    inter as f64 / union as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(x0: u32, y0: u32, x1: u32, y1: u32) -> BBox {
        BBox::new(x0, y0, x1, y1).unwrap()
    }

    #[test]
    fn len_examples() {
        assert_eq!(len(&bx(0, 0, 100, 20)), 100);
        assert_eq!(len(&bx(40, 5, 61, 15)), 21);
        assert_eq!(len(&bx(7, 0, 8, 1)), 1);
    }

    #[test]
    fn degenerate_boxes_rejected() {
        assert!(BBox::new(5, 0, 5, 10).is_err());
        assert!(BBox::new(0, 3, 10, 3).is_err());
        assert!(BBox::new(9, 0, 5, 10).is_err());
    }

    #[test]
    fn part_x_examples() {
        let u = bx(0, 0, 100, 10);
        assert_eq!(part_x(&u, &bx(0, 50, 100, 60)), 1.0);
        assert_eq!(part_x(&u, &bx(200, 0, 300, 10)), 0.0);
        assert_eq!(part_x(&u, &bx(50, 0, 150, 10)), 0.5);
    }

    #[test]
    fn part_x_shared_edge_is_zero() {
        assert_eq!(part_x(&bx(0, 0, 100, 10), &bx(100, 0, 120, 10)), 0.0);
    }

    #[test]
    fn part_x_is_asymmetric() {
        let u = bx(0, 0, 100, 10);
        let v = bx(0, 0, 50, 10);
        assert_eq!(part_x(&u, &v), 0.5);
        assert_eq!(part_x(&v, &u), 1.0);
    }

    #[test]
    fn intersection_examples() {
        let a = bx(0, 0, 100, 100);
        assert_eq!(intersection_area(&a, &a), 10_000);
        assert_eq!(intersection_area(&a, &bx(200, 200, 300, 300)), 0);
        assert_eq!(intersection_area(&a, &bx(50, 0, 150, 100)), 5_000);
        // touching only along an edge
        assert_eq!(intersection_area(&a, &bx(100, 0, 150, 100)), 0);
    }

    #[test]
    fn iou_examples() {
        let a = bx(0, 0, 100, 100);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &bx(300, 0, 400, 100)), 0.0);
        assert!((iou(&a, &bx(50, 0, 150, 100)) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn json_is_corner_array() {
        let b = bx(1, 2, 30, 40);
        assert_eq!(serde_json::to_string(&b).unwrap(), "[1,2,30,40]");
        let back: BBox = serde_json::from_str("[1,2,30,40]").unwrap();
        assert_eq!(back, b);
        assert!(serde_json::from_str::<BBox>("[10,2,3,40]").is_err());
    }

    #[test]
    fn union_and_contains() {
        let a = bx(0, 0, 10, 10);
        let b = bx(20, 5, 30, 40);
        let u = a.union(&b);
        assert_eq!(u.to_array(), [0, 0, 30, 40]);
        assert!(u.contains(&a) && u.contains(&b));
        assert!(!a.contains(&b));
        assert_eq!(BBox::union_all([a, b].iter()), Some(u));
        assert_eq!(BBox::union_all(std::iter::empty()), None);
    }
}
