//! Rows of a candidate region and their horizontal coverage features.
//!
//! A row is framed by a common x-extent shared by every row of its region and
//! cut into `n` equal partitions of roughly one character width. The row's
//! content is grouped into horizontal regions (runs of sub-elements separated
//! by gaps of at most `th_w`), and each partition records how much of it the
//! content covers.

use std::ops::{Add, AddAssign};

use crate::error::{Error, Result};
use crate::geometry::{part_x_span, BBox, XSpan};

/// A primitive unit of content, typically one glyph's connected component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SubElement {
    pub bbox: BBox,
}

impl SubElement {
    pub fn new(bbox: BBox) -> Self {
        Self { bbox }
    }
}

impl From<BBox> for SubElement {
    fn from(bbox: BBox) -> Self {
        Self { bbox }
    }
}

/// Maximal run of sub-elements whose horizontal gaps do not exceed the
/// threshold it was built with.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizontalRegion {
    members: Vec<SubElement>,
    bbox: BBox,
}

impl HorizontalRegion {
    fn from_members(members: Vec<SubElement>) -> Self {
        let bbox = BBox::union_all(members.iter().map(|m| &m.bbox))
            .expect("horizontal region is never empty");
        Self { members, bbox }
    }

    pub fn members(&self) -> &[SubElement] {
        &self.members
    }

    pub fn bbox(&self) -> BBox {
        self.bbox
    }
}

/// Groups sub-elements into horizontal regions.
///
/// Sub-elements are ordered by their left edge. A sub-element whose left edge
/// lies more than `th_w` pixels to the right of the current region's right
/// edge starts a new region; anything closer (including overlaps) joins it.
/// With `th_w = 0` every strictly positive gap splits.
pub fn split_horizontal_regions(subelements: &[SubElement], th_w: f64) -> Vec<HorizontalRegion> {
    debug_assert!(th_w >= 0.0, "negative gap threshold");
    let mut sorted = subelements.to_vec();
    sorted.sort_by_key(|s| (s.bbox.x0(), s.bbox.y0(), s.bbox.x1(), s.bbox.y1()));

    let mut regions = Vec::new();
    let mut current: Vec<SubElement> = Vec::new();
    let mut right_edge = 0u32;
    for sub in sorted {
        if !current.is_empty() {
            let gap = i64::from(sub.bbox.x0()) - i64::from(right_edge);
            if gap as f64 > th_w {
                regions.push(HorizontalRegion::from_members(std::mem::take(&mut current)));
            }
        }
        right_edge = if current.is_empty() {
            sub.bbox.x1()
        } else {
            right_edge.max(sub.bbox.x1())
        };
        current.push(sub);
    }
    if !current.is_empty() {
        regions.push(HorizontalRegion::from_members(current));
    }
    regions
}

/// Number of partitions of a frame of length `l` for a primitive length
/// `l_prime`: `l / l_prime` rounded half-up, at least 1.
pub fn partition_count(l: f64, l_prime: f64) -> Result<usize> {
    if l_prime.is_nan() || l_prime <= 0.0 || !l_prime.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "primitive length must be positive, got {l_prime}"
        )));
    }
    if l.is_nan() || l <= 0.0 || !l.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "frame length must be positive, got {l}"
        )));
    }
    let n = (l / l_prime + 0.5).floor();
    Ok((n as usize).max(1))
}

/// Coverage feature of a row, one entry per partition.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for FeatureVector {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

impl AddAssign<&FeatureVector> for FeatureVector {
    fn add_assign(&mut self, rhs: &FeatureVector) {
        assert_eq!(self.len(), rhs.len(), "feature lengths differ");
        for (a, b) in self.0.iter_mut().zip(&rhs.0) {
            *a += b;
        }
    }
}

impl Add<&FeatureVector> for FeatureVector {
    type Output = FeatureVector;

    fn add(mut self, rhs: &FeatureVector) -> FeatureVector {
        self += rhs;
        self
    }
}

/// One row of a candidate region.
#[derive(Debug, Clone, PartialEq)]
pub struct RowElement {
    frame: BBox,
    regions: Vec<HorizontalRegion>,
    n: usize,
    l_prime: f64,
}

impl RowElement {
    /// Builds a row from its content. Every sub-element must lie inside the
    /// x-extent of `frame`.
    pub fn new(frame: BBox, subelements: &[SubElement], l_prime: f64, th_w: f64) -> Result<Self> {
        if th_w.is_nan() || th_w < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "gap threshold must be non-negative, got {th_w}"
            )));
        }
        let n = partition_count(f64::from(frame.width()), l_prime)?;
        if let Some(out) = subelements
            .iter()
            .find(|s| s.bbox.x0() < frame.x0() || s.bbox.x1() > frame.x1())
        {
            return Err(Error::InvalidInput(format!(
                "sub-element {:?} lies outside the row frame {:?}",
                out.bbox.to_array(),
                frame.to_array()
            )));
        }
        Ok(Self {
            frame,
            regions: split_horizontal_regions(subelements, th_w),
            n,
            l_prime,
        })
    }

    pub fn frame(&self) -> BBox {
        self.frame
    }

    pub fn regions(&self) -> &[HorizontalRegion] {
        &self.regions
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn l_prime(&self) -> f64 {
        self.l_prime
    }

    /// Tight cover of the row's content, if it has any.
    pub fn content_bbox(&self) -> Option<BBox> {
        BBox::union_all(self.regions.iter().map(|r| &r.bbox))
    }

    /// The `i`-th of `n` equal partitions of the frame, in real coordinates.
    pub fn partition(&self, i: usize) -> XSpan {
        let x0 = f64::from(self.frame.x0());
        let l = f64::from(self.frame.width());
        let n = self.n as f64;
        XSpan::new(x0 + l * i as f64 / n, x0 + l * (i + 1) as f64 / n)
    }

    pub fn feature(&self) -> FeatureVector {
        row_feature(self)
    }
}

/// Per-partition coverage of one horizontal region. Each entry is the sum of
/// `part_x(e_i, c)` over the gap-free pieces `c` of the region.
pub fn column_feature(row: &RowElement, col: &HorizontalRegion) -> FeatureVector {
    let n = row.n;
    let mut values = vec![0.0; n];
    let x0 = f64::from(row.frame.x0());
    let cell = f64::from(row.frame.width()) / n as f64;

    for piece in split_horizontal_regions(&col.members, 0.0) {
        let span = XSpan::from(&piece.bbox);
        // candidate partitions, widened by one on each side against rounding
        let first = ((span.start - x0) / cell).floor() as i64 - 1;
        let last = ((span.end - x0) / cell).ceil() as i64 + 1;
        let first = first.clamp(0, n as i64 - 1) as usize;
        let last = last.clamp(0, n as i64 - 1) as usize;
        for (i, v) in values.iter_mut().enumerate().take(last + 1).skip(first) {
            *v += part_x_span(row.partition(i), span);
        }
    }
    FeatureVector(values)
}

/// Element-wise sum of the column features of every region in the row.
pub fn row_feature(row: &RowElement) -> FeatureVector {
    row.regions
        .iter()
        .fold(FeatureVector::zeros(row.n), |acc, col| {
            acc + &column_feature(row, col)
        })
}
