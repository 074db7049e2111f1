//! Raster page analysis: binarization, connected components, text lines and
//! candidate regions.

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::row_model::SubElement;

/// Components whose long side exceeds this multiple of the short side are
/// treated as ruling lines.
pub const RULING_ASPECT: f64 = 20.0;
/// Components taller than this multiple of the median component height are
/// treated as graphics.
pub const GRAPHIC_HEIGHT_FACTOR: f64 = 3.0;

/// 8-bit luminance raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    samples: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32, samples: Vec<u8>) -> Result<Self> {
        if samples.len() as u64 != u64::from(width) * u64::from(height) {
            return Err(Error::InvalidInput(format!(
                "{} samples for a {width}x{height} image",
                samples.len()
            )));
        }
        Ok(Self {
            width,
            height,
            samples,
        })
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        Self {
            width,
            height,
            samples: vec![value; width as usize * height as usize],
        }
    }

    /// Luminance from interleaved 8-bit RGB with Rec. 601 weights.
    pub fn from_rgb(width: u32, height: u32, rgb: &[u8]) -> Result<Self> {
        if rgb.len() as u64 != 3 * u64::from(width) * u64::from(height) {
            return Err(Error::InvalidInput(format!(
                "{} RGB bytes for a {width}x{height} image",
                rgb.len()
            )));
        }
        let samples = rgb
            .chunks_exact(3)
            .map(|p| rec601_luma(p[0], p[1], p[2]))
            .collect();
        Self::new(width, height, samples)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [u8] {
        &mut self.samples
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.samples[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, v: u8) {
        self.samples[y as usize * self.width as usize + x as usize] = v;
    }

    pub fn fill_rect(&mut self, b: &BBox, v: u8) {
        let w = self.width as usize;
        for y in b.y0()..b.y1().min(self.height) {
            let row = y as usize * w;
            let x1 = b.x1().min(self.width) as usize;
            self.samples[row + b.x0() as usize..row + x1].fill(v);
        }
    }
}

pub fn rec601_luma(r: u8, g: u8, b: u8) -> u8 {
    let y = 0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b);
    y.round().clamp(0.0, 255.0) as u8
}

/// Ink mask, row-major; `true` is ink.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    width: u32,
    height: u32,
    mask: Vec<bool>,
}

impl BinaryImage {
    pub fn new(width: u32, height: u32, mask: Vec<bool>) -> Result<Self> {
        if mask.len() as u64 != u64::from(width) * u64::from(height) {
            return Err(Error::InvalidInput(format!(
                "{} mask bits for a {width}x{height} image",
                mask.len()
            )));
        }
        Ok(Self {
            width,
            height,
            mask,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn is_ink(&self, x: u32, y: u32) -> bool {
        self.mask[y as usize * self.width as usize + x as usize]
    }

    pub fn ink_count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }
}

/// Otsu threshold of a luminance histogram. Levels `<= t` form the dark
/// class. `None` when the histogram holds fewer than two distinct levels.
pub fn otsu_threshold(hist: &[u64; 256]) -> Option<u8> {
    let levels = hist.iter().filter(|&&h| h > 0).count();
    if levels < 2 {
        return None;
    }
    let total: f64 = hist.iter().map(|&h| h as f64).sum();
    let sum_total: f64 = hist
        .iter()
        .enumerate()
        .map(|(i, &h)| i as f64 * h as f64)
        .sum();

    let mut w_b = 0.0;
    let mut sum_b = 0.0;
    let mut best = (f64::NEG_INFINITY, 0u8);
    for (t, &h) in hist.iter().enumerate() {
        w_b += h as f64;
        sum_b += t as f64 * h as f64;
        let w_f = total - w_b;
        if w_b == 0.0 {
            continue;
        }
        if w_f == 0.0 {
            break;
        }
        let m_b = sum_b / w_b;
        let m_f = (sum_total - sum_b) / w_f;
        let between = w_b * w_f * (m_b - m_f) * (m_b - m_f);
        if between > best.0 {
            best = (between, t as u8);
        }
    }
    Some(best.1)
}

/// Global Otsu binarization. A single-level image has no ink.
pub fn binarize(img: &GrayImage) -> Result<BinaryImage> {
    if img.width == 0 || img.height == 0 {
        return Err(Error::InvalidInput(format!(
            "zero-sized image {}x{}",
            img.width, img.height
        )));
    }
    let mut hist = [0u64; 256];
    for &v in &img.samples {
        hist[v as usize] += 1;
    }
    let mask = match otsu_threshold(&hist) {
        Some(t) => img.samples.iter().map(|&v| v <= t).collect(),
        None => vec![false; img.samples.len()],
    };
    BinaryImage::new(img.width, img.height, mask)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComponentStats {
    pub bbox: BBox,
    /// ink pixel count
    pub area: u64,
}

/// 8-connected labeling of an ink mask.
#[derive(Debug, Clone)]
pub struct Labeling {
    width: u32,
    /// 0 is background; component `k` is stored as `k + 1`
    labels: Vec<u32>,
    components: Vec<ComponentStats>,
}

impl Labeling {
    pub fn components(&self) -> &[ComponentStats] {
        &self.components
    }

    /// Component index of the pixel, `None` for background.
    pub fn label(&self, x: u32, y: u32) -> Option<usize> {
        match self.labels[y as usize * self.width as usize + x as usize] {
            0 => None,
            l => Some(l as usize - 1),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Run {
    y: u32,
    x0: u32,
    x1: u32,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Labels ink pixels by 8-connectivity using run-length union-find.
/// Components are ordered by the top-left corner of their box (y, then x).
pub fn label_components(bin: &BinaryImage) -> Labeling {
    let (w, h) = (bin.width, bin.height);
    let mut runs: Vec<Run> = Vec::new();
    let mut row_start = Vec::with_capacity(h as usize + 1);
    for y in 0..h {
        row_start.push(runs.len());
        let row = &bin.mask[y as usize * w as usize..(y as usize + 1) * w as usize];
        let mut x = 0usize;
        while x < row.len() {
            if row[x] {
                let start = x;
                while x < row.len() && row[x] {
                    x += 1;
                }
                runs.push(Run {
                    y,
                    x0: start as u32,
                    x1: x as u32,
                });
            } else {
                x += 1;
            }
        }
    }
    row_start.push(runs.len());

    let mut parent: Vec<usize> = (0..runs.len()).collect();
    for y in 1..h as usize {
        let (prev, cur) = (
            row_start[y - 1]..row_start[y],
            row_start[y]..row_start[y + 1],
        );
        let mut p = prev.start;
        for c in cur {
            // skip previous-row runs that end left of the 8-neighbourhood
            while p < prev.end && runs[p].x1 < runs[c].x0 {
                p += 1;
            }
            let mut q = p;
            while q < prev.end && runs[q].x0 <= runs[c].x1 {
                let (a, b) = (find(&mut parent, q), find(&mut parent, c));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
                q += 1;
            }
        }
    }

    let mut root_slot = vec![usize::MAX; runs.len()];
    let mut stats: Vec<(u32, u32, u32, u32, u64)> = Vec::new();
    let mut run_comp = vec![0usize; runs.len()];
    for i in 0..runs.len() {
        let r = find(&mut parent, i);
        if root_slot[r] == usize::MAX {
            root_slot[r] = stats.len();
            stats.push((u32::MAX, u32::MAX, 0, 0, 0));
        }
        let k = root_slot[r];
        run_comp[i] = k;
        let run = runs[i];
        let s = &mut stats[k];
        s.0 = s.0.min(run.x0);
        s.1 = s.1.min(run.y);
        s.2 = s.2.max(run.x1);
        s.3 = s.3.max(run.y + 1);
        s.4 += u64::from(run.x1 - run.x0);
    }

    let mut order: Vec<usize> = (0..stats.len()).collect();
    order.sort_by_key(|&k| (stats[k].1, stats[k].0, stats[k].3, stats[k].2));
    let mut rank = vec![0usize; stats.len()];
    for (pos, &k) in order.iter().enumerate() {
        rank[k] = pos;
    }
    let components = order
        .iter()
        .map(|&k| {
            let (x0, y0, x1, y1, area) = stats[k];
            ComponentStats {
                bbox: BBox::new(x0, y0, x1, y1).expect("runs are non-empty"),
                area,
            }
        })
        .collect();

    let mut labels = vec![0u32; bin.mask.len()];
    for (i, run) in runs.iter().enumerate() {
        let base = run.y as usize * w as usize;
        labels[base + run.x0 as usize..base + run.x1 as usize].fill(rank[run_comp[i]] as u32 + 1);
    }
    Labeling {
        width: w,
        labels,
        components,
    }
}

/// Bounding boxes of the 8-connected ink components with at least
/// `noise_min_area` pixels, ordered by top edge then left edge.
pub fn connected_components(bin: &BinaryImage, noise_min_area: u64) -> Vec<SubElement> {
    label_components(bin)
        .components
        .iter()
        .filter(|c| c.area >= noise_min_area)
        .map(|c| SubElement::new(c.bbox))
        .collect()
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

fn sorted_f64(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Primitive length estimate: median component width after dropping widths
/// above three times the overall median.
pub fn estimate_char_width(components: &[SubElement]) -> Result<f64> {
    if components.is_empty() {
        return Err(Error::NoContent(
            "no components to estimate character width",
        ));
    }
    let widths = sorted_f64(components.iter().map(|c| f64::from(c.bbox.width())));
    let cutoff = 3.0 * median(&widths);
    let kept: Vec<f64> = widths.into_iter().filter(|&w| w <= cutoff).collect();
    Ok(median(&kept))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComponentClass {
    Text,
    Ruling,
    Graphic,
}

pub fn is_ruling(b: &BBox) -> bool {
    let (w, h) = (f64::from(b.width()), f64::from(b.height()));
    w.max(h) / w.min(h) > RULING_ASPECT
}

/// Splits components into text, ruling lines and graphics (much taller than
/// the median non-ruling component).
pub fn classify_components(components: &[SubElement]) -> Vec<ComponentClass> {
    let heights = sorted_f64(
        components
            .iter()
            .filter(|c| !is_ruling(&c.bbox))
            .map(|c| f64::from(c.bbox.height())),
    );
    let limit = if heights.is_empty() {
        f64::INFINITY
    } else {
        GRAPHIC_HEIGHT_FACTOR * median(&heights)
    };
    components
        .iter()
        .map(|c| {
            if is_ruling(&c.bbox) {
                ComponentClass::Ruling
            } else if f64::from(c.bbox.height()) > limit {
                ComponentClass::Graphic
            } else {
                ComponentClass::Text
            }
        })
        .collect()
}

/// A physical text line.
#[derive(Debug, Clone, PartialEq)]
pub struct TextLine {
    pub bbox: BBox,
    /// ordered by left edge
    pub components: Vec<SubElement>,
}

pub const DEFAULT_LINE_OVERLAP: f64 = 0.4;

pub fn segment_lines(components: &[SubElement]) -> Vec<TextLine> {
    segment_lines_with(components, DEFAULT_LINE_OVERLAP)
}

/// Greedy line clustering in reading order. A component joins the open line
/// whose y-extent overlaps its own by the largest share of the smaller of the
/// two heights, provided that share reaches `min_overlap`.
pub fn segment_lines_with(components: &[SubElement], min_overlap: f64) -> Vec<TextLine> {
    let mut sorted = components.to_vec();
    sorted.sort_by_key(|c| (c.bbox.y0(), c.bbox.x0(), c.bbox.y1(), c.bbox.x1()));

    let mut lines: Vec<TextLine> = Vec::new();
    // indices into `lines` that can still overlap later components
    let mut open: Vec<usize> = Vec::new();
    for comp in sorted {
        open.retain(|&i| lines[i].bbox.y1() > comp.bbox.y0());
        let mut best: Option<(f64, usize)> = None;
        for &i in &open {
            let line = &lines[i];
            let overlap = f64::from(line.bbox.y_overlap(&comp.bbox));
            let smaller = f64::from(line.bbox.height().min(comp.bbox.height()));
            let share = overlap / smaller;
            if share >= min_overlap && best.is_none_or(|(s, _)| share > s) {
                best = Some((share, i));
            }
        }
        match best {
            Some((_, i)) => {
                let line = &mut lines[i];
                line.bbox = line.bbox.union(&comp.bbox);
                line.components.push(comp);
            }
            None => {
                open.push(lines.len());
                lines.push(TextLine {
                    bbox: comp.bbox,
                    components: vec![comp],
                });
            }
        }
    }
    for line in &mut lines {
        line.components
            .sort_by_key(|c| (c.bbox.x0(), c.bbox.y0(), c.bbox.x1(), c.bbox.y1()));
    }
    lines.sort_by_key(|l| (l.bbox.y0(), l.bbox.x0(), l.bbox.y1(), l.bbox.x1()));
    lines
}

/// A vertically cohesive block of lines proposed for similarity testing.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateRegion {
    pub bbox: BBox,
    /// ordered top to bottom
    pub lines: Vec<TextLine>,
    /// ruling lines near the block; excluded from the rows
    pub rulings: Vec<BBox>,
}

pub const DEFAULT_GAP_FACTOR: f64 = 1.8;

/// Groups consecutive lines whose vertical gap is at most `gap_factor` times
/// the median line height. Lines must be sorted by top edge.
pub fn propose_candidate_regions(lines: &[TextLine], gap_factor: f64) -> Vec<CandidateRegion> {
    if lines.is_empty() {
        return Vec::new();
    }
    let heights = sorted_f64(lines.iter().map(|l| f64::from(l.bbox.height())));
    let max_gap = gap_factor * median(&heights);

    let mut out = Vec::new();
    let mut run: Vec<TextLine> = vec![lines[0].clone()];
    for pair in lines.windows(2) {
        let gap = i64::from(pair[1].bbox.y0()) - i64::from(pair[0].bbox.y1());
        if gap as f64 > max_gap {
            out.push(candidate_from(std::mem::take(&mut run)));
        }
        run.push(pair[1].clone());
    }
    out.push(candidate_from(run));
    out
}

fn candidate_from(lines: Vec<TextLine>) -> CandidateRegion {
    let bbox = BBox::union_all(lines.iter().map(|l| &l.bbox)).expect("candidate has lines");
    CandidateRegion {
        bbox,
        lines,
        rulings: Vec::new(),
    }
}

/// Tunables of the page analysis stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PageParams {
    pub noise_min_area: u64,
    pub line_overlap: f64,
    pub gap_factor: f64,
}

impl Default for PageParams {
    fn default() -> Self {
        Self {
            noise_min_area: 4,
            line_overlap: DEFAULT_LINE_OVERLAP,
            gap_factor: DEFAULT_GAP_FACTOR,
        }
    }
}

/// Everything the detector needs to know about one page.
#[derive(Debug, Clone)]
pub struct PageLayout {
    pub width: u32,
    pub height: u32,
    /// `None` for a page without text components
    pub l_prime: Option<f64>,
    pub text_components: Vec<SubElement>,
    pub rulings: Vec<BBox>,
    pub graphics: Vec<BBox>,
    /// graphics that look like plot axes: large, sparse, and without an
    /// interior horizontal stroke spanning the frame
    pub figure_frames: Vec<BBox>,
    pub lines: Vec<TextLine>,
    pub candidates: Vec<CandidateRegion>,
}

pub fn analyze_page(img: &GrayImage, params: &PageParams) -> Result<PageLayout> {
    let bin = binarize(img)?;
    let labeling = label_components(&bin);
    let kept: Vec<(usize, SubElement)> = labeling
        .components
        .iter()
        .enumerate()
        .filter(|(_, c)| c.area >= params.noise_min_area)
        .map(|(i, c)| (i, SubElement::new(c.bbox)))
        .collect();
    let subs: Vec<SubElement> = kept.iter().map(|(_, s)| *s).collect();
    let classes = classify_components(&subs);

    let mut text = Vec::new();
    let mut rulings = Vec::new();
    let mut graphics = Vec::new();
    let mut graphic_ids = Vec::new();
    for ((id, sub), class) in kept.iter().zip(&classes) {
        match class {
            ComponentClass::Text => text.push(*sub),
            ComponentClass::Ruling => rulings.push(sub.bbox),
            ComponentClass::Graphic => {
                graphics.push(sub.bbox);
                graphic_ids.push(*id);
            }
        }
    }

    let l_prime = if text.is_empty() {
        None
    } else {
        Some(estimate_char_width(&text)?)
    };
    let text_height = {
        let hs = sorted_f64(text.iter().map(|c| f64::from(c.bbox.height())));
        if hs.is_empty() {
            0.0
        } else {
            median(&hs)
        }
    };
    let figure_frames = graphic_ids
        .iter()
        .filter(|&&id| is_figure_frame(&labeling, id, text_height))
        .map(|&id| labeling.components[id].bbox)
        .collect();

    let lines = segment_lines_with(&text, params.line_overlap);
    let mut candidates = propose_candidate_regions(&lines, params.gap_factor);
    let line_h = {
        let hs = sorted_f64(lines.iter().map(|l| f64::from(l.bbox.height())));
        if hs.is_empty() {
            0.0
        } else {
            median(&hs)
        }
    };
    for cand in &mut candidates {
        let top = f64::from(cand.bbox.y0()) - line_h;
        let bottom = f64::from(cand.bbox.y1()) + line_h;
        cand.rulings = rulings
            .iter()
            .filter(|r| {
                let cy = (f64::from(r.y0()) + f64::from(r.y1())) / 2.0;
                cy >= top && cy <= bottom && r.x0() < cand.bbox.x1() && r.x1() > cand.bbox.x0()
            })
            .copied()
            .collect();
    }

    Ok(PageLayout {
        width: img.width,
        height: img.height,
        l_prime,
        text_components: text,
        rulings,
        graphics,
        figure_frames,
        lines,
        candidates,
    })
}

/// A plot-axis frame is a graphic component spanning several text heights in
/// both directions whose interior rows never carry a stroke of its own ink
/// reaching 80% of its width. Ruled table grids and filled blocks fail the
/// stroke test.
fn is_figure_frame(labeling: &Labeling, id: usize, text_height: f64) -> bool {
    let b = labeling.components[id].bbox;
    let min_side = 4.0 * text_height.max(1.0);
    if f64::from(b.width()) < min_side || f64::from(b.height()) < min_side {
        return false;
    }
    let margin = 3.max(b.height() / 20);
    let limit = 0.8 * f64::from(b.width());
    for y in b.y0() + margin..b.y1().saturating_sub(margin) {
        let mut run = 0u32;
        for x in b.x0()..b.x1() {
            if labeling.label(x, y) == Some(id) {
                run += 1;
                if f64::from(run) >= limit {
                    return false;
                }
            } else {
                run = 0;
            }
        }
    }
    true
}
