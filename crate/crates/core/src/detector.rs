//! Tabular region detection from candidate regions, and promotion of
//! tabular structures to tables.
//!
//! Every line of a candidate becomes a row framed by the candidate's full
//! x-extent. A candidate qualifies when enough of its row pairs are similar;
//! it is then trimmed to its longest run of mutually adjacent similar rows.
//! Promotion to a table uses two heuristic rules: most rows must show several
//! horizontal regions, and the region must not sit inside a plot-axis frame.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::page::{analyze_page, CandidateRegion, GrayImage, PageLayout, PageParams};
use crate::row_model::{FeatureVector, RowElement};
use crate::similarity::{is_similar, pairwise_tssm, SimilarityMatrix};

/// Which row pairs the qualification fraction is computed over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairMode {
    #[default]
    Adjacent,
    AllPairs,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionConfig {
    /// gap threshold as a multiple of the primitive length
    pub th_w_factor: f64,
    /// absolute gap threshold in pixels; overrides `th_w_factor`
    pub th_w_abs: Option<f64>,
    pub th_sim: f64,
    pub min_rows: usize,
    pub adj_fraction: f64,
    pub min_columns: usize,
    pub gap_factor: f64,
    pub noise_min_area: u64,
    pub line_overlap: f64,
    pub pair_mode: PairMode,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            th_w_factor: 2.0,
            th_w_abs: None,
            th_sim: 0.8,
            min_rows: 3,
            adj_fraction: 0.7,
            min_columns: 2,
            gap_factor: 1.8,
            noise_min_area: 4,
            line_overlap: 0.4,
            pair_mode: PairMode::Adjacent,
        }
    }
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, why: &str| Err(Error::InvalidConfig(format!("{key}: {why}")));
        if !(0.0..=1.0).contains(&self.th_sim) {
            return bad("th_sim", "must lie in [0, 1]");
        }
        if !(self.adj_fraction > 0.0 && self.adj_fraction <= 1.0) {
            return bad("adj_fraction", "must lie in (0, 1]");
        }
        if self.min_rows < 2 {
            return bad("min_rows", "must be at least 2");
        }
        if !(self.th_w_factor >= 0.0 && self.th_w_factor.is_finite()) {
            return bad("th_w_factor", "must be a non-negative number");
        }
        if let Some(abs) = self.th_w_abs {
            if !(abs >= 0.0 && abs.is_finite()) {
                return bad("th_w_abs", "must be a non-negative number");
            }
        }
        if self.min_columns < 1 {
            return bad("min_columns", "must be at least 1");
        }
        if !(self.gap_factor >= 0.0 && self.gap_factor.is_finite()) {
            return bad("gap_factor", "must be a non-negative number");
        }
        if !(self.line_overlap > 0.0 && self.line_overlap <= 1.0) {
            return bad("line_overlap", "must lie in (0, 1]");
        }
        Ok(())
    }

    pub fn page_params(&self) -> PageParams {
        PageParams {
            noise_min_area: self.noise_min_area,
            line_overlap: self.line_overlap,
            gap_factor: self.gap_factor,
        }
    }

    /// Gap threshold in pixels for a page with primitive length `l_prime`.
    pub fn effective_th_w(&self, l_prime: f64) -> f64 {
        self.th_w_abs.unwrap_or(self.th_w_factor * l_prime)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    TabularStructure,
    Table,
}

impl RegionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegionKind::TabularStructure => "tabular_structure",
            RegionKind::Table => "table",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularRegion {
    pub bbox: BBox,
    pub rows: Vec<RowElement>,
    pub similarity: SimilarityMatrix,
    pub kind: RegionKind,
    /// mean score of adjacent row pairs
    pub score: f64,
    /// ruling lines found around the source candidate
    pub rulings: Vec<BBox>,
    /// plot-axis frame that fully encloses the region, if any
    pub enclosing_figure: Option<BBox>,
}

/// One row per line, all framed by the candidate's x-extent.
pub fn build_row_elements(
    candidate: &CandidateRegion,
    l_prime: f64,
    cfg: &DetectionConfig,
) -> Result<Vec<RowElement>> {
    let th_w = cfg.effective_th_w(l_prime);
    candidate
        .lines
        .iter()
        .map(|line| {
            let frame = BBox::new(
                candidate.bbox.x0(),
                line.bbox.y0(),
                candidate.bbox.x1(),
                line.bbox.y1(),
            )?;
            RowElement::new(frame, &line.components, l_prime, th_w)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionScore {
    pub similarity: SimilarityMatrix,
    pub adjacent_similar_fraction: f64,
    pub mean_adjacent_tssm: f64,
    pub all_pairs_similar_fraction: f64,
}

impl RegionScore {
    pub fn fraction(&self, mode: PairMode) -> f64 {
        match mode {
            PairMode::Adjacent => self.adjacent_similar_fraction,
            PairMode::AllPairs => self.all_pairs_similar_fraction,
        }
    }
}

fn similar_fraction(scores: &[f64], th_sim: f64) -> f64 {
    let hits = scores.iter().filter(|&&s| is_similar(s, th_sim)).count();
    hits as f64 / scores.len() as f64
}

/// Scores a region from its stored similarity matrix. `None` for fewer than
/// two rows.
pub fn score_matrix(similarity: SimilarityMatrix, th_sim: f64) -> Option<RegionScore> {
    if similarity.size() < 2 {
        return None;
    }
    let adjacent = similarity.adjacent();
    let upper = similarity.upper_pairs();
    Some(RegionScore {
        adjacent_similar_fraction: similar_fraction(&adjacent, th_sim),
        mean_adjacent_tssm: adjacent.iter().sum::<f64>() / adjacent.len() as f64,
        all_pairs_similar_fraction: similar_fraction(&upper, th_sim),
        similarity,
    })
}

/// Pairwise similarity of the rows plus the adjacent-pair statistics.
/// `Ok(None)` signals a region with fewer than two rows, which cannot qualify.
pub fn score_region(rows: &[RowElement], th_sim: f64) -> Result<Option<RegionScore>> {
    let features: Vec<FeatureVector> = rows.iter().map(RowElement::feature).collect();
    let similarity = pairwise_tssm(&features)?;
    Ok(score_matrix(similarity, th_sim))
}

/// Longest run of consecutive rows whose adjacent pairs are all similar, as
/// a half-open index range. Earliest run wins ties.
fn longest_similar_run(similarity: &SimilarityMatrix, th_sim: f64) -> std::ops::Range<usize> {
    let n = similarity.size();
    let mut best = 0..n.min(1);
    let mut start = 0;
    for i in 1..=n {
        let continues = i < n && is_similar(similarity.get(i - 1, i), th_sim);
        if !continues {
            if i - start > best.len() {
                best = start..i;
            }
            start = i;
        }
    }
    best
}

fn detect_in_candidate(
    candidate: &CandidateRegion,
    layout: &PageLayout,
    l_prime: f64,
    cfg: &DetectionConfig,
) -> Result<Option<TabularRegion>> {
    if candidate.lines.len() < cfg.min_rows {
        return Ok(None);
    }
    let rows = build_row_elements(candidate, l_prime, cfg)?;
    let Some(score) = score_region(&rows, cfg.th_sim)? else {
        return Ok(None);
    };
    if score.fraction(cfg.pair_mode) < cfg.adj_fraction {
        return Ok(None);
    }

    let run = longest_similar_run(&score.similarity, cfg.th_sim);
    if run.len() < cfg.min_rows {
        return Ok(None);
    }
    let trimmed = score_matrix(score.similarity.slice(run.clone()), cfg.th_sim)
        .expect("run holds at least two rows");
    if trimmed.fraction(cfg.pair_mode) < cfg.adj_fraction {
        return Ok(None);
    }

    let bbox = BBox::union_all(candidate.lines[run.clone()].iter().map(|l| &l.bbox))
        .expect("run is non-empty");
    let enclosing_figure = layout
        .figure_frames
        .iter()
        .find(|f| f.contains(&bbox))
        .copied();
    Ok(Some(TabularRegion {
        bbox,
        rows: rows[run].to_vec(),
        score: trimmed.mean_adjacent_tssm,
        similarity: trimmed.similarity,
        kind: RegionKind::TabularStructure,
        rulings: candidate.rulings.clone(),
        enclosing_figure,
    }))
}

/// Tabular structures among the candidates of an analyzed page, ordered by
/// top edge.
pub fn detect_in_layout(layout: &PageLayout, cfg: &DetectionConfig) -> Result<Vec<TabularRegion>> {
    cfg.validate()?;
    let Some(l_prime) = layout.l_prime else {
        return Ok(Vec::new());
    };
    let mut regions = Vec::new();
    for cand in &layout.candidates {
        if let Some(region) = detect_in_candidate(cand, layout, l_prime, cfg)? {
            regions.push(region);
        }
    }
    regions.sort_by_key(|r| (r.bbox.y0(), r.bbox.x0()));
    Ok(regions)
}

/// Runs page analysis and similarity-based detection on a raster page. All
/// returned regions have kind `TabularStructure`.
pub fn detect_tabular_regions(
    img: &GrayImage,
    cfg: &DetectionConfig,
) -> Result<Vec<TabularRegion>> {
    cfg.validate()?;
    let layout = analyze_page(img, &cfg.page_params())?;
    detect_in_layout(&layout, cfg)
}

/// Rule (a): at least half of the rows have `min_columns` or more horizontal
/// regions.
pub fn has_enough_columns(region: &TabularRegion, min_columns: usize) -> bool {
    let wide = region
        .rows
        .iter()
        .filter(|r| r.regions().len() >= min_columns)
        .count();
    !region.rows.is_empty() && 2 * wide >= region.rows.len()
}

/// Relabels regions that pass both promotion rules as tables. Boxes and the
/// region set are left untouched.
pub fn refine_tables(regions: Vec<TabularRegion>, cfg: &DetectionConfig) -> Vec<TabularRegion> {
    regions
        .into_iter()
        .map(|mut r| {
            r.kind = if has_enough_columns(&r, cfg.min_columns) && r.enclosing_figure.is_none() {
                RegionKind::Table
            } else {
                RegionKind::TabularStructure
            };
            r
        })
        .collect()
}

/// Full pipeline for one page: detection followed by table refinement.
pub fn detect_page(img: &GrayImage, cfg: &DetectionConfig) -> Result<Vec<TabularRegion>> {
    Ok(refine_tables(detect_tabular_regions(img, cfg)?, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::page::TextLine;
    use crate::row_model::SubElement;

    fn bx(x0: u32, y0: u32, x1: u32, y1: u32) -> BBox {
        BBox::new(x0, y0, x1, y1).unwrap()
    }

    /// A line of glyph boxes 8 px wide on a 10 px pitch, one group per
    /// `(start_x, glyph_count)`.
    fn line(y: u32, groups: &[(u32, u32)]) -> TextLine {
        let mut comps = Vec::new();
        for &(x, count) in groups {
            for k in 0..count {
                comps.push(SubElement::new(bx(x + 10 * k, y, x + 10 * k + 8, y + 12)));
            }
        }
        let bbox = BBox::union_all(comps.iter().map(|c| &c.bbox)).unwrap();
        TextLine {
            bbox,
            components: comps,
        }
    }

    fn candidate(lines: Vec<TextLine>) -> CandidateRegion {
        let bbox = BBox::union_all(lines.iter().map(|l| &l.bbox)).unwrap();
        CandidateRegion {
            bbox,
            lines,
            rulings: vec![],
        }
    }

    fn layout_of(cands: Vec<CandidateRegion>) -> PageLayout {
        PageLayout {
            width: 2000,
            height: 2000,
            l_prime: Some(8.0),
            text_components: vec![],
            rulings: vec![],
            graphics: vec![],
            figure_frames: vec![],
            lines: cands.iter().flat_map(|c| c.lines.clone()).collect(),
            candidates: cands,
        }
    }

    const TABLE_ROW: &[(u32, u32)] = &[(0, 6), (100, 4), (200, 5)];

    #[test]
    fn config_validation() {
        assert!(DetectionConfig::default().validate().is_ok());
        let cases = [
            DetectionConfig {
                th_sim: 1.5,
                ..Default::default()
            },
            DetectionConfig {
                adj_fraction: 0.0,
                ..Default::default()
            },
            DetectionConfig {
                min_rows: 1,
                ..Default::default()
            },
            DetectionConfig {
                th_w_abs: Some(-1.0),
                ..Default::default()
            },
            DetectionConfig {
                line_overlap: 0.0,
                ..Default::default()
            },
        ];
        for cfg in cases {
            assert!(
                matches!(cfg.validate(), Err(Error::InvalidConfig(_))),
                "{cfg:?}"
            );
        }
    }

    #[test]
    fn effective_gap_threshold() {
        let cfg = DetectionConfig::default();
        assert_eq!(cfg.effective_th_w(7.0), 14.0);
        let cfg = DetectionConfig {
            th_w_abs: Some(10.0),
            ..cfg
        };
        assert_eq!(cfg.effective_th_w(7.0), 10.0);
    }

    #[test]
    fn rows_share_the_candidate_frame() {
        let cand = candidate(vec![
            line(0, &[(0, 10)]),
            line(20, &[(0, 21)]),
            line(40, &[(50, 3)]),
        ]);
        let rows = build_row_elements(&cand, 1.0, &DetectionConfig::default()).unwrap();
        assert_eq!(rows.len(), 3);
        // frame is [0, 208] so n = 208 for l' = 1
        assert!(rows
            .iter()
            .all(|r| r.n() == 208 && r.frame().x0() == 0 && r.frame().x1() == 208));
        assert_eq!(rows[2].frame().y0(), 40);
    }

    #[test]
    fn single_line_candidate_gives_one_row() {
        let cand = candidate(vec![line(0, &[(0, 4)])]);
        let rows = build_row_elements(&cand, 8.0, &DetectionConfig::default()).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(score_region(&rows, 0.8).unwrap(), None);
    }

    #[test]
    fn identical_rows_score_one() {
        let cand = candidate((0..4).map(|i| line(i * 20, TABLE_ROW)).collect());
        let rows = build_row_elements(&cand, 8.0, &DetectionConfig::default()).unwrap();
        let s = score_region(&rows, 0.8).unwrap().unwrap();
        assert_eq!(s.adjacent_similar_fraction, 1.0);
        assert_eq!(s.mean_adjacent_tssm, 1.0);
        assert_eq!(s.all_pairs_similar_fraction, 1.0);
    }

    #[test]
    fn alternating_rows_fraction() {
        // rows A A B A: only the first adjacent pair is similar
        let a: &[(u32, u32)] = &[(0, 3), (200, 3)];
        let b: &[(u32, u32)] = &[(60, 12)];
        let cand = candidate(vec![line(0, a), line(20, a), line(40, b), line(60, a)]);
        let rows = build_row_elements(&cand, 8.0, &DetectionConfig::default()).unwrap();
        let s = score_region(&rows, 0.8).unwrap().unwrap();
        assert!((s.adjacent_similar_fraction - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn extreme_rows_fraction_zero() {
        let frame = bx(0, 0, 80, 10);
        let empty = RowElement::new(frame, &[], 8.0, 16.0).unwrap();
        let full = RowElement::new(frame, &[SubElement::new(frame)], 8.0, 16.0).unwrap();
        let s = score_region(&[empty, full], 0.8).unwrap().unwrap();
        assert_eq!(s.adjacent_similar_fraction, 0.0);
        assert!(s.mean_adjacent_tssm.abs() < 1e-15);
    }

    #[test]
    fn table_candidate_is_detected_and_trimmed() {
        // a caption line above four identical table rows
        let mut lines = vec![line(0, &[(0, 25)])];
        lines.extend((1..5).map(|i| line(i * 20, TABLE_ROW)));
        let layout = layout_of(vec![candidate(lines)]);
        let regions = detect_in_layout(&layout, &DetectionConfig::default()).unwrap();
        assert_eq!(regions.len(), 1);
        let r = &regions[0];
        assert_eq!(r.rows.len(), 4);
        assert_eq!(r.bbox, bx(0, 20, 248, 92));
        assert_eq!(r.kind, RegionKind::TabularStructure);
        assert_eq!(r.similarity.size(), 4);
        assert_eq!(r.score, 1.0);
    }

    #[test]
    fn too_few_rows_are_rejected() {
        let layout = layout_of(vec![candidate(
            (0..2).map(|i| line(i * 20, TABLE_ROW)).collect(),
        )]);
        assert!(detect_in_layout(&layout, &DetectionConfig::default())
            .unwrap()
            .is_empty());
        let cfg = DetectionConfig {
            min_rows: 2,
            ..Default::default()
        };
        assert_eq!(detect_in_layout(&layout, &cfg).unwrap().len(), 1);
    }

    #[test]
    fn page_without_text_has_no_regions() {
        let mut layout = layout_of(vec![]);
        layout.l_prime = None;
        assert!(detect_in_layout(&layout, &DetectionConfig::default())
            .unwrap()
            .is_empty());
        let blank = GrayImage::filled(50, 50, 255);
        assert!(detect_page(&blank, &DetectionConfig::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn longest_run_prefers_earliest() {
        let rows = [
            FeatureVector::new(vec![1.0, 0.0]),
            FeatureVector::new(vec![1.0, 0.0]),
            FeatureVector::new(vec![0.0, 1.0]),
            FeatureVector::new(vec![0.0, 1.0]),
        ];
        let m = pairwise_tssm(&rows).unwrap();
        assert_eq!(longest_similar_run(&m, 0.8), 0..2);
        let m = pairwise_tssm(&rows[..1]).unwrap();
        assert_eq!(longest_similar_run(&m, 0.8), 0..1);
    }

    fn region_with(groups: &[&[(u32, u32)]]) -> TabularRegion {
        let cand = candidate(
            groups
                .iter()
                .enumerate()
                .map(|(i, g)| line(i as u32 * 20, g))
                .collect(),
        );
        let rows = build_row_elements(&cand, 8.0, &DetectionConfig::default()).unwrap();
        let s = score_region(&rows, 0.8).unwrap().unwrap();
        TabularRegion {
            bbox: cand.bbox,
            rows,
            similarity: s.similarity,
            kind: RegionKind::TabularStructure,
            score: s.mean_adjacent_tssm,
            rulings: vec![],
            enclosing_figure: None,
        }
    }

    #[test]
    fn multi_column_region_is_promoted() {
        let region = region_with(&[TABLE_ROW; 5]);
        let out = refine_tables(vec![region.clone()], &DetectionConfig::default());
        assert_eq!(out[0].kind, RegionKind::Table);
        assert_eq!(out[0].bbox, region.bbox);
    }

    #[test]
    fn single_column_region_stays_structure() {
        let eq: &[(u32, u32)] = &[(40, 3), (80, 1), (100, 6)];
        let region = region_with(&[eq; 4]);
        assert!(region.rows.iter().all(|r| r.regions().len() == 1));
        let out = refine_tables(vec![region], &DetectionConfig::default());
        assert_eq!(out[0].kind, RegionKind::TabularStructure);
    }

    #[test]
    fn region_inside_figure_stays_structure() {
        let mut region = region_with(&[TABLE_ROW; 3]);
        region.enclosing_figure = Some(bx(0, 0, 1000, 1000));
        let out = refine_tables(vec![region], &DetectionConfig::default());
        assert_eq!(out[0].kind, RegionKind::TabularStructure);
        assert!(refine_tables(vec![], &DetectionConfig::default()).is_empty());
    }

    #[test]
    fn half_the_rows_suffices_for_promotion() {
        let one: &[(u32, u32)] = &[(0, 25)];
        let region = region_with(&[one, TABLE_ROW, one, TABLE_ROW]);
        assert!(has_enough_columns(&region, 2));
        let region = region_with(&[one, TABLE_ROW, one, one]);
        assert!(!has_enough_columns(&region, 2));
    }
}
