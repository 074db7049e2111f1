//! Deterministic synthetic pages with exact ground truth.
//!
//! Glyphs are rendered as filled rectangles on a monospaced pitch: prose is
//! word-wrapped with a ragged right edge, tables are aligned grids, equation
//! stacks are single-run lines aligned on their relation sign, and figures
//! are bar charts drawn on an L-shaped axis with a legend inside.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::io::{save_png, write_json, ManifestEntry, PageRecord, RegionRecord, MANIFEST_FILE};
use crate::page::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GlyphStyle {
    /// ink width of one glyph
    pub char_width: u32,
    /// white space between neighbouring glyphs of a word
    pub char_gap: u32,
    pub glyph_height: u32,
    /// height of short glyphs, bottom-aligned with tall ones
    pub x_height: u32,
    /// white space between text lines
    pub line_gap: u32,
    pub ink: u8,
    pub paper: u8,
}

impl GlyphStyle {
    pub fn pitch(&self) -> u32 {
        self.char_width + self.char_gap
    }

    pub fn line_pitch(&self) -> u32 {
        self.glyph_height + self.line_gap
    }

    /// Ink extent of a run of `chars` glyphs.
    pub fn word_width(&self, chars: u32) -> u32 {
        chars * self.pitch() - self.char_gap
    }

    /// White space between two words.
    pub fn word_gap(&self) -> u32 {
        self.pitch() + self.char_gap
    }
}

impl Default for GlyphStyle {
    fn default() -> Self {
        Self {
            char_width: 7,
            char_gap: 2,
            glyph_height: 13,
            x_height: 8,
            line_gap: 8,
            ink: 0,
            paper: 255,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BlockSpec {
    Paragraph {
        lines: u32,
    },
    Table {
        rows: u32,
        cols: u32,
        /// cell width of each column in characters
        col_widths: Vec<u32>,
        /// white space between columns in pixels
        gap: u32,
        /// extra white space between rows on top of the line gap
        row_spacing: u32,
        caption: bool,
        /// top, header and bottom horizontal rules
        rules: bool,
    },
    EquationStack {
        lines: u32,
    },
    Figure {
        width: u32,
        height: u32,
        bars: u32,
        legend_rows: u32,
        /// legend label length in characters
        label_chars: u32,
    },
}

impl BlockSpec {
    pub fn name(&self) -> &'static str {
        match self {
            BlockSpec::Paragraph { .. } => "paragraph",
            BlockSpec::Table { .. } => "table",
            BlockSpec::EquationStack { .. } => "equation_stack",
            BlockSpec::Figure { .. } => "figure",
        }
    }

    /// Vertical extent of the block when rendered with `style`.
    pub fn height(&self, style: &GlyphStyle) -> u32 {
        let lp = style.line_pitch();
        match self {
            BlockSpec::Paragraph { lines } | BlockSpec::EquationStack { lines } => {
                lines * lp - style.line_gap
            }
            BlockSpec::Table {
                rows,
                row_spacing,
                caption,
                rules,
                ..
            } => {
                let body = rows * (lp + row_spacing) - style.line_gap - row_spacing;
                let caption = if *caption { lp } else { 0 };
                let rules = if *rules { 2 * RULE_CLEARANCE } else { 0 };
                body + caption + rules
            }
            BlockSpec::Figure { height, .. } => height + style.line_gap + style.glyph_height,
        }
    }
}

/// Space between a rule and the text it borders, plus its thickness.
const RULE_CLEARANCE: u32 = 6;
const RULE_THICKNESS: u32 = 2;
const AXIS_THICKNESS: u32 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct PageSpec {
    pub name: String,
    pub seed: u64,
    pub width: u32,
    pub height: u32,
    pub margin: u32,
    /// white space between blocks
    pub block_gap: u32,
    pub style: GlyphStyle,
    pub blocks: Vec<BlockSpec>,
    /// probability of flipping a background pixel to ink away from blocks
    pub noise_rate: f64,
}

impl PageSpec {
    pub fn new(name: impl Into<String>, seed: u64, blocks: Vec<BlockSpec>) -> Self {
        Self {
            name: name.into(),
            seed,
            width: 1100,
            height: 1400,
            margin: 70,
            block_gap: 48,
            style: GlyphStyle::default(),
            blocks,
            noise_rate: 0.0,
        }
    }

    fn content_width(&self) -> u32 {
        self.width.saturating_sub(2 * self.margin)
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticPage {
    pub image: GrayImage,
    pub truth: PageRecord,
    /// every single-rectangle glyph, each its own connected component
    pub glyphs: Vec<BBox>,
    /// multi-rectangle connected shapes (figure axes with their bars)
    pub shapes: Vec<BBox>,
    /// every inked rectangle
    pub ink_rects: Vec<BBox>,
    /// vertical extent of each block, including captions
    pub block_extents: Vec<BBox>,
}

impl SyntheticPage {
    pub fn table_count(&self) -> usize {
        self.truth
            .regions
            .iter()
            .filter(|r| r.kind == "table")
            .count()
    }
}

struct Canvas {
    glyphs: Vec<BBox>,
    shapes: Vec<BBox>,
    ink: Vec<BBox>,
}

impl Canvas {
    fn glyph(&mut self, b: BBox) {
        self.glyphs.push(b);
        self.ink.push(b);
    }
}

fn rect(x: u32, y: u32, w: u32, h: u32) -> BBox {
    BBox::from_xywh(x, y, w, h).expect("generator rectangles are non-empty")
}

/// Renders a word of `chars` glyphs with its top at `y`. Short glyphs are
/// bottom-aligned; `tall` decides per glyph.
fn word(
    canvas: &mut Canvas,
    style: &GlyphStyle,
    x: u32,
    y: u32,
    chars: u32,
    tall: &mut impl FnMut() -> bool,
) -> Vec<BBox> {
    let mut out = Vec::with_capacity(chars as usize);
    for k in 0..chars {
        let gx = x + k * style.pitch();
        let b = if tall() {
            rect(gx, y, style.char_width, style.glyph_height)
        } else {
            let h = style.x_height;
            rect(gx, y + style.glyph_height - h, style.char_width, h)
        };
        canvas.glyph(b);
        out.push(b);
    }
    out
}

/// Ragged prose line starting at `x`, filled up to `max_width` pixels.
fn prose_line(
    canvas: &mut Canvas,
    style: &GlyphStyle,
    rng: &mut ChaCha8Rng,
    x: u32,
    y: u32,
    max_width: u32,
) -> Vec<BBox> {
    let mut out = Vec::new();
    let mut cursor = x;
    let end = x + max_width;
    loop {
        let chars = rng.random_range(1..=9);
        let w = style.word_width(chars);
        if cursor + w > end {
            break;
        }
        let mut tall = || rng.random_bool(0.35);
        out.extend(word(canvas, style, cursor, y, chars, &mut tall));
        cursor += w + style.word_gap();
    }
    if out.is_empty() {
        // at least one glyph per line
        let mut tall = || true;
        out.extend(word(canvas, style, x, y, 1, &mut tall));
    }
    out
}

fn tight(boxes: &[BBox]) -> BBox {
    BBox::union_all(boxes.iter()).expect("block has ink")
}

struct Rendered {
    /// ground-truth regions of the block
    truth: Vec<(BBox, &'static str)>,
    extent: BBox,
}

fn render_block(
    spec: &PageSpec,
    index: usize,
    block: &BlockSpec,
    top: u32,
    canvas: &mut Canvas,
    rng: &mut ChaCha8Rng,
) -> Result<Rendered> {
    let style = &spec.style;
    let left = spec.margin;
    let width = spec.content_width();
    let layout_err = |reason: String| Error::Layout {
        block: index,
        kind: block.name(),
        reason,
    };

    match block {
        BlockSpec::Paragraph { lines } => {
            if *lines == 0 {
                return Err(layout_err("paragraph needs at least one line".into()));
            }
            let mut ink = Vec::new();
            for i in 0..*lines {
                let y = top + i * style.line_pitch();
                let indent = if i == 0 {
                    rng.random_range(0..=4) * style.pitch()
                } else {
                    0
                };
                let fill = if i + 1 == *lines {
                    rng.random_range(0.3..0.9)
                } else {
                    1.0
                };
                let max_w = ((f64::from(width - indent)) * fill) as u32;
                ink.extend(prose_line(canvas, style, rng, left + indent, y, max_w));
            }
            let b = tight(&ink);
            Ok(Rendered {
                truth: vec![],
                extent: b,
            })
        }
        BlockSpec::Table {
            rows,
            cols,
            col_widths,
            gap,
            row_spacing,
            caption,
            rules,
        } => {
            if *rows < 2 || *cols < 2 {
                return Err(layout_err(format!(
                    "table needs at least 2x2 cells, got {rows}x{cols}"
                )));
            }
            if col_widths.len() != *cols as usize || col_widths.contains(&0) {
                return Err(layout_err(format!(
                    "expected {cols} positive column widths, got {col_widths:?}"
                )));
            }
            let table_w: u32 =
                col_widths.iter().map(|&c| style.word_width(c)).sum::<u32>() + gap * (cols - 1);
            if table_w > width {
                return Err(layout_err(format!(
                    "table is {table_w} px wide, page has {width}"
                )));
            }
            let x0 = left + rng.random_range(0..=(width - table_w));
            let mut y = top;
            let mut extent_ink = Vec::new();
            if *caption {
                let cap = prose_line(
                    canvas,
                    style,
                    rng,
                    x0,
                    y,
                    (width - (x0 - left)).min(table_w.max(width / 2)),
                );
                extent_ink.extend(cap);
                y += style.line_pitch();
            }
            let mut table_ink = Vec::new();
            let rule = |canvas: &mut Canvas, y: u32| {
                let b = rect(x0, y, table_w, RULE_THICKNESS);
                canvas.glyph(b);
                b
            };
            if *rules {
                table_ink.push(rule(canvas, y));
                y += RULE_CLEARANCE;
            }
            let row_pitch = style.line_pitch() + row_spacing;
            // per-column glyph height pattern shared by all rows
            let patterns: Vec<Vec<bool>> = col_widths
                .iter()
                .map(|&c| (0..c).map(|_| rng.random_bool(0.35)).collect())
                .collect();
            for r in 0..*rows {
                let mut x = x0;
                for (c, &chars) in col_widths.iter().enumerate() {
                    let pattern = &patterns[c];
                    let mut k = 0;
                    let mut tall = || {
                        // header glyphs are all tall
                        let t = r == 0 || pattern[k];
                        k += 1;
                        t
                    };
                    table_ink.extend(word(canvas, style, x, y, chars, &mut tall));
                    x += style.word_width(chars) + gap;
                }
                if *rules && r == 0 {
                    let mid = y + style.glyph_height + (row_pitch - style.glyph_height) / 2 - 1;
                    table_ink.push(rule(canvas, mid));
                }
                y += row_pitch;
            }
            if *rules {
                let last_bottom = y - row_pitch + style.glyph_height;
                table_ink.push(rule(canvas, last_bottom + RULE_CLEARANCE - RULE_THICKNESS));
            }
            let table_box = tight(&table_ink);
            extent_ink.push(table_box);
            Ok(Rendered {
                truth: vec![(table_box, "table")],
                extent: tight(&extent_ink),
            })
        }
        BlockSpec::EquationStack { lines } => {
            if *lines < 2 {
                return Err(layout_err("equation stack needs at least 2 lines".into()));
            }
            // lhs, relation sign, then operand / operator tokens
            let lhs = rng.random_range(1..=3u32);
            let terms = rng.random_range(2..=4u32);
            let operands: Vec<u32> = (0..terms).map(|_| rng.random_range(2..=5)).collect();
            let mut tokens = vec![1u32];
            for (i, &o) in operands.iter().enumerate() {
                if i > 0 {
                    tokens.push(1);
                }
                tokens.push(o);
            }
            let max_rhs: u32 = tokens
                .iter()
                .map(|&t| style.word_width(t) + style.word_gap())
                .sum();
            let lhs_w = style.word_width(lhs) + style.word_gap();
            let total = lhs_w + max_rhs;
            if total > width {
                return Err(layout_err(format!(
                    "equations are {total} px wide, page has {width}"
                )));
            }
            let relation_x = left + (width - total) / 2 + lhs_w;
            let mut ink = Vec::new();
            for i in 0..*lines {
                let y = top + i * style.line_pitch();
                let mut tall = || rng.random_bool(0.5);
                ink.extend(word(canvas, style, relation_x - lhs_w, y, lhs, &mut tall));
                let mut x = relation_x;
                for &len in &tokens {
                    let mut tall = || rng.random_bool(0.5);
                    ink.extend(word(canvas, style, x, y, len, &mut tall));
                    x += style.word_width(len) + style.word_gap();
                }
            }
            let b = tight(&ink);
            Ok(Rendered {
                truth: vec![(b, "formula")],
                extent: b,
            })
        }
        BlockSpec::Figure {
            width: fw,
            height: fh,
            bars,
            legend_rows,
            label_chars,
        } => {
            if *fw > width {
                return Err(layout_err(format!(
                    "figure is {fw} px wide, page has {width}"
                )));
            }
            let swatch = style.glyph_height;
            let swatch_gap = 3 * style.pitch();
            let legend_w = swatch + swatch_gap + style.word_width(*label_chars);
            let legend_h = legend_rows * style.line_pitch() - style.line_gap;
            let plot_w = fw.saturating_sub(legend_w + 40);
            let bar_w = 22u32;
            if *bars == 0 || plot_w < bars * (bar_w + 8) + 12 {
                return Err(layout_err(format!(
                    "{bars} bars do not fit beside a {legend_w} px legend in a {fw} px figure"
                )));
            }
            if *fh < legend_h + 40 || *legend_rows < 2 {
                return Err(layout_err(format!(
                    "legend of {legend_rows} rows does not fit"
                )));
            }
            let fx = left + rng.random_range(0..=(width - fw));
            let fy = top;
            let axis_y = fy + fh - AXIS_THICKNESS;
            let mut parts = vec![
                rect(fx, fy, AXIS_THICKNESS, *fh),
                rect(fx, axis_y, *fw, AXIS_THICKNESS),
            ];
            let bar_pitch = (plot_w - 12) / bars;
            for b in 0..*bars {
                let h = rng.random_range(fh * 3 / 10..=fh * 7 / 10);
                parts.push(rect(fx + 12 + b * bar_pitch, axis_y - h, bar_w, h));
            }
            let frame = tight(&parts);
            canvas.shapes.push(frame);
            canvas.ink.extend(parts);

            let lx = fx + fw - legend_w - 12;
            let ly = fy + 12;
            let mut legend = Vec::new();
            for r in 0..*legend_rows {
                let y = ly + r * style.line_pitch();
                let sw = rect(lx, y, swatch, style.glyph_height);
                canvas.glyph(sw);
                legend.push(sw);
                let mut tall = || true;
                legend.extend(word(
                    canvas,
                    style,
                    lx + swatch + swatch_gap,
                    y,
                    *label_chars,
                    &mut tall,
                ));
            }
            let legend_box = tight(&legend);

            let cap_y = fy + fh + style.line_gap;
            let cap = prose_line(canvas, style, rng, fx, cap_y, *fw);
            let mut extent = vec![frame];
            extent.extend(cap);
            Ok(Rendered {
                truth: vec![(frame, "figure"), (legend_box, "tabular_structure")],
                extent: tight(&extent),
            })
        }
    }
}

/// Renders a page and its ground truth. Identical specs give identical
/// bytes.
pub fn generate_page(spec: &PageSpec) -> Result<SyntheticPage> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut canvas = Canvas {
        glyphs: Vec::new(),
        shapes: Vec::new(),
        ink: Vec::new(),
    };
    let mut regions = Vec::new();
    let mut extents = Vec::new();
    let mut top = spec.margin;
    let bottom_limit = spec.height.saturating_sub(spec.margin);
    for (i, block) in spec.blocks.iter().enumerate() {
        let h = block.height(&spec.style);
        if top + h > bottom_limit {
            return Err(Error::Layout {
                block: i,
                kind: block.name(),
                reason: format!(
                    "block needs {h} px at y={top}, page content ends at {bottom_limit}"
                ),
            });
        }
        let rendered = render_block(spec, i, block, top, &mut canvas, &mut rng)?;
        for (bbox, kind) in rendered.truth {
            regions.push(RegionRecord {
                bbox,
                kind: kind.to_string(),
                score: None,
                rows: None,
            });
        }
        extents.push(rendered.extent);
        top += h + spec.block_gap;
    }

    let mut image = GrayImage::filled(spec.width, spec.height, spec.style.paper);
    for r in &canvas.ink {
        image.fill_rect(r, spec.style.ink);
    }
    if spec.noise_rate > 0.0 {
        add_noise(&mut image, spec, &extents, &mut rng);
    }

    Ok(SyntheticPage {
        image,
        truth: PageRecord {
            page: spec.name.clone(),
            regions,
        },
        glyphs: canvas.glyphs,
        shapes: canvas.shapes,
        ink_rects: canvas.ink,
        block_extents: extents,
    })
}

/// Isolated ink specks on the background, kept 3 px clear of every block.
fn add_noise(image: &mut GrayImage, spec: &PageSpec, extents: &[BBox], rng: &mut ChaCha8Rng) {
    let clear = 3;
    for y in 0..spec.height {
        for x in 0..spec.width {
            if !rng.random_bool(spec.noise_rate) {
                continue;
            }
            let near_block = extents.iter().any(|b| {
                x + clear >= b.x0()
                    && x < b.x1() + clear
                    && y + clear >= b.y0()
                    && y < b.y1() + clear
            });
            if !near_block {
                image.set(x, y, spec.style.ink);
            }
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of page `index` in a corpus generated from `seed`.
pub fn page_seed(seed: u64, index: usize) -> u64 {
    splitmix64(splitmix64(seed) ^ index as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PageCategory {
    Tables,
    Prose,
    Formulas,
    FigureLegend,
}

fn random_style(rng: &mut ChaCha8Rng) -> GlyphStyle {
    let glyph_height = rng.random_range(11..=16);
    GlyphStyle {
        char_width: rng.random_range(6..=9),
        char_gap: 2,
        glyph_height,
        x_height: (f64::from(glyph_height) * 0.65).round() as u32,
        line_gap: rng.random_range(6..=10),
        ink: rng.random_range(0..=60),
        paper: rng.random_range(225..=255),
    }
}

fn random_paragraph(rng: &mut ChaCha8Rng) -> BlockSpec {
    BlockSpec::Paragraph {
        lines: rng.random_range(2..=7),
    }
}

fn random_table(rng: &mut ChaCha8Rng, style: &GlyphStyle, content_width: u32) -> BlockSpec {
    loop {
        let cols = rng.random_range(2..=5u32);
        let col_widths: Vec<u32> = (0..cols).map(|_| rng.random_range(3..=10)).collect();
        let gap = rng.random_range(3..=7) * style.pitch();
        let table_w: u32 =
            col_widths.iter().map(|&c| style.word_width(c)).sum::<u32>() + gap * (cols - 1);
        if table_w > content_width {
            continue;
        }
        let rows = rng.random_range(3..=9);
        return BlockSpec::Table {
            rows,
            cols,
            col_widths,
            gap,
            row_spacing: rng.random_range(0..=4),
            // a caption set at line spacing needs enough rows for the
            // adjacent-pair fraction to absorb it
            caption: rows >= 4 && rng.random_bool(0.5),
            rules: rows >= 4 && rng.random_bool(0.3),
        };
    }
}

fn random_figure(rng: &mut ChaCha8Rng, style: &GlyphStyle, content_width: u32) -> BlockSpec {
    let label_chars = rng.random_range(4..=8);
    let legend_rows = rng.random_range(2..=4);
    let legend_w = style.glyph_height + 3 * style.pitch() + style.word_width(label_chars);
    let width = (content_width * rng.random_range(55..=80) / 100).max(legend_w + 200);
    let plot_w = width - legend_w - 40;
    let bars = rng.random_range(3..=6).min((plot_w - 12) / 30);
    BlockSpec::Figure {
        width: width.min(content_width),
        height: rng.random_range(200..=300),
        bars,
        legend_rows,
        label_chars,
    }
}

/// Random page of the given category. Blocks are added until the page is
/// about full.
pub fn random_page_spec(name: &str, seed: u64, category: PageCategory) -> PageSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spec = PageSpec::new(name, splitmix64(seed), vec![]);
    spec.style = random_style(&mut rng);
    let cw = spec.content_width();
    let style = spec.style;

    let mut required = Vec::new();
    match category {
        PageCategory::Tables => {
            let n = rng.random_range(1..=2);
            for _ in 0..n {
                required.push(random_table(&mut rng, &style, cw));
            }
        }
        PageCategory::Prose => {}
        PageCategory::Formulas => {
            for _ in 0..rng.random_range(1..=2) {
                required.push(BlockSpec::EquationStack {
                    lines: rng.random_range(3..=6),
                });
            }
        }
        PageCategory::FigureLegend => required.push(random_figure(&mut rng, &style, cw)),
    }

    let budget = spec.height - 2 * spec.margin;
    let mut used = 0u32;
    let mut blocks = Vec::new();
    let fits = |used: u32, b: &BlockSpec| used + b.height(&style) <= budget;
    let mut first = random_paragraph(&mut rng);
    if !fits(used, &first) {
        first = BlockSpec::Paragraph { lines: 1 };
    }
    used += first.height(&style) + spec.block_gap;
    blocks.push(first);
    for b in required {
        if fits(used, &b) {
            used += b.height(&style) + spec.block_gap;
            blocks.push(b);
        }
        let p = random_paragraph(&mut rng);
        if fits(used, &p) {
            used += p.height(&style) + spec.block_gap;
            blocks.push(p);
        }
    }
    loop {
        let p = random_paragraph(&mut rng);
        if !fits(used, &p) {
            break;
        }
        used += p.height(&style) + spec.block_gap;
        blocks.push(p);
    }
    spec.blocks = blocks;
    spec
}

/// Page category mix of a corpus: about 40% table pages, 40% prose-only,
/// 20% formula stacks or figure legends.
pub fn page_category(seed: u64) -> PageCategory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xC0FF_EE00_D15E_A5E5);
    let u: f64 = rng.random();
    if u < 0.4 {
        PageCategory::Tables
    } else if u < 0.8 {
        PageCategory::Prose
    } else if u < 0.9 {
        PageCategory::Formulas
    } else {
        PageCategory::FigureLegend
    }
}

pub fn corpus_page_spec(seed: u64, index: usize) -> PageSpec {
    let s = page_seed(seed, index);
    random_page_spec(&format!("page_{:04}", index + 1), s, page_category(s))
}

/// Writes `n_pages` PNG pages with their ground-truth JSON and a manifest
/// into `out_dir`.
pub fn generate_corpus(n_pages: usize, seed: u64, out_dir: &Path) -> Result<Vec<ManifestEntry>> {
    if n_pages == 0 {
        return Err(Error::InvalidInput("corpus needs at least one page".into()));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut manifest = Vec::with_capacity(n_pages);
    for i in 0..n_pages {
        let spec = corpus_page_spec(seed, i);
        let page = generate_page(&spec)?;
        let image = format!("{}.png", spec.name);
        let groundtruth = format!("{}.json", spec.name);
        save_png(&page.image, &out_dir.join(&image))?;
        write_json(&out_dir.join(&groundtruth), &page.truth)?;
        manifest.push(ManifestEntry {
            image,
            groundtruth,
            table_count: page.table_count(),
        });
    }
    write_json(&out_dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}
