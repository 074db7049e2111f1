//! File formats: raster input, detection / ground-truth JSON, PASCAL-VOC
//! conversion and overlay rendering.

use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageReader, Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::detector::{RegionKind, TabularRegion};
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::page::GrayImage;

/// One region of a detection or ground-truth page.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRecord {
    pub bbox: BBox,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
}

/// `{ "page": ..., "regions": [...] }`, shared by detections and ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageRecord {
    pub page: String,
    pub regions: Vec<RegionRecord>,
}

impl PageRecord {
    pub fn from_regions(page: impl Into<String>, regions: &[TabularRegion]) -> Self {
        Self {
            page: page.into(),
            regions: regions
                .iter()
                .map(|r| RegionRecord {
                    bbox: r.bbox,
                    kind: r.kind.as_str().to_string(),
                    score: Some(r.score),
                    rows: Some(r.rows.len()),
                })
                .collect(),
        }
    }

    pub fn retain_kind(&mut self, kind: RegionKind) {
        self.regions.retain(|r| r.kind == kind.as_str());
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    Many(Vec<PageRecord>),
    One(PageRecord),
}

/// Parses a JSON document holding one page record or an array of them.
pub fn parse_page_records(text: &str, origin: &Path) -> Result<Vec<PageRecord>> {
    match serde_json::from_str::<OneOrMany>(text) {
        Ok(OneOrMany::Many(v)) => Ok(v),
        Ok(OneOrMany::One(p)) => Ok(vec![p]),
        Err(_) => {
            // reparse as an array to surface a precise message
            let err = serde_json::from_str::<Vec<PageRecord>>(text)
                .err()
                .or_else(|| serde_json::from_str::<PageRecord>(text).err())
                .expect("one of the two shapes failed");
            Err(Error::json(origin, err))
        }
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Reads page records from a JSON file, or from every `*.json` file of a
/// directory except the corpus manifest. Records are sorted by page id.
pub fn read_page_records(path: &Path) -> Result<Vec<PageRecord>> {
    let mut out = Vec::new();
    if path.is_dir() {
        for file in json_files(path)? {
            let text = fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
            out.extend(parse_page_records(&text, &file)?);
        }
    } else {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        out = parse_page_records(&text, path)?;
    }
    out.sort_by(|a, b| a.page.cmp(&b.page));
    Ok(out)
}

fn json_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|e| e == "json")
                && p.file_name().is_some_and(|n| n != MANIFEST_FILE)
        })
        .collect();
    files.sort();
    Ok(files)
}

pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("records always serialize");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json_string(value)).map_err(|e| Error::io(path, e))
}

/// Entry of a synthetic corpus manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image: String,
    pub groundtruth: String,
    pub table_count: usize,
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

pub const IMAGE_EXTENSIONS: &[&str] = &["png", "pgm"];

/// Image files of a directory with a supported extension, sorted by name.
pub fn image_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    files.sort();
    Ok(files)
}

/// Page identifier of an image file: its file stem.
pub fn page_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Decodes a PNG (8-bit gray or RGB) or binary PGM into luminance. Colour is
/// reduced with Rec. 601 weights.
pub fn load_image(path: &Path) -> Result<GrayImage> {
    let decode_err = |message: String| Error::Decode {
        path: path.to_path_buf(),
        message,
    };
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let img = reader.decode().map_err(|e| decode_err(e.to_string()))?;
    gray_from_dynamic(img)
}

pub fn decode_image_bytes(bytes: &[u8]) -> Result<GrayImage> {
    let img = image::load_from_memory(bytes).map_err(|e| Error::Decode {
        path: PathBuf::from("<memory>"),
        message: e.to_string(),
    })?;
    gray_from_dynamic(img)
}

fn gray_from_dynamic(img: DynamicImage) -> Result<GrayImage> {
    match img {
        DynamicImage::ImageLuma8(g) => {
            let (w, h) = g.dimensions();
            GrayImage::new(w, h, g.into_raw())
        }
        other => {
            let rgb = other.to_rgb8();
            let (w, h) = rgb.dimensions();
            GrayImage::from_rgb(w, h, rgb.as_raw())
        }
    }
}

pub fn encode_png(img: &GrayImage) -> Result<Vec<u8>> {
    let buf = image::GrayImage::from_raw(img.width(), img.height(), img.samples().to_vec())
        .expect("sample count matches dimensions");
    let mut out = std::io::Cursor::new(Vec::new());
    buf.write_to(&mut out, image::ImageFormat::Png)?;
    Ok(out.into_inner())
}

pub fn save_png(img: &GrayImage, path: &Path) -> Result<()> {
    let bytes = encode_png(img)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Overlay colours.
pub mod colors {
    pub const DETECTED_TABLE: [u8; 3] = [0, 100, 0];
    pub const DETECTED_STRUCTURE: [u8; 3] = [255, 140, 0];
    pub const TRUTH_TABLE: [u8; 3] = [144, 238, 144];
    pub const TRUTH_FORMULA: [u8; 3] = [220, 20, 60];
    pub const TRUTH_FIGURE: [u8; 3] = [30, 90, 255];
    pub const TRUTH_OTHER: [u8; 3] = [160, 160, 160];
}

pub fn detection_color(kind: &str) -> [u8; 3] {
    if kind == "table" {
        colors::DETECTED_TABLE
    } else {
        colors::DETECTED_STRUCTURE
    }
}

pub fn truth_color(kind: &str) -> [u8; 3] {
    match kind {
        "table" => colors::TRUTH_TABLE,
        "formula" => colors::TRUTH_FORMULA,
        "figure" => colors::TRUTH_FIGURE,
        _ => colors::TRUTH_OTHER,
    }
}

fn draw_rect(canvas: &mut RgbImage, b: &BBox, color: [u8; 3], thickness: u32) {
    let (w, h) = canvas.dimensions();
    let x1 = b.x1().min(w);
    let y1 = b.y1().min(h);
    for y in b.y0().min(h)..y1 {
        for x in b.x0().min(w)..x1 {
            let edge = x < b.x0() + thickness
                || x + thickness >= b.x1()
                || y < b.y0() + thickness
                || y + thickness >= b.y1();
            if edge {
                canvas.put_pixel(x, y, Rgb(color));
            }
        }
    }
}

/// Copy of the page with rectangle outlines burned in. Ground-truth boxes
/// are drawn first so detections stay visible on top.
pub fn render_overlay(
    img: &GrayImage,
    truth: &[RegionRecord],
    detections: &[RegionRecord],
) -> RgbImage {
    let mut canvas = RgbImage::from_fn(img.width(), img.height(), |x, y| {
        let v = img.get(x, y);
        Rgb([v, v, v])
    });
    for r in truth {
        draw_rect(&mut canvas, &r.bbox, truth_color(&r.kind), 2);
    }
    for r in detections {
        draw_rect(&mut canvas, &r.bbox, detection_color(&r.kind), 3);
    }
    canvas
}

pub fn save_overlay(canvas: &RgbImage, path: &Path) -> Result<()> {
    let mut out = std::io::Cursor::new(Vec::new());
    canvas.write_to(&mut out, image::ImageFormat::Png)?;
    fs::write(path, out.into_inner()).map_err(|e| Error::io(path, e))
}

/// Converts a PASCAL-VOC annotation into a page record. Each `<object>`
/// contributes its lower-cased `<name>` as kind and its `<bndbox>` corners.
/// The page id is the stem of `<filename>`, or `fallback_page` without one.
pub fn parse_voc(xml: &str, fallback_page: &str, origin: &Path) -> Result<PageRecord> {
    let fail = |message: String| Error::Annotation {
        path: origin.to_path_buf(),
        message,
    };
    let doc = roxmltree::Document::parse(xml).map_err(|e| fail(e.to_string()))?;
    let root = doc.root_element();
    let child_text = |node: roxmltree::Node, tag: &str| -> Option<String> {
        node.children()
            .find(|c| c.has_tag_name(tag))
            .and_then(|c| c.text())
            .map(|t| t.trim().to_string())
    };

    let page = child_text(root, "filename")
        .map(|f| page_id(Path::new(&f)))
        .filter(|p| !p.is_empty())
        .unwrap_or_else(|| fallback_page.to_string());

    let mut regions = Vec::new();
    for obj in root.children().filter(|c| c.has_tag_name("object")) {
        let name = child_text(obj, "name").ok_or_else(|| fail("object without <name>".into()))?;
        let bnd = obj
            .children()
            .find(|c| c.has_tag_name("bndbox"))
            .ok_or_else(|| fail(format!("object `{name}` without <bndbox>")))?;
        let coord = |tag: &str| -> Result<u32> {
            let t = child_text(bnd, tag).ok_or_else(|| fail(format!("missing <{tag}>")))?;
            let v: f64 = t
                .parse()
                .map_err(|_| fail(format!("bad <{tag}> value `{t}`")))?;
            if v.is_nan() || v < 0.0 {
                return Err(fail(format!("negative <{tag}> value `{t}`")));
            }
            Ok(v.round() as u32)
        };
        let bbox = BBox::new(
            coord("xmin")?,
            coord("ymin")?,
            coord("xmax")?,
            coord("ymax")?,
        )
        .map_err(|e| fail(e.to_string()))?;
        regions.push(RegionRecord {
            bbox,
            kind: name.to_lowercase(),
            score: None,
            rows: None,
        });
    }
    Ok(PageRecord { page, regions })
}

pub fn read_voc(path: &Path) -> Result<PageRecord> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_voc(&text, &page_id(path), path)
}
