//! Tabular structure detection in document images.
//!
//! Rows of a candidate region are described by how much of each
//! character-width partition their content covers horizontally. Rows whose
//! coverage vectors are close in normalized Euclidean distance are
//! structurally similar, and a block of mostly similar rows is reported as a
//! tabular structure. Structures with several columns per row that do not
//! sit inside a plot frame are promoted to tables.
//!
//! The crate also ships the IOU-based evaluation used to score detections
//! and a synthetic page generator with exact ground truth.

pub mod detector;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod io;
pub mod page;
pub mod row_model;
pub mod similarity;
pub mod synth;

pub use detector::{
    detect_page, detect_tabular_regions, refine_tables, DetectionConfig, PairMode, RegionKind,
    TabularRegion,
};
pub use error::{Error, Result};
pub use evaluation::{evaluate_corpus, match_detections, EvalOptions, Metrics};
pub use geometry::{iou, BBox, Point};
pub use page::{BinaryImage, GrayImage};
pub use row_model::{FeatureVector, RowElement, SubElement};
pub use similarity::{pairwise_tssm, tssm, SimilarityMatrix};
