mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use rayon::prelude::*;
use tssm_core::evaluation::KindFilter;
use tssm_core::io::{self, PageRecord, RegionRecord};
use tssm_core::{
    detect_page, evaluate_corpus, DetectionConfig, Error, EvalOptions, PairMode, RegionKind,
};

/// A failed command: process exit code plus a message for stderr.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn unreadable(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }

    pub fn unwritable(message: impl Into<String>) -> Self {
        Self {
            code: 4,
            message: message.into(),
        }
    }

    /// Maps a library error raised while reading (`code` 3) or writing
    /// (`code` 4). Config and page-set errors keep their own codes.
    fn from_core(e: Error, code: u8) -> Self {
        let code = match e {
            Error::InvalidConfig(_) => 2,
            Error::UnknownPage(_) | Error::MissingPage(_) => 5,
            _ => code,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<(), Failure>;

#[derive(Parser)]
#[command(
    name = "tssm",
    version,
    about = "Tabular structure detection in document images"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect tabular regions in an image or a directory of images
    Detect(DetectArgs),
    /// Score detections against ground truth
    Eval(EvalArgs),
    /// Write a synthetic corpus with ground truth and a manifest
    Synth(SynthArgs),
    /// Convert PASCAL-VOC XML annotations into ground-truth JSON
    ConvertVoc(ConvertVocArgs),
}

#[derive(Args)]
struct DetectArgs {
    /// PNG or PGM page, or a directory of them
    #[arg(long)]
    input: PathBuf,
    /// JSON object of detection parameters
    #[arg(long)]
    config: Option<PathBuf>,
    /// ignore unknown keys in the config file instead of failing
    #[arg(long)]
    lenient_config: bool,
    #[arg(long)]
    out: PathBuf,
    /// directory for PNG copies with region outlines burned in
    #[arg(long)]
    overlay: Option<PathBuf>,
    /// ground truth to draw on the overlays
    #[arg(long, requires = "overlay")]
    groundtruth: Option<PathBuf>,
    /// keep only regions promoted to tables
    #[arg(long)]
    tables_only: bool,
    /// worker threads; defaults to the number of logical processors
    #[arg(long)]
    jobs: Option<usize>,

    #[arg(long)]
    th_sim: Option<f64>,
    #[arg(long)]
    th_w_factor: Option<f64>,
    /// absolute gap threshold in pixels
    #[arg(long)]
    th_w_abs: Option<f64>,
    #[arg(long)]
    min_rows: Option<usize>,
    #[arg(long)]
    adj_fraction: Option<f64>,
    #[arg(long)]
    min_columns: Option<usize>,
    #[arg(long)]
    gap_factor: Option<f64>,
    #[arg(long)]
    noise_min_area: Option<u64>,
    #[arg(long)]
    line_overlap: Option<f64>,
    /// score all row pairs instead of adjacent ones
    #[arg(long)]
    all_pairs: bool,
}

impl DetectArgs {
    fn resolve_config(&self) -> Result<DetectionConfig, Failure> {
        let mut cfg = match &self.config {
            Some(path) => config::load_config(path, !self.lenient_config)?,
            None => DetectionConfig::default(),
        };
        if let Some(v) = self.th_sim {
            cfg.th_sim = v;
        }
        if let Some(v) = self.th_w_factor {
            cfg.th_w_factor = v;
        }
        if let Some(v) = self.th_w_abs {
            cfg.th_w_abs = Some(v);
        }
        if let Some(v) = self.min_rows {
            cfg.min_rows = v;
        }
        if let Some(v) = self.adj_fraction {
            cfg.adj_fraction = v;
        }
        if let Some(v) = self.min_columns {
            cfg.min_columns = v;
        }
        if let Some(v) = self.gap_factor {
            cfg.gap_factor = v;
        }
        if let Some(v) = self.noise_min_area {
            cfg.noise_min_area = v;
        }
        if let Some(v) = self.line_overlap {
            cfg.line_overlap = v;
        }
        if self.all_pairs {
            cfg.pair_mode = PairMode::AllPairs;
        }
        cfg.validate().map_err(|e| Failure::from_core(e, 2))?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct EvalArgs {
    /// detection JSON file or directory
    #[arg(long)]
    detections: PathBuf,
    /// ground-truth JSON file or directory
    #[arg(long)]
    groundtruth: PathBuf,
    #[arg(long, default_value_t = tssm_core::evaluation::DEFAULT_IOU_THRESHOLD)]
    iou_threshold: f64,
    /// fail with exit code 5 when the page sets differ
    #[arg(long)]
    strict: bool,
    /// also count tabular_structure regions on both sides
    #[arg(long)]
    include_structures: bool,
    /// write a JSON report with per-page counts
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    pages: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ConvertVocArgs {
    /// VOC XML file or a directory of them
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TSSM_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Detect(args) => detect(args),
        Command::Eval(args) => eval(args),
        Command::Synth(args) => synth(args),
        Command::ConvertVoc(args) => convert_voc(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn write_output(path: &Path, text: &str) -> CmdResult {
    fs::write(path, text).map_err(|e| Failure::unwritable(format!("{}: {e}", path.display())))
}

fn detect(args: DetectArgs) -> CmdResult {
    let cfg = args.resolve_config()?;
    if !args.input.exists() {
        return Err(Failure::unreadable(format!(
            "{}: no such file or directory",
            args.input.display()
        )));
    }
    let batch = args.input.is_dir();
    let files = if batch {
        io::image_files(&args.input).map_err(|e| Failure::from_core(e, 3))?
    } else {
        vec![args.input.clone()]
    };
    if batch && files.is_empty() {
        warn!("no PNG or PGM images in {}", args.input.display());
    }
    let mut ids: Vec<(String, PathBuf)> = files.into_iter().map(|f| (io::page_id(&f), f)).collect();
    ids.sort();
    if let Some(w) = ids.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Failure::usage(format!(
            "page id `{}` is shared by {} and {}",
            w[0].0,
            w[0].1.display(),
            w[1].1.display()
        )));
    }

    let truth = match &args.groundtruth {
        Some(p) => io::read_page_records(p).map_err(|e| Failure::from_core(e, 3))?,
        None => Vec::new(),
    };
    if let Some(dir) = &args.overlay {
        fs::create_dir_all(dir)
            .map_err(|e| Failure::unwritable(format!("{}: {e}", dir.display())))?;
    }

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = args.jobs {
        if jobs == 0 {
            return Err(Failure::usage("--jobs must be at least 1"));
        }
        pool = pool.num_threads(jobs);
    }
    let pool = pool
        .build()
        .map_err(|e| Failure::usage(format!("cannot start worker pool: {e}")))?;

    let run_page = |(page, path): &(String, PathBuf)| -> Result<PageRecord, Failure> {
        let img = io::load_image(path).map_err(|e| Failure::from_core(e, 3))?;
        let regions = detect_page(&img, &cfg).map_err(|e| Failure::from_core(e, 3))?;
        let mut record = PageRecord::from_regions(page.clone(), &regions);
        if args.tables_only {
            record.retain_kind(RegionKind::Table);
        }
        info!("{page}: {} region(s)", record.regions.len());
        if let Some(dir) = &args.overlay {
            let gt: &[RegionRecord] = truth
                .iter()
                .find(|t| &t.page == page)
                .map(|t| t.regions.as_slice())
                .unwrap_or(&[]);
            let canvas = io::render_overlay(&img, gt, &record.regions);
            io::save_overlay(&canvas, &dir.join(format!("{page}.png")))
                .map_err(|e| Failure::from_core(e, 4))?;
        }
        Ok(record)
    };
    // ids are sorted, and collect keeps input order whatever the scheduling
    let records = pool.install(|| ids.par_iter().map(run_page).collect::<Result<Vec<_>, _>>())?;

    let text = if batch {
        io::to_json_string(&records)
    } else {
        io::to_json_string(&records[0])
    };
    write_output(&args.out, &text)
}

fn eval(args: EvalArgs) -> CmdResult {
    if !(args.iou_threshold > 0.0 && args.iou_threshold <= 1.0) {
        return Err(Failure::usage(format!(
            "--iou-threshold must lie in (0, 1], got {}",
            args.iou_threshold
        )));
    }
    let dets = io::read_page_records(&args.detections).map_err(|e| Failure::from_core(e, 3))?;
    let gts = io::read_page_records(&args.groundtruth).map_err(|e| Failure::from_core(e, 3))?;
    let opts = EvalOptions {
        iou_threshold: args.iou_threshold,
        strict: args.strict,
        kinds: if args.include_structures {
            KindFilter::WithStructures
        } else {
            KindFilter::TablesOnly
        },
    };
    let report = evaluate_corpus(&dets, &gts, &opts).map_err(|e| Failure::from_core(e, 3))?;
    println!("{}", report.metrics.summary());
    if let Some(path) = &args.report {
        write_output(path, &io::to_json_string(&report))?;
    }
    Ok(())
}

fn synth(args: SynthArgs) -> CmdResult {
    if args.pages == 0 {
        return Err(Failure::usage("--pages must be at least 1"));
    }
    let manifest = tssm_core::synth::generate_corpus(args.pages, args.seed, &args.out)
        .map_err(|e| Failure::from_core(e, 4))?;
    let tables: usize = manifest.iter().map(|m| m.table_count).sum();
    println!(
        "wrote {} pages with {tables} tables to {}",
        manifest.len(),
        args.out.display()
    );
    Ok(())
}

fn convert_voc(args: ConvertVocArgs) -> CmdResult {
    let files = if args.input.is_dir() {
        let entries = fs::read_dir(&args.input)
            .map_err(|e| Failure::unreadable(format!("{}: {e}", args.input.display())))?;
        let mut files: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("xml")))
            .collect();
        files.sort();
        files
    } else {
        vec![args.input.clone()]
    };
    let mut records = files
        .iter()
        .map(|f| io::read_voc(f).map_err(|e| Failure::from_core(e, 3)))
        .collect::<Result<Vec<_>, _>>()?;
    records.sort_by(|a, b| a.page.cmp(&b.page));
    write_output(&args.out, &io::to_json_string(&records))
}
