//! DOTA file formats and huge-image split/merge planning.
//!
//! Annotation files (DOTA v1.0) hold one object per line:
//!
//! ```text
//! imagesource:GoogleEarth
//! gsd:0.146343590398
//! x1 y1 x2 y2 x3 y3 x4 y4 category difficult
//! ```
//!
//! Task1 result files are one per category, named `Task1_<category>.txt`,
//! with lines `image_id score x1 y1 x2 y2 x3 y3 x4 y4`.
//!
//! Large images are tiled into overlapping windows ([`split_plan`]); ground
//! truth is distributed to windows ([`clip_annotations`]) and per-window
//! detections are mapped back and de-duplicated ([`merge_results`]). All of
//! this is coordinate arithmetic; no pixels are touched.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{DetectionRecord, GroundTruthRecord};
use crate::geometry::{quad_to_rbox, rbox_to_quad, AngleConvention, GeometryError, Point, QuadPoly};
use crate::overlap::{clip_polygon, rotated_nms, OverlapError, ScoredBox};

pub const DEFAULT_WINDOW: u32 = 1024;
pub const DEFAULT_GAP: u32 = 200;
pub const DEFAULT_KEEP_FRAC: f64 = 0.7;
pub const DEFAULT_MERGE_NMS_THR: f64 = 0.1;

const RESULT_PREFIX: &str = "Task1_";

#[derive(Debug, Error)]
pub enum DotaError {
    #[error("{source_name}:{line}: {message}")]
    Parse { source_name: String, line: usize, message: String },
    #[error("invalid split geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Overlap(#[from] OverlapError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DotaError + '_ {
    move |source| DotaError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub quad: QuadPoly,
    pub category: String,
    pub difficult: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AnnotationFile {
    pub image_id: String,
    pub records: Vec<AnnotationRecord>,
}

impl AnnotationFile {
    /// Converts each quad to its minimum-area rectangle in `convention`.
    pub fn to_ground_truth(&self, convention: AngleConvention) -> Result<Vec<GroundTruthRecord>, DotaError> {
        self.records
            .iter()
            .map(|r| {
                Ok(GroundTruthRecord {
                    image_id: self.image_id.clone(),
                    rbox: quad_to_rbox(&r.quad, convention)?,
                    category: r.category.clone(),
                    difficult: r.difficult,
                })
            })
            .collect()
    }
}

/// Formats a coordinate or score with six decimals. Rust's fixed-precision
/// formatting is exact, rounding ties to even.
pub fn fmt_f6(v: f64) -> String {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

fn parse_err(source_name: &str, line: usize, message: impl Into<String>) -> DotaError {
    DotaError::Parse { source_name: source_name.to_string(), line, message: message.into() }
}

fn parse_coords(tokens: &[&str], source_name: &str, line: usize) -> Result<[f64; 8], DotaError> {
    let mut c = [0.0; 8];
    for (slot, tok) in c.iter_mut().zip(tokens) {
        let v: f64 =
            tok.parse().map_err(|_| parse_err(source_name, line, format!("non-numeric coordinate `{tok}`")))?;
        if !v.is_finite() {
            return Err(parse_err(source_name, line, format!("non-finite coordinate `{tok}`")));
        }
        *slot = v;
    }
    Ok(c)
}

/// Parses DOTA v1.0 annotation text. `imagesource`/`gsd` metadata lines and
/// blank lines are skipped.
pub fn parse_annotation(text: &str, image_id: &str) -> Result<AnnotationFile, DotaError> {
    let mut records = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with("imagesource") || line.starts_with("gsd") {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 10 {
            return Err(parse_err(
                image_id,
                line_no,
                format!("expected 10 fields (8 coordinates, category, difficult), found {}", tokens.len()),
            ));
        }
        let coords = parse_coords(&tokens[..8], image_id, line_no)?;
        let difficult = match tokens[9] {
            "0" => false,
            "1" => true,
            other => return Err(parse_err(image_id, line_no, format!("difficult flag `{other}` is not 0 or 1"))),
        };
        records.push(AnnotationRecord {
            quad: QuadPoly::from_flat(coords),
            category: tokens[8].to_string(),
            difficult,
        });
    }
    Ok(AnnotationFile { image_id: image_id.to_string(), records })
}

pub fn write_annotation(ann: &AnnotationFile) -> String {
    let mut out = String::new();
    for r in &ann.records {
        for v in r.quad.to_flat() {
            out.push_str(&fmt_f6(v));
            out.push(' ');
        }
        let _ = writeln!(out, "{} {}", r.category, u8::from(r.difficult));
    }
    out
}

pub fn result_file_name(category: &str) -> String {
    format!("{RESULT_PREFIX}{category}.txt")
}

/// Category encoded in a `Task1_<category>.txt` file name.
pub fn category_from_file_name(name: &str) -> Option<&str> {
    name.strip_prefix(RESULT_PREFIX)?.strip_suffix(".txt").filter(|c| !c.is_empty())
}

/// Renders Task1 result files, keyed by file name. Lines keep input order
/// within each category.
pub fn write_results(dets: &[DetectionRecord]) -> Result<BTreeMap<String, String>, DotaError> {
    let mut files: BTreeMap<String, String> = BTreeMap::new();
    for d in dets {
        let quad = rbox_to_quad(&d.rbox)?;
        let out = files.entry(result_file_name(&d.category)).or_default();
        out.push_str(&d.image_id);
        out.push(' ');
        out.push_str(&fmt_f6(d.score));
        for v in quad.to_flat() {
            out.push(' ');
            out.push_str(&fmt_f6(v));
        }
        out.push('\n');
    }
    Ok(files)
}

/// Parses one Task1 file's content. Quads are converted to boxes in
/// `convention`.
pub fn parse_results(
    category: &str,
    text: &str,
    convention: AngleConvention,
    source_name: &str,
) -> Result<Vec<DetectionRecord>, DotaError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 10 {
            return Err(parse_err(
                source_name,
                line_no,
                format!("expected 10 fields (image_id, score, 8 coordinates), found {}", tokens.len()),
            ));
        }
        let score: f64 = tokens[1]
            .parse()
            .map_err(|_| parse_err(source_name, line_no, format!("non-numeric score `{}`", tokens[1])))?;
        if !(0.0..=1.0).contains(&score) {
            return Err(parse_err(source_name, line_no, format!("score {score} outside [0, 1]")));
        }
        let coords = parse_coords(&tokens[2..], source_name, line_no)?;
        out.push(DetectionRecord {
            image_id: tokens[0].to_string(),
            rbox: quad_to_rbox(&QuadPoly::from_flat(coords), convention)?,
            category: category.to_string(),
            score,
        });
    }
    Ok(out)
}

fn sorted_txt_files(dir: &Path) -> Result<Vec<PathBuf>, DotaError> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "txt") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn file_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Reads every `*.txt` annotation file in `dir`; the image id is the file stem.
pub fn read_annotation_dir(dir: &Path) -> Result<Vec<AnnotationFile>, DotaError> {
    sorted_txt_files(dir)?
        .into_iter()
        .map(|path| {
            let text = fs::read_to_string(&path).map_err(io_err(&path))?;
            parse_annotation(&text, &file_stem(&path)).map_err(|e| match e {
                DotaError::Parse { line, message, .. } => {
                    DotaError::Parse { source_name: path.display().to_string(), line, message }
                }
                other => other,
            })
        })
        .collect()
}

/// Reads every `Task1_<category>.txt` file in `dir`, in file-name order.
pub fn read_results_dir(dir: &Path, convention: AngleConvention) -> Result<Vec<DetectionRecord>, DotaError> {
    let mut out = Vec::new();
    for path in sorted_txt_files(dir)? {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let Some(category) = category_from_file_name(&name) else {
            continue;
        };
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        out.extend(parse_results(category, &text, convention, &path.display().to_string())?);
    }
    Ok(out)
}

pub fn write_results_dir(dir: &Path, dets: &[DetectionRecord]) -> Result<Vec<PathBuf>, DotaError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    for (name, content) in write_results(dets)? {
        let path = dir.join(name);
        fs::write(&path, content).map_err(io_err(&path))?;
        written.push(path);
    }
    Ok(written)
}

/// Axis-aligned window `[x0, x1) x [y0, y1)` in image pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Window {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl Window {
    pub fn width(&self) -> u32 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> u32 {
        self.y1 - self.y0
    }

    pub fn contains_pixel(&self, x: u32, y: u32) -> bool {
        (self.x0..self.x1).contains(&x) && (self.y0..self.y1).contains(&y)
    }

    fn polygon(&self) -> [Point; 4] {
        let (x0, y0, x1, y1) = (self.x0 as f64, self.y0 as f64, self.x1 as f64, self.y1 as f64);
        [Point::new(x0, y0), Point::new(x1, y0), Point::new(x1, y1), Point::new(x0, y1)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    /// Size of the (possibly rescaled) image the windows tile.
    pub image_size: (u32, u32),
    pub window: u32,
    pub gap: u32,
    /// Factor applied to original coordinates before tiling.
    pub scale: f64,
    pub windows: Vec<Window>,
}

fn axis_starts(len: u32, window: u32, stride: u32) -> Vec<u32> {
    let mut starts = Vec::new();
    let mut start = 0u32;
    loop {
        if start as u64 + window as u64 >= len as u64 {
            starts.push(len.saturating_sub(window));
            break;
        }
        starts.push(start);
        start += stride;
    }
    starts.sort_unstable();
    starts.dedup();
    starts
}

/// Tiles a `width x height` image with `window`-sized squares overlapping by
/// `gap`. Per axis the starts are `0, s, 2s, ...` with `s = window - gap`;
/// the first start whose window would overrun the border is pulled back to
/// `max(0, len - window)`. Windows are ordered row by row.
pub fn split_plan(width: u32, height: u32, window: u32, gap: u32) -> Result<SplitPlan, DotaError> {
    if window == 0 || gap >= window {
        return Err(DotaError::InvalidGeometry(format!("need 0 <= gap < window, got gap={gap}, window={window}")));
    }
    if width == 0 || height == 0 {
        return Err(DotaError::InvalidGeometry(format!("empty image {width}x{height}")));
    }
    let stride = window - gap;
    let xs = axis_starts(width, window, stride);
    let ys = axis_starts(height, window, stride);
    let windows = ys
        .iter()
        .flat_map(|&y0| {
            xs.iter().map(move |&x0| Window { x0, y0, x1: (x0 + window).min(width), y1: (y0 + window).min(height) })
        })
        .collect();
    Ok(SplitPlan { image_size: (width, height), window, gap, scale: 1.0, windows })
}

/// One plan per scale factor, each tiling the image resized by that factor.
pub fn multiscale_plans(
    width: u32,
    height: u32,
    window: u32,
    gap: u32,
    scales: &[f64],
) -> Result<Vec<SplitPlan>, DotaError> {
    scales
        .iter()
        .map(|&s| {
            if !(s.is_finite() && s > 0.0) {
                return Err(DotaError::InvalidArgument(format!("scale {s} must be positive")));
            }
            let sw = ((width as f64 * s).round() as u32).max(1);
            let sh = ((height as f64 * s).round() as u32).max(1);
            let mut plan = split_plan(sw, sh, window, gap)?;
            plan.scale = s;
            Ok(plan)
        })
        .collect()
}

/// `<image>__<scale>__<x0>___<y0>`, the patch naming used by DOTA tooling.
pub fn window_image_id(image_id: &str, scale: f64, w: &Window) -> String {
    format!("{image_id}__{scale}__{}___{}", w.x0, w.y0)
}

/// Inverse of [`window_image_id`]: `(image_id, scale, x0, y0)`.
pub fn parse_window_image_id(id: &str) -> Option<(String, f64, u32, u32)> {
    let (head, y0) = id.rsplit_once("___")?;
    let (head, x0) = head.rsplit_once("__")?;
    let (image, scale) = head.rsplit_once("__")?;
    if image.is_empty() {
        return None;
    }
    Some((image.to_string(), scale.parse().ok()?, x0.parse().ok()?, y0.parse().ok()?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowAnnotations {
    pub window: Window,
    /// Records in window-local coordinates; `image_id` is the patch id.
    pub file: AnnotationFile,
}

/// Fraction of the quad's area lying inside `window`. Zero-area quads count
/// as fully inside when all their vertices are.
fn inside_fraction(quad: &QuadPoly, window: &Window) -> f64 {
    let area = quad.area();
    let rect = window.polygon();
    if area <= 1e-12 {
        let (x0, y0, x1, y1) = (rect[0].x, rect[0].y, rect[2].x, rect[2].y);
        let inside = quad.vertices.iter().all(|p| p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1);
        return if inside { 1.0 } else { 0.0 };
    }
    let clipped = clip_polygon(&quad.vertices, &rect);
    (crate::geometry::shoelace(&clipped).abs() / area).min(1.0)
}

/// Distributes annotations to the windows of `plan`.
///
/// Coordinates are first multiplied by `plan.scale`. For each window an
/// object is kept when `r = area(quad ∩ window) / area(quad) >= keep_frac`;
/// objects with `0 < r < keep_frac` are kept but marked difficult. Kept quads
/// are translated to window-local coordinates without being cut.
pub fn clip_annotations(
    ann: &AnnotationFile,
    plan: &SplitPlan,
    keep_frac: f64,
) -> Result<Vec<WindowAnnotations>, DotaError> {
    if !(keep_frac > 0.0 && keep_frac <= 1.0) {
        return Err(DotaError::InvalidArgument(format!("keep_frac {keep_frac} outside (0, 1]")));
    }
    let scaled: Vec<QuadPoly> = ann.records.iter().map(|r| r.quad.scaled(plan.scale)).collect();
    Ok(plan
        .windows
        .iter()
        .map(|w| {
            let records = ann
                .records
                .iter()
                .zip(&scaled)
                .filter_map(|(r, q)| {
                    let frac = inside_fraction(q, w);
                    if frac <= 0.0 {
                        return None;
                    }
                    Some(AnnotationRecord {
                        quad: q.translated(-(w.x0 as f64), -(w.y0 as f64)),
                        category: r.category.clone(),
                        difficult: r.difficult || frac < keep_frac,
                    })
                })
                .collect();
            WindowAnnotations {
                window: *w,
                file: AnnotationFile { image_id: window_image_id(&ann.image_id, plan.scale, w), records },
            }
        })
        .collect())
}

/// Detections from one window, in window-local coordinates of the image
/// rescaled by `scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchDetection {
    /// Id of the full image the window was cut from.
    pub image_id: String,
    pub origin: (f64, f64),
    pub scale: f64,
    pub detections: Vec<DetectionRecord>,
}

/// Groups detections whose image ids follow [`window_image_id`] into patches.
/// Detections with other ids are treated as full-image detections.
pub fn patches_from_results(dets: Vec<DetectionRecord>) -> Vec<PatchDetection> {
    let mut patches: BTreeMap<String, PatchDetection> = BTreeMap::new();
    for d in dets {
        let (image_id, scale, x0, y0) =
            parse_window_image_id(&d.image_id).unwrap_or_else(|| (d.image_id.clone(), 1.0, 0, 0));
        patches
            .entry(d.image_id.clone())
            .or_insert_with(|| PatchDetection {
                image_id,
                origin: (x0 as f64, y0 as f64),
                scale,
                detections: Vec::new(),
            })
            .detections
            .push(d);
    }
    patches.into_values().collect()
}

/// Maps patch detections back to full-image coordinates and removes
/// cross-window duplicates with rotated NMS per (image, category). Output is
/// sorted by descending score; ties keep input order.
pub fn merge_results(patches: &[PatchDetection], nms_thr: f64) -> Result<Vec<DetectionRecord>, DotaError> {
    let mut global = Vec::new();
    for p in patches {
        if !(p.scale.is_finite() && p.scale > 0.0) {
            return Err(DotaError::InvalidArgument(format!("patch scale {} must be positive", p.scale)));
        }
        for d in &p.detections {
            let rbox = d.rbox.translated(p.origin.0, p.origin.1).scaled(1.0 / p.scale);
            global.push(DetectionRecord {
                image_id: p.image_id.clone(),
                rbox,
                category: d.category.clone(),
                score: d.score,
            });
        }
    }

    let mut groups: BTreeMap<(&str, &str), Vec<ScoredBox>> = BTreeMap::new();
    for (i, d) in global.iter().enumerate() {
        groups.entry((&d.image_id, &d.category)).or_default().push(ScoredBox::new(d.rbox, d.score, i));
    }
    let mut kept = Vec::new();
    for group in groups.values() {
        kept.extend(rotated_nms(group, nms_thr)?);
    }
    kept.sort_by(|&a, &b| global[b].score.total_cmp(&global[a].score).then(a.cmp(&b)));
    Ok(kept.into_iter().map(|i| global[i].clone()).collect())
}
