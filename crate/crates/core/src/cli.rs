//! The `obbkit` command line.
//!
//! Box tables use a plain CSV with header `cx,cy,w,h,theta,conv` (plus
//! `score` for `nms`). Angles are radians unless `--degrees` is passed.
//!
//! Exit codes: 0 success, 1 invalid input or flags, 2 I/O failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::dota_io::{
    self, clip_annotations, merge_results, multiscale_plans, patches_from_results, read_annotation_dir,
    read_results_dir, write_annotation, write_results_dir, DotaError,
};
use crate::eval::{confusion_matrix, evaluate, ApMode, DetectionRecord, GroundTruthRecord};
use crate::gaussian_metrics::{box_distance, loss_transform, GaussianDistanceKind};
use crate::geometry::{convert, normalize, AngleConvention, RotatedBox};
use crate::overlap::{iou_matrix, rotated_iou, rotated_nms, ScoredBox};

#[derive(Debug, Parser)]
#[command(name = "obbkit", version, about = "Oriented bounding box geometry, metrics and DOTA evaluation tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Re-express boxes in another angle convention.
    Convert(ConvertArgs),
    /// Rotated IoU for box pairs, or a full IoU matrix.
    Iou(IouArgs),
    /// Rotated non-maximum suppression over scored boxes.
    Nms(NmsArgs),
    /// Gaussian distance (GWD, KLD, KFIoU) for box pairs.
    Dist(DistArgs),
    /// Per-class AP and mAP for DOTA Task1 results.
    Eval(EvalArgs),
    /// Class confusion matrix for DOTA Task1 results.
    Confusion(ConfusionArgs),
    /// Tile huge images into overlapping windows and distribute annotations.
    Split(SplitArgs),
    /// Map per-window results back to full images and remove duplicates.
    Merge(MergeArgs),
}

#[derive(Debug, Args)]
struct AngleArgs {
    /// Read and write theta in degrees instead of radians.
    #[arg(long)]
    degrees: bool,
}

#[derive(Debug, Args)]
struct ConvertArgs {
    /// Convention of the input rows; overrides the `conv` column.
    #[arg(long, value_parser = parse_convention)]
    from: Option<AngleConvention>,
    /// Target convention.
    #[arg(long, value_parser = parse_convention)]
    to: AngleConvention,
    /// Box CSV (default: stdin).
    #[arg(long)]
    input: Option<PathBuf>,
    #[command(flatten)]
    angle: AngleArgs,
}

#[derive(Debug, Args)]
struct PairInput {
    /// Box CSV read as consecutive pairs (rows 1-2, 3-4, ...). Default: stdin.
    #[arg(long, conflicts_with_all = ["a", "b"])]
    input: Option<PathBuf>,
    /// First box CSV; paired row by row with --b.
    #[arg(long, requires = "b")]
    a: Option<PathBuf>,
    /// Second box CSV.
    #[arg(long, requires = "a")]
    b: Option<PathBuf>,
    /// Convention assumed for rows without a `conv` column.
    #[arg(long, default_value = "le90", value_parser = parse_convention)]
    convention: AngleConvention,
    #[command(flatten)]
    angle: AngleArgs,
}

#[derive(Debug, Args)]
struct IouArgs {
    #[command(flatten)]
    pairs: PairInput,
    /// With --a/--b, print the full |a| x |b| matrix.
    #[arg(long, requires = "a")]
    matrix: bool,
}

#[derive(Debug, Args)]
struct NmsArgs {
    /// Box CSV with a `score` column (default: stdin).
    #[arg(long)]
    input: Option<PathBuf>,
    /// A box is suppressed when its IoU with a kept box exceeds this.
    #[arg(long, default_value_t = dota_io::DEFAULT_MERGE_NMS_THR, value_parser = parse_ratio)]
    iou_thr: f64,
    /// Convention assumed for rows without a `conv` column.
    #[arg(long, default_value = "le90", value_parser = parse_convention)]
    convention: AngleConvention,
    #[command(flatten)]
    angle: AngleArgs,
}

#[derive(Debug, Args)]
struct DistArgs {
    #[command(flatten)]
    pairs: PairInput,
    /// gwd, kld, kld-sym or kfiou.
    #[arg(long, default_value = "gwd", value_parser = parse_kind)]
    kind: GaussianDistanceKind,
    /// Map distances to 1 - 1/(tau + ln(1 + d)). Not applied to kfiou.
    #[arg(long)]
    loss: bool,
    /// Offset in the loss mapping; must be positive.
    #[arg(long, default_value_t = crate::gaussian_metrics::DEFAULT_TAU)]
    tau: f64,
}

#[derive(Debug, Args)]
struct DatasetArgs {
    /// Directory of DOTA annotation files, one `<image_id>.txt` per image.
    #[arg(long)]
    gt: PathBuf,
    /// Directory of `Task1_<category>.txt` result files.
    #[arg(long)]
    det: PathBuf,
    /// Minimum IoU for a match.
    #[arg(long, default_value_t = crate::eval::DEFAULT_IOU_THR, value_parser = parse_ratio)]
    iou_thr: f64,
    /// Convention used when turning quads into boxes.
    #[arg(long, default_value = "le90", value_parser = parse_convention)]
    convention: AngleConvention,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    data: DatasetArgs,
    /// voc07 (11-point) or continuous.
    #[arg(long, default_value = "voc07", value_parser = parse_mode)]
    mode: ApMode,
    /// Also write the full report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ConfusionArgs {
    #[command(flatten)]
    data: DatasetArgs,
    /// Detections below this score are ignored.
    #[arg(long, default_value_t = crate::eval::DEFAULT_CONFUSION_SCORE_THR, value_parser = parse_ratio)]
    score_thr: f64,
    /// Comma-separated category order (default: sorted union of categories).
    #[arg(long, value_delimiter = ',')]
    categories: Option<Vec<String>>,
}

#[derive(Debug, Args)]
struct SplitArgs {
    /// Directory of DOTA annotation files.
    #[arg(long)]
    ann: PathBuf,
    /// Output directory for per-window annotation files and plan.csv.
    #[arg(long)]
    out: PathBuf,
    /// CSV `image_id,width,height` giving each image's size.
    #[arg(long)]
    sizes: Option<PathBuf>,
    /// Image width for images not listed in --sizes.
    #[arg(long, requires = "height")]
    width: Option<u32>,
    /// Image height for images not listed in --sizes.
    #[arg(long, requires = "width")]
    height: Option<u32>,
    /// Window side length in pixels.
    #[arg(long, default_value_t = dota_io::DEFAULT_WINDOW)]
    window: u32,
    /// Overlap between neighbouring windows in pixels.
    #[arg(long, default_value_t = dota_io::DEFAULT_GAP)]
    gap: u32,
    /// Objects with a smaller in-window area fraction are marked difficult.
    #[arg(long, default_value_t = dota_io::DEFAULT_KEEP_FRAC, value_parser = parse_ratio)]
    keep_frac: f64,
    /// Comma-separated scale factors.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    scales: Vec<f64>,
}

#[derive(Debug, Args)]
struct MergeArgs {
    /// Directory of per-window `Task1_<category>.txt` files.
    #[arg(long)]
    det: PathBuf,
    /// Output directory for merged result files.
    #[arg(long)]
    out: PathBuf,
    /// IoU above which cross-window duplicates are suppressed.
    #[arg(long, default_value_t = dota_io::DEFAULT_MERGE_NMS_THR, value_parser = parse_ratio)]
    nms_thr: f64,
    /// Convention used when turning quads into boxes.
    #[arg(long, default_value = "le90", value_parser = parse_convention)]
    convention: AngleConvention,
}

fn parse_convention(s: &str) -> Result<AngleConvention, String> {
    s.parse().map_err(|_| format!("`{s}` is not one of oc, le90, le135"))
}

fn parse_kind(s: &str) -> Result<GaussianDistanceKind, String> {
    s.parse().map_err(|_| format!("`{s}` is not one of gwd, kld, kld-sym, kfiou"))
}

fn parse_mode(s: &str) -> Result<ApMode, String> {
    s.parse()
}

fn parse_ratio(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

#[derive(Debug)]
enum CliError {
    Invalid(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Io(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Invalid(m) | CliError::Io(m) => m,
        }
    }
}

impl From<DotaError> for CliError {
    fn from(e: DotaError) -> Self {
        match e {
            DotaError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

fn invalid(msg: impl std::fmt::Display) -> CliError {
    CliError::Invalid(msg.to_string())
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Runs the CLI with explicit streams and returns the process exit code.
pub fn run<I, T>(args: I, stdin: &mut dyn Read, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = stdout.write_all(text.as_bytes());
                    0
                }
                _ => {
                    let _ = stderr.write_all(text.as_bytes());
                    1
                }
            };
        }
    };
    let mut out = String::new();
    let result = dispatch(cli.command, stdin, &mut out);
    if let Err(e) = stdout.write_all(out.as_bytes()).and_then(|_| stdout.flush()) {
        let _ = writeln!(stderr, "error: writing output: {e}");
        return 2;
    }
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message());
            e.code()
        }
    }
}

fn dispatch(cmd: Command, stdin: &mut dyn Read, out: &mut String) -> Result<(), CliError> {
    match cmd {
        Command::Convert(a) => cmd_convert(a, stdin, out),
        Command::Iou(a) => cmd_iou(a, stdin, out),
        Command::Nms(a) => cmd_nms(a, stdin, out),
        Command::Dist(a) => cmd_dist(a, stdin, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Confusion(a) => cmd_confusion(a, out),
        Command::Split(a) => cmd_split(a, out),
        Command::Merge(a) => cmd_merge(a, out),
    }
}

fn read_source(path: Option<&Path>, stdin: &mut dyn Read) -> Result<(String, String), CliError> {
    match path {
        Some(p) => fs::read_to_string(p).map(|t| (t, p.display().to_string())).map_err(|e| io_error(p, e)),
        None => {
            let mut text = String::new();
            stdin.read_to_string(&mut text).map_err(|e| CliError::Io(format!("stdin: {e}")))?;
            Ok((text, "stdin".to_string()))
        }
    }
}

/// Shortest round-trip decimal, with negative zero printed as `0`.
fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v}")
    }
}

struct BoxRow {
    rbox: RotatedBox,
    score: Option<f64>,
}

/// Parses a box CSV. The header names the columns; `conv` falls back to
/// `default_conv` and `override_conv` replaces it entirely.
fn parse_box_csv(
    text: &str,
    source: &str,
    default_conv: AngleConvention,
    override_conv: Option<AngleConvention>,
    degrees: bool,
    need_score: bool,
) -> Result<Vec<BoxRow>, CliError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let Some((_, header)) = lines.next() else {
        return Ok(Vec::new());
    };
    let cols: Vec<String> = header.split(',').map(|c| c.trim().to_ascii_lowercase()).collect();
    let find = |name: &str| cols.iter().position(|c| c == name);
    let mut idx = [0usize; 5];
    for (slot, name) in idx.iter_mut().zip(["cx", "cy", "w", "h", "theta"]) {
        *slot = find(name).ok_or_else(|| invalid(format!("{source}: header lacks column `{name}`")))?;
    }
    let conv_col = find("conv");
    let score_col = find("score");
    if need_score && score_col.is_none() {
        return Err(invalid(format!("{source}: header lacks column `score`")));
    }

    let mut rows = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != cols.len() {
            return Err(invalid(format!("{source}:{line_no}: expected {} fields, found {}", cols.len(), fields.len())));
        }
        let num = |col: usize| -> Result<f64, CliError> {
            fields[col]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| invalid(format!("{source}:{line_no}: `{}` is not a finite number", fields[col])))
        };
        let mut p = [0.0; 5];
        for (v, &c) in p.iter_mut().zip(&idx) {
            *v = num(c)?;
        }
        if degrees {
            p[4] = p[4].to_radians();
        }
        if p[2] < 0.0 || p[3] < 0.0 {
            return Err(invalid(format!("{source}:{line_no}: negative width or height")));
        }
        let conv = match (override_conv, conv_col) {
            (Some(c), _) => c,
            (None, Some(c)) => fields[c]
                .parse()
                .map_err(|_| invalid(format!("{source}:{line_no}: unknown convention `{}`", fields[c])))?,
            (None, None) => default_conv,
        };
        let score = score_col.map(num).transpose()?;
        rows.push(BoxRow { rbox: RotatedBox::unchecked(p[0], p[1], p[2], p[3], p[4], conv), score });
    }
    Ok(rows)
}

fn push_box(out: &mut String, b: &RotatedBox, degrees: bool) {
    let theta = if degrees { b.theta.to_degrees() } else { b.theta };
    let _ = write!(
        out,
        "{},{},{},{},{},{}",
        fmt_num(b.cx),
        fmt_num(b.cy),
        fmt_num(b.w),
        fmt_num(b.h),
        fmt_num(theta),
        b.convention
    );
}

fn cmd_convert(a: ConvertArgs, stdin: &mut dyn Read, out: &mut String) -> Result<(), CliError> {
    let (text, src) = read_source(a.input.as_deref(), stdin)?;
    let rows = parse_box_csv(&text, &src, AngleConvention::Le90, a.from, a.angle.degrees, false)?;
    if a.from.is_none() && !text.lines().next().unwrap_or("").contains("conv") && !rows.is_empty() {
        return Err(invalid("--from is required when the input has no `conv` column"));
    }
    out.push_str("cx,cy,w,h,theta,conv\n");
    for (i, r) in rows.iter().enumerate() {
        // normalize first so unnormalized input rows are accepted
        let src_box = normalize(&r.rbox, r.rbox.convention).map_err(|e| invalid(format!("row {}: {e}", i + 1)))?;
        let b = convert(&src_box, a.to).map_err(|e| invalid(format!("row {}: {e}", i + 1)))?;
        push_box(out, &b, a.angle.degrees);
        out.push('\n');
    }
    Ok(())
}

/// Resolves the pair-input flags into two equally long box lists.
fn load_pairs(p: &PairInput, stdin: &mut dyn Read) -> Result<(Vec<RotatedBox>, Vec<RotatedBox>), CliError> {
    let load = |path: Option<&Path>, stdin: &mut dyn Read| -> Result<Vec<RotatedBox>, CliError> {
        let (text, src) = read_source(path, stdin)?;
        Ok(parse_box_csv(&text, &src, p.convention, None, p.angle.degrees, false)?
            .into_iter()
            .map(|r| r.rbox)
            .collect())
    };
    if let (Some(a), Some(b)) = (&p.a, &p.b) {
        return Ok((load(Some(a), stdin)?, load(Some(b), stdin)?));
    }
    let all = load(p.input.as_deref(), stdin)?;
    if all.len() % 2 != 0 {
        return Err(invalid(format!("expected an even number of boxes for pairing, found {}", all.len())));
    }
    Ok(all.chunks(2).map(|c| (c[0], c[1])).unzip())
}

fn check_pair_lengths(a: &[RotatedBox], b: &[RotatedBox]) -> Result<(), CliError> {
    if a.len() != b.len() {
        return Err(invalid(format!("--a has {} rows but --b has {}", a.len(), b.len())));
    }
    Ok(())
}

fn cmd_iou(args: IouArgs, stdin: &mut dyn Read, out: &mut String) -> Result<(), CliError> {
    let (a, b) = load_pairs(&args.pairs, stdin)?;
    if args.matrix {
        let m = iou_matrix(&a, &b);
        for i in 0..m.rows {
            let row: Vec<String> = m.row(i).iter().map(|&v| fmt_num(v)).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        return Ok(());
    }
    check_pair_lengths(&a, &b)?;
    out.push_str("iou\n");
    for (x, y) in a.iter().zip(&b) {
        let _ = writeln!(out, "{}", fmt_num(rotated_iou(x, y)));
    }
    Ok(())
}

fn cmd_nms(a: NmsArgs, stdin: &mut dyn Read, out: &mut String) -> Result<(), CliError> {
    let (text, src) = read_source(a.input.as_deref(), stdin)?;
    let rows = parse_box_csv(&text, &src, a.convention, None, a.angle.degrees, true)?;
    let scored: Vec<ScoredBox> =
        rows.iter().enumerate().map(|(i, r)| ScoredBox::new(r.rbox, r.score.unwrap_or(0.0), i)).collect();
    let keep = rotated_nms(&scored, a.iou_thr).map_err(invalid)?;
    out.push_str("index,cx,cy,w,h,theta,conv,score\n");
    for i in keep {
        let _ = write!(out, "{i},");
        push_box(out, &rows[i].rbox, a.angle.degrees);
        let _ = writeln!(out, ",{}", fmt_num(scored[i].score));
    }
    Ok(())
}

fn cmd_dist(a: DistArgs, stdin: &mut dyn Read, out: &mut String) -> Result<(), CliError> {
    if !(a.tau.is_finite() && a.tau > 0.0) {
        return Err(invalid(format!("--tau {} must be positive", a.tau)));
    }
    let (x, y) = load_pairs(&a.pairs, stdin)?;
    check_pair_lengths(&x, &y)?;
    let apply_loss = a.loss && a.kind != GaussianDistanceKind::KfIou;
    let _ = writeln!(out, "{}", if apply_loss { format!("{}_loss", a.kind) } else { a.kind.to_string() });
    for (i, (p, q)) in x.iter().zip(&y).enumerate() {
        let mut d = box_distance(a.kind, p, q).map_err(|e| invalid(format!("pair {}: {e}", i + 1)))?;
        if apply_loss {
            d = loss_transform(d, a.tau).map_err(invalid)?;
        }
        let _ = writeln!(out, "{}", fmt_num(d));
    }
    Ok(())
}

fn load_dataset(d: &DatasetArgs) -> Result<(Vec<DetectionRecord>, Vec<GroundTruthRecord>), CliError> {
    for (flag, dir) in [("--gt", &d.gt), ("--det", &d.det)] {
        if !dir.is_dir() {
            return Err(CliError::Io(format!("{flag} {}: not a directory", dir.display())));
        }
    }
    let mut gts = Vec::new();
    for ann in read_annotation_dir(&d.gt)? {
        gts.extend(ann.to_ground_truth(d.convention)?);
    }
    let dets = read_results_dir(&d.det, d.convention)?;
    Ok((dets, gts))
}

fn cmd_eval(a: EvalArgs, out: &mut String) -> Result<(), CliError> {
    let (dets, gts) = load_dataset(&a.data)?;
    let report = evaluate(&dets, &gts, a.data.iou_thr, a.mode).map_err(invalid)?;
    out.push_str(&report.to_csv());
    if let Some(path) = &a.json {
        fs::write(path, report.to_json()).map_err(|e| io_error(path, e))?;
    }
    Ok(())
}

fn cmd_confusion(a: ConfusionArgs, out: &mut String) -> Result<(), CliError> {
    let (dets, gts) = load_dataset(&a.data)?;
    let categories = match a.categories {
        Some(c) => c,
        None => {
            let set: std::collections::BTreeSet<&str> =
                gts.iter().map(|g| g.category.as_str()).chain(dets.iter().map(|d| d.category.as_str())).collect();
            set.into_iter().map(str::to_string).collect()
        }
    };
    let cm = confusion_matrix(&dets, &gts, &categories, a.data.iou_thr, a.score_thr).map_err(invalid)?;
    out.push_str(&cm.to_csv());
    Ok(())
}

fn read_sizes(path: &Path) -> Result<std::collections::HashMap<String, (u32, u32)>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let mut sizes = std::collections::HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if line.trim().is_empty() || (i == 0 && f.first() == Some(&"image_id")) {
            continue;
        }
        let parsed = match f.as_slice() {
            [id, w, h] => w.parse().ok().zip(h.parse().ok()).map(|s| (id.to_string(), s)),
            _ => None,
        };
        let (id, size) =
            parsed.ok_or_else(|| invalid(format!("{}:{}: expected `image_id,width,height`", path.display(), i + 1)))?;
        sizes.insert(id, size);
    }
    Ok(sizes)
}

fn cmd_split(a: SplitArgs, out: &mut String) -> Result<(), CliError> {
    let sizes = match &a.sizes {
        Some(p) => read_sizes(p)?,
        None => Default::default(),
    };
    let anns = read_annotation_dir(&a.ann)?;
    fs::create_dir_all(&a.out).map_err(|e| io_error(&a.out, e))?;
    let mut plan_csv = String::from("image_id,patch_id,scale,x0,y0,x1,y1,objects\n");
    let mut patches = 0usize;
    for ann in &anns {
        let (w, h) = match (sizes.get(&ann.image_id), a.width.zip(a.height)) {
            (Some(&s), _) | (None, Some(s)) => s,
            (None, None) => {
                return Err(invalid(format!("no size for image `{}`; pass --sizes or --width/--height", ann.image_id)))
            }
        };
        for plan in multiscale_plans(w, h, a.window, a.gap, &a.scales)? {
            for wa in clip_annotations(ann, &plan, a.keep_frac)? {
                let path = a.out.join(format!("{}.txt", wa.file.image_id));
                fs::write(&path, write_annotation(&wa.file)).map_err(|e| io_error(&path, e))?;
                let win = wa.window;
                let _ = writeln!(
                    plan_csv,
                    "{},{},{},{},{},{},{},{}",
                    ann.image_id,
                    wa.file.image_id,
                    plan.scale,
                    win.x0,
                    win.y0,
                    win.x1,
                    win.y1,
                    wa.file.records.len()
                );
                patches += 1;
            }
        }
    }
    let plan_path = a.out.join("plan.csv");
    fs::write(&plan_path, plan_csv).map_err(|e| io_error(&plan_path, e))?;
    let _ = writeln!(out, "images,{}\npatches,{patches}", anns.len());
    Ok(())
}

fn cmd_merge(a: MergeArgs, out: &mut String) -> Result<(), CliError> {
    if !a.det.is_dir() {
        return Err(CliError::Io(format!("--det {}: not a directory", a.det.display())));
    }
    let dets = read_results_dir(&a.det, a.convention)?;
    let n_in = dets.len();
    let merged = merge_results(&patches_from_results(dets), a.nms_thr)?;
    write_results_dir(&a.out, &merged)?;
    let _ = writeln!(out, "detections_in,{n_in}\ndetections_out,{}", merged.len());
    Ok(())
}
