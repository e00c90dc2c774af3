//! DOTA-style evaluation of the bundled three-image fixture.
//!
//! cargo run --example evaluate_detections [gt_dir det_dir]

use std::path::PathBuf;

use obbkit::dota_io::{read_annotation_dir, read_results_dir};
use obbkit::eval::{evaluate, ApMode, DEFAULT_IOU_THR};
use obbkit::geometry::AngleConvention;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixture = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/eval3");
    let mut args = std::env::args().skip(1);
    let gt_dir = args.next().map(PathBuf::from).unwrap_or_else(|| fixture.join("gt"));
    let det_dir = args.next().map(PathBuf::from).unwrap_or_else(|| fixture.join("det"));

    let mut gts = Vec::new();
    for ann in read_annotation_dir(&gt_dir)? {
        gts.extend(ann.to_ground_truth(AngleConvention::Le90)?);
    }
    let dets = read_results_dir(&det_dir, AngleConvention::Le90)?;
    println!("{} ground-truth objects, {} detections\n", gts.len(), dets.len());

    let report = evaluate(&dets, &gts, DEFAULT_IOU_THR, ApMode::Voc07)?;
    print!("{}", report.to_csv());

    let continuous = evaluate(&dets, &gts, DEFAULT_IOU_THR, ApMode::Continuous)?;
    println!("\nmAP voc07 {:.6}, continuous {:.6}", report.map, continuous.map);

    println!("\nplane PR curve:");
    for (r, p) in &report.pr_curves["plane"] {
        println!("  recall {r:.3}  precision {p:.3}");
    }
    Ok(())
}
