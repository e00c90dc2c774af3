//! Tiling a 4000x3000 scene, distributing annotations to windows, and merging
//! per-window detections back with NMS.
//!
//! cargo run --example huge_image_split_merge

use obbkit::dota_io::{
    clip_annotations, merge_results, multiscale_plans, patches_from_results, split_plan, AnnotationFile,
    AnnotationRecord, DEFAULT_GAP, DEFAULT_KEEP_FRAC, DEFAULT_MERGE_NMS_THR, DEFAULT_WINDOW,
};
use obbkit::eval::DetectionRecord;
use obbkit::geometry::{quad_to_rbox, rbox_to_quad, AngleConvention::Le90, RotatedBox};
use obbkit::overlap::rotated_iou;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let plan = split_plan(4000, 3000, DEFAULT_WINDOW, DEFAULT_GAP)?;
    println!("{} windows of <= {} px, gap {}", plan.windows.len(), DEFAULT_WINDOW, DEFAULT_GAP);
    for w in plan.windows.iter().take(4) {
        println!("  ({}, {}) .. ({}, {})", w.x0, w.y0, w.x1, w.y1);
    }

    for p in multiscale_plans(4000, 3000, DEFAULT_WINDOW, DEFAULT_GAP, &[0.5, 1.0, 1.5])? {
        println!("scale {:>3}: image {:?}, {} windows", p.scale, p.image_size, p.windows.len());
    }

    let objects = [
        RotatedBox::unchecked(900.0, 300.0, 120.0, 40.0, 0.4, Le90), // inside the overlap strip
        RotatedBox::unchecked(1020.0, 1500.0, 300.0, 60.0, 0.0, Le90), // straddles a window edge
        RotatedBox::unchecked(3500.0, 2800.0, 50.0, 50.0, 0.7, Le90),
    ];
    let ann = AnnotationFile {
        image_id: "P2000".into(),
        records: objects
            .iter()
            .map(|b| Ok(AnnotationRecord { quad: rbox_to_quad(b)?, category: "ship".into(), difficult: false }))
            .collect::<Result<_, obbkit::geometry::GeometryError>>()?,
    };

    // a perfect detector: every window reports its annotations at score 1
    let mut dets = Vec::new();
    let mut copies = 0;
    for w in clip_annotations(&ann, &plan, DEFAULT_KEEP_FRAC)? {
        for r in &w.file.records {
            copies += 1;
            dets.push(DetectionRecord {
                image_id: w.file.image_id.clone(),
                rbox: quad_to_rbox(&r.quad, Le90)?,
                category: r.category.clone(),
                score: if r.difficult { 0.5 } else { 1.0 },
            });
        }
    }
    println!("\n{} objects appear {} times across windows", objects.len(), copies);

    let merged = merge_results(&patches_from_results(dets), DEFAULT_MERGE_NMS_THR)?;
    println!("after merge: {} detections", merged.len());
    for o in &objects {
        let best = merged.iter().map(|d| rotated_iou(&d.rbox, o)).fold(0.0, f64::max);
        println!("  object at ({}, {}): best merged IoU {:.6}", o.cx, o.cy, best);
    }
    Ok(())
}
