//! Greedy rotated NMS over a cluster of overlapping detections.
//!
//! cargo run --example rotated_nms

use obbkit::geometry::{AngleConvention::Le90, RotatedBox};
use obbkit::overlap::{rotated_iou, rotated_nms, ScoredBox};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // three jittered detections of one ship, one of a neighbour, one stray
    let boxes = [
        (RotatedBox::unchecked(100.0, 100.0, 60.0, 14.0, 0.50, Le90), 0.92),
        (RotatedBox::unchecked(102.0, 101.0, 58.0, 15.0, 0.48, Le90), 0.85),
        (RotatedBox::unchecked(98.0, 99.0, 62.0, 13.0, 0.55, Le90), 0.64),
        (RotatedBox::unchecked(100.0, 125.0, 60.0, 14.0, 0.50, Le90), 0.80),
        (RotatedBox::unchecked(300.0, 40.0, 20.0, 20.0, 0.00, Le90), 0.30),
    ];
    let dets: Vec<ScoredBox> = boxes.iter().enumerate().map(|(i, &(b, s))| ScoredBox::new(b, s, i)).collect();

    for thr in [0.1, 0.5, 0.9] {
        let keep = rotated_nms(&dets, thr)?;
        println!("iou_thr {thr}: keep {keep:?}");
    }

    println!("\npairwise IoU with the top detection:");
    for d in &dets[1..] {
        println!("  #{} score {:.2}: {:.4}", d.index, d.score, rotated_iou(&dets[0].rbox, &d.rbox));
    }
    Ok(())
}
