//! Class confusion between detections and ground truth.
//!
//! cargo run --example confusion_matrix

use obbkit::eval::{confusion_matrix, DetectionRecord, GroundTruthRecord};
use obbkit::geometry::{AngleConvention::Le90, RotatedBox};

fn gt(b: RotatedBox, cat: &str) -> GroundTruthRecord {
    GroundTruthRecord { image_id: "P0001".into(), rbox: b, category: cat.into(), difficult: false }
}

fn det(b: RotatedBox, cat: &str, score: f64) -> DetectionRecord {
    DetectionRecord { image_id: "P0001".into(), rbox: b, category: cat.into(), score }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let truck = RotatedBox::unchecked(100.0, 100.0, 30.0, 12.0, 0.3, Le90);
    let car = RotatedBox::unchecked(200.0, 60.0, 12.0, 6.0, -0.8, Le90);
    let ship = RotatedBox::unchecked(400.0, 300.0, 80.0, 20.0, 1.1, Le90);

    let gts = vec![gt(truck, "large-vehicle"), gt(car, "small-vehicle"), gt(ship, "ship")];
    let dets = vec![
        det(truck.translated(1.0, 0.0), "small-vehicle", 0.9), // right place, wrong class
        det(car, "small-vehicle", 0.8),
        det(RotatedBox::unchecked(600.0, 600.0, 20.0, 20.0, 0.0, Le90), "ship", 0.7), // nothing there
        det(ship, "ship", 0.2),                                                       // below the score threshold
    ];
    let categories: Vec<String> = ["large-vehicle", "small-vehicle", "ship"].map(String::from).to_vec();

    let cm = confusion_matrix(&dets, &gts, &categories, 0.5, 0.3)?;
    print!("{}", cm.to_csv());
    println!("\ntotal count {} = matched pairs + missed objects + spurious detections", cm.total());
    Ok(())
}
