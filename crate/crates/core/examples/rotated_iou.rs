//! Exact rotated IoU, the intersection polygon, and a batched IoU matrix.
//!
//! cargo run --example rotated_iou

use std::f64::consts::FRAC_PI_4;

use obbkit::geometry::{AngleConvention::Le90, RotatedBox};
use obbkit::overlap::{intersection_polygon, iou_matrix, rotated_iou};

fn main() {
    let a = RotatedBox::unchecked(0.0, 0.0, 2.0, 2.0, 0.0, Le90);
    let b = RotatedBox::unchecked(0.0, 0.0, 2.0, 2.0, FRAC_PI_4, Le90);

    let poly = intersection_polygon(&a, &b);
    println!("square vs 45deg square: {} vertices, area {:.6}", poly.vertices().len(), poly.area());
    println!("IoU = {:.12} (1/sqrt 2 = {:.12})", rotated_iou(&a, &b), 0.5f64.sqrt());

    let shifted = RotatedBox::unchecked(1.0, 0.0, 2.0, 2.0, 0.0, Le90);
    println!("half-shifted square IoU = {:.6}", rotated_iou(&a, &shifted));

    let rows = [a, shifted];
    let cols = [a, b, RotatedBox::unchecked(50.0, 50.0, 4.0, 1.0, 0.2, Le90)];
    let m = iou_matrix(&rows, &cols);
    println!("\nIoU matrix {}x{}:", m.rows, m.cols);
    for i in 0..m.rows {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:.4}")).collect();
        println!("  {}", row.join("  "));
    }
}
