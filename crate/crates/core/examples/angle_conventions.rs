//! One physical box in the three angle conventions, and back.
//!
//! cargo run --example angle_conventions

use obbkit::geometry::{convert, normalize, quad_to_rbox, rbox_to_quad, AngleConvention, RotatedBox};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // a 40x16 box tilted 30 degrees, given in long-edge-90 form
    let b = RotatedBox::new(120.0, 80.0, 40.0, 16.0, 30f64.to_radians(), AngleConvention::Le90)?;

    println!("{:<6} {:>8} {:>8} {:>10}", "conv", "w", "h", "theta(deg)");
    for conv in AngleConvention::ALL {
        let c = convert(&b, conv)?;
        println!("{:<6} {:>8.3} {:>8.3} {:>10.3}", conv, c.w, c.h, c.theta.to_degrees());
        assert!(c.corner_distance(&b) < 1e-9);
    }

    // raw network output with an out-of-range angle and short-edge-first sides
    let raw = RotatedBox::unchecked(0.0, 0.0, 10.0, 30.0, 200f64.to_radians(), AngleConvention::Le135);
    let n = normalize(&raw, AngleConvention::Le135)?;
    println!("\nnormalized: w={} h={} theta={:.3} deg", n.w, n.h, n.theta.to_degrees());

    // DOTA quads carry no angle; the minimum-area rectangle recovers one
    let q = rbox_to_quad(&b)?;
    println!("\nquad: {:?}", q.to_flat().map(|v| (v * 1000.0).round() / 1000.0));
    let back = quad_to_rbox(&q, AngleConvention::Oc)?;
    println!("back (oc): w={:.3} h={:.3} theta={:.3} deg", back.w, back.h, back.theta.to_degrees());
    Ok(())
}
