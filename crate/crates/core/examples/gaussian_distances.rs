//! GWD, KLD and KFIoU between boxes, plus the loss mapping used in training.
//!
//! cargo run --example gaussian_distances

use obbkit::gaussian_metrics::{box_distance, loss_transform, GaussianDistanceKind, DEFAULT_TAU};
use obbkit::geometry::{rbox_to_gaussian, AngleConvention::Le90, RotatedBox};
use obbkit::overlap::rotated_iou;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let gt = RotatedBox::unchecked(50.0, 50.0, 40.0, 10.0, 0.0, Le90);
    let g = rbox_to_gaussian(&gt)?;
    println!("target Gaussian: mu={:?} sigma={:?}\n", g.mu(), g.sigma());

    let kinds = [
        GaussianDistanceKind::Gwd,
        GaussianDistanceKind::KldForward,
        GaussianDistanceKind::KldSymmetric,
        GaussianDistanceKind::KfIou,
    ];
    print!("{:>10} {:>8}", "rotation", "iou");
    for k in kinds {
        print!(" {:>10}", k.as_str());
    }
    println!(" {:>10}", "kld loss");

    // the same box turned away from the target: IoU collapses fast for
    // elongated boxes while the Gaussian distances grow smoothly
    for deg in [0.0, 2.0, 5.0, 10.0, 30.0, 60.0, 89.0] {
        let pred = RotatedBox::unchecked(50.0, 50.0, 40.0, 10.0, f64::to_radians(deg), Le90);
        print!("{deg:>10.1} {:>8.4}", rotated_iou(&pred, &gt));
        for k in kinds {
            print!(" {:>10.4}", box_distance(k, &pred, &gt)?);
        }
        let kld = box_distance(GaussianDistanceKind::KldForward, &pred, &gt)?;
        println!(" {:>10.4}", loss_transform(kld, DEFAULT_TAU)?);
    }
    Ok(())
}
