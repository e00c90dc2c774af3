//! Reading DOTA annotations and writing/reading Task1 result files.
//!
//! cargo run --example dota_files

use obbkit::dota_io::{parse_annotation, parse_results, write_annotation, write_results};
use obbkit::eval::DetectionRecord;
use obbkit::geometry::AngleConvention;

const ANNOTATION: &str = "\
imagesource:GoogleEarth
gsd:0.146343590398
2753 2408 2861 2385 2888 2468 2805 2502 plane 0
3445 3391 3484 3409 3478 3422 3437 3402 large-vehicle 0
3185 4158 3195 4161 3175 4204 3164 4199 small-vehicle 1
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ann = parse_annotation(ANNOTATION, "P0706")?;
    let gts = ann.to_ground_truth(AngleConvention::Le90)?;
    for (r, g) in ann.records.iter().zip(&gts) {
        println!(
            "{:<14} difficult={} -> cx={:.1} cy={:.1} w={:.1} h={:.1} theta={:.1} deg",
            r.category,
            u8::from(r.difficult),
            g.rbox.cx,
            g.rbox.cy,
            g.rbox.w,
            g.rbox.h,
            g.rbox.theta.to_degrees()
        );
    }
    print!("\nre-written:\n{}", write_annotation(&ann));

    let dets: Vec<DetectionRecord> = gts
        .iter()
        .zip([0.97, 0.81, 0.35])
        .map(|(g, score)| DetectionRecord {
            image_id: g.image_id.clone(),
            rbox: g.rbox,
            category: g.category.clone(),
            score,
        })
        .collect();
    let files = write_results(&dets)?;
    for (name, text) in &files {
        print!("\n{name}:\n{text}");
    }

    let back = parse_results("plane", &files["Task1_plane.txt"], AngleConvention::Le90, "Task1_plane.txt")?;
    println!("\nparsed back: {} plane detection(s), score {}", back.len(), back[0].score);

    match parse_annotation("1 2 3 plane 0", "bad") {
        Err(e) => println!("malformed line -> {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
