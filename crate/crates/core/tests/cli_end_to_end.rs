use std::fs;
use std::path::{Path, PathBuf};

use obbkit::cli::run;
use obbkit::dota_io::read_annotation_dir;
use obbkit::eval::{evaluate, ApMode};

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/eval3")
}

fn obbkit(args: &[&str], stdin: &str) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("obbkit").chain(args.iter().copied());
    let code = run(argv, &mut stdin.as_bytes(), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn expected() -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(fixture().join("expected.json")).unwrap()).unwrap()
}

#[test]
fn fixture_map_matches_oracle() {
    let fx = fixture();
    let mut gts = Vec::new();
    for ann in read_annotation_dir(&fx.join("gt")).unwrap() {
        gts.extend(ann.to_ground_truth(obbkit::geometry::AngleConvention::Le90).unwrap());
    }
    let dets = obbkit::dota_io::read_results_dir(&fx.join("det"), obbkit::geometry::AngleConvention::Le90).unwrap();
    let exp = expected();
    for (mode, key) in [(ApMode::Voc07, "voc07"), (ApMode::Continuous, "continuous")] {
        let report = evaluate(&dets, &gts, 0.5, mode).unwrap();
        let want = exp[key]["map"].as_f64().unwrap();
        assert!((report.map - want).abs() < 1e-9, "{key}: {} vs {want}", report.map);
        let classes = exp[key]["per_class_ap"].as_object().unwrap();
        assert_eq!(report.per_class_ap.len(), classes.len());
        for (cat, ap) in classes {
            assert!((report.per_class_ap[cat] - ap.as_f64().unwrap()).abs() < 1e-9, "{key}/{cat}");
        }
    }
}

#[test]
fn eval_cli_prints_report_and_json() {
    let fx = fixture();
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("report.json");
    let gt = fx.join("gt");
    let det = fx.join("det");
    let args = [
        "eval",
        "--gt",
        gt.to_str().unwrap(),
        "--det",
        det.to_str().unwrap(),
        "--iou-thr",
        "0.5",
        "--json",
        json.to_str().unwrap(),
    ];
    let (code, out, err) = obbkit(&args, "");
    assert_eq!(code, 0, "{err}");
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "category,num_gt,num_det,ap");
    assert!(!out.contains("storage-tank"), "difficult-only class must be excluded");
    let map_line = lines.last().unwrap();
    let want = expected()["voc07"]["map"].as_f64().unwrap();
    assert_eq!(*map_line, format!("mAP,9,15,{want:.6}"));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert!((report["map"].as_f64().unwrap() - want).abs() < 1e-12);

    let (_, again, _) = obbkit(&args, "");
    assert_eq!(out, again);
}

#[test]
fn confusion_cli_on_fixture() {
    let fx = fixture();
    let (code, out, _) = obbkit(
        &[
            "confusion",
            "--gt",
            fx.join("gt").to_str().unwrap(),
            "--det",
            fx.join("det").to_str().unwrap(),
            "--categories",
            "plane,ship,harbor,bridge,storage-tank,small-vehicle",
        ],
        "",
    );
    assert_eq!(code, 0);
    let mut lines = out.lines();
    assert_eq!(lines.next().unwrap(), "gt\\det,plane,ship,harbor,bridge,storage-tank,small-vehicle,background");
    assert_eq!(lines.next().unwrap(), "plane,3,0,0,0,0,0,1");

    let (code, _, err) = obbkit(
        &[
            "confusion",
            "--gt",
            fx.join("gt").to_str().unwrap(),
            "--det",
            fx.join("det").to_str().unwrap(),
            "--categories",
            "plane",
        ],
        "",
    );
    assert_eq!(code, 1);
    assert!(err.contains("unknown category"), "{err}");
}

#[test]
fn malformed_annotation_reports_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let gt = dir.path().join("gt");
    let det = dir.path().join("det");
    fs::create_dir_all(&gt).unwrap();
    fs::create_dir_all(&det).unwrap();
    fs::write(gt.join("img.txt"), "imagesource:x\n0 0 1 0 1 1 0 1 ship 0\n1 2 3 plane 0\n").unwrap();
    let (code, _, err) = obbkit(&["eval", "--gt", gt.to_str().unwrap(), "--det", det.to_str().unwrap()], "");
    assert_eq!(code, 1);
    assert!(err.contains("img.txt:3"), "{err}");
}

#[test]
fn split_then_merge_via_cli() {
    let dir = tempfile::tempdir().unwrap();
    let ann = dir.path().join("ann");
    let split = dir.path().join("split");
    fs::create_dir_all(&ann).unwrap();
    // one object in the shared strip [824, 1024) of the first two columns
    fs::write(ann.join("big.txt"), "900 100 960 100 960 130 900 130 plane 0\n").unwrap();
    let (code, out, err) = obbkit(
        &[
            "split",
            "--ann",
            ann.to_str().unwrap(),
            "--out",
            split.to_str().unwrap(),
            "--width",
            "2048",
            "--height",
            "2048",
        ],
        "",
    );
    assert_eq!(code, 0, "{err}");
    assert_eq!(out, "images,1\npatches,9\n");
    let plan = fs::read_to_string(split.join("plan.csv")).unwrap();
    assert_eq!(plan.lines().count(), 10);
    assert!(plan.contains("big,big__1__824___0,1,824,0,1848,1024,1"));
    let local = fs::read_to_string(split.join("big__1__824___0.txt")).unwrap();
    assert_eq!(
        local,
        "76.000000 100.000000 136.000000 100.000000 136.000000 130.000000 76.000000 130.000000 plane 0\n"
    );

    // perfect per-window detections, then merge
    let patch_det = dir.path().join("patch_det");
    fs::create_dir_all(&patch_det).unwrap();
    fs::write(
        patch_det.join("Task1_plane.txt"),
        "big__1__0___0 0.900000 900 100 960 100 960 130 900 130\n\
         big__1__824___0 0.800000 76 100 136 100 136 130 76 130\n",
    )
    .unwrap();
    let merged = dir.path().join("merged");
    let (code, out, err) =
        obbkit(&["merge", "--det", patch_det.to_str().unwrap(), "--out", merged.to_str().unwrap()], "");
    assert_eq!(code, 0, "{err}");
    assert_eq!(out, "detections_in,2\ndetections_out,1\n");
    let text = fs::read_to_string(merged.join("Task1_plane.txt")).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("big 0.900000 "));
}

#[test]
fn split_requires_sizes() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.txt"), "").unwrap();
    let (code, _, err) =
        obbkit(&["split", "--ann", dir.path().to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()], "");
    assert_eq!(code, 1);
    assert!(err.contains("--sizes"), "{err}");
}

#[test]
fn iou_matrix_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    fs::write(&a, "cx,cy,w,h,theta,conv\n0,0,2,2,0,le90\n5,5,2,2,0,le90\n").unwrap();
    fs::write(&b, "cx,cy,w,h,theta,conv\n0,0,2,2,0,le90\n1,0,2,2,0,le90\n10,10,1,1,0,oc\n").unwrap();
    let (code, out, _) = obbkit(&["iou", "--a", a.to_str().unwrap(), "--b", b.to_str().unwrap(), "--matrix"], "");
    assert_eq!(code, 0);
    assert_eq!(out, "1,0.3333333333333333,0\n0,0,0\n");
    let (code, _, err) = obbkit(&["iou", "--a", a.to_str().unwrap(), "--b", b.to_str().unwrap()], "");
    assert_eq!(code, 1);
    assert!(err.contains("--a has 2 rows"));
}

#[test]
fn convert_round_trips_through_all_conventions() {
    let input = "cx,cy,w,h,theta,conv\n10,20,30,12,0.3,le90\n-4,7,5,9,-1.2,oc\n";
    let (_, oc, _) = obbkit(&["convert", "--to", "oc"], input);
    let (_, le135, _) = obbkit(&["convert", "--to", "le135"], &oc);
    let (_, le90, _) = obbkit(&["convert", "--to", "le90"], &le135);
    let (_, direct, _) = obbkit(&["convert", "--to", "le90"], input);
    let parse = |s: &str| -> Vec<Vec<f64>> {
        s.lines().skip(1).map(|l| l.split(',').take(5).map(|v| v.parse().unwrap()).collect()).collect()
    };
    for (x, y) in parse(&le90).iter().zip(parse(&direct)) {
        for (u, v) in x.iter().zip(y) {
            assert!((u - v).abs() < 1e-9);
        }
    }
}

#[test]
fn version_and_help() {
    let (code, out, _) = obbkit(&["--version"], "");
    assert_eq!(code, 0);
    assert!(out.starts_with("obbkit "));
    let (code, out, _) = obbkit(&["eval", "--help"], "");
    assert_eq!(code, 0);
    assert!(out.contains("[default: 0.5]") && out.contains("[default: voc07]") && out.contains("[default: le90]"));
}
