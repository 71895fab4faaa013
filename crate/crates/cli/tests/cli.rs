use std::path::Path;
use std::process::{Command, Output};

use gmphd_mots::io::ResultRecord;
use gmphd_mots::{rle_encode, BBox, BinaryMask};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gmphd-mots"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = bin(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn key(report: &Path, name: &str) -> f64 {
    let text = std::fs::read_to_string(report).unwrap();
    text.lines()
        .filter_map(|l| l.split_once(" = "))
        .find(|(k, _)| *k == name)
        .map(|(_, v)| v.parse().unwrap())
        .unwrap_or_else(|| panic!("{name} missing from report"))
}

fn synth(dir: &Path, scenario: &str, seed: &str) {
    ok(&["synth", "--scenario", scenario, "--seed", seed, "--out", p(dir), "--frames", "24"]);
}

#[test]
fn track_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    synth(&data, "clutter", "4");
    let imgs = data.join("img").join("{frame:06}.png");
    let run = |out: &str| {
        let out = dir.path().join(out);
        ok(&["track", "--dets", p(&data.join("dets.txt")), "--imgs", p(&imgs), "--out", p(&out)]);
        std::fs::read(out.join("dets.txt")).unwrap()
    };
    let a = run("a");
    assert!(!a.is_empty());
    assert_eq!(a, run("b"));
}

#[test]
fn ground_truth_scores_100_and_empty_results_0() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "parallel", "2");
    let gt = dir.path().join("gt.txt");
    let report = dir.path().join("report.txt");
    let text = ok(&["eval", "--gt", p(&gt), "--res", p(&gt), "--report", p(&report)]);
    assert!(text.contains("sMOTSA"));
    assert_eq!(key(&report, "all.smotsa"), 100.0);

    let empty = dir.path().join("empty.txt");
    std::fs::write(&empty, "").unwrap();
    ok(&["eval", "--gt", p(&gt), "--res", p(&empty), "--report", p(&report)]);
    assert_eq!(key(&report, "all.smotsa"), 0.0);
    assert_eq!(key(&report, "all.tp"), 0.0);
}

#[test]
fn eval_fixture_with_one_switch() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, id: &dyn Fn(u32) -> u32| {
        let text: String = (0..10)
            .map(|f| {
                let m = BinaryMask::from_box(24, 12, &BBox::new(f, 3, 5, 5));
                let r = ResultRecord { frame: f, object_id: id(f), class: 1, img_h: 12, img_w: 24, rle: rle_encode(&m) };
                r.to_line() + "\n"
            })
            .collect();
        std::fs::write(dir.path().join(name), text).unwrap();
    };
    write("gt.txt", &|_| 1001);
    write("res.txt", &|f| if f < 6 { 1001 } else { 1002 });
    let report = dir.path().join("r.txt");
    let gt = dir.path().join("gt.txt");
    let res = dir.path().join("res.txt");
    ok(&["eval", "--gt", p(&gt), "--res", p(&res), "--report", p(&report)]);
    assert_eq!(key(&report, "car.motsa"), 90.0);
    assert_eq!(key(&report, "car.ids"), 1.0);
}

#[test]
fn sequences_expand_from_pattern() {
    let dir = tempfile::tempdir().unwrap();
    for (seq, scenario) in [("0000", "occlusion"), ("0001", "crossing")] {
        synth(&dir.path().join(seq), scenario, "0");
    }
    let dets = dir.path().join("{seq}").join("dets.txt");
    // `{seq}` in a directory component needs an explicit list
    let out = dir.path().join("res");
    let bad = bin(&["track", "--dets", p(&dets), "--out", p(&out), "--pipeline", "p1"]);
    assert_eq!(bad.status.code(), Some(1));
    ok(&["track", "--dets", p(&dets), "--seqs", "0000,0001", "--out", p(&out), "--pipeline", "p1"]);
    assert!(out.join("0000.txt").is_file() && out.join("0001.txt").is_file());
    assert!(key(&out.join("timing.txt"), "frames") > 0.0);

    // directory evaluation pairs files by name
    let gt_dir = dir.path().join("gt");
    std::fs::create_dir(&gt_dir).unwrap();
    for seq in ["0000", "0001"] {
        std::fs::copy(dir.path().join(seq).join("gt.txt"), gt_dir.join(format!("{seq}.txt"))).unwrap();
    }
    let report = dir.path().join("r.txt");
    ok(&["eval", "--gt", p(&gt_dir), "--res", p(&out), "--report", p(&report), "--timing", p(&out.join("timing.txt"))]);
    assert!(key(&report, "all.tp") > 0.0);
    assert!(key(&report, "fps") > 0.0);
}

#[test]
fn ablate_prints_every_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "occlusion", "1");
    let imgs = dir.path().join("img").join("{frame:06}.png");
    let text = ok(&[
        "ablate",
        "--dets",
        p(&dir.path().join("dets.txt")),
        "--imgs",
        p(&imgs),
        "--gt",
        p(&dir.path().join("gt.txt")),
        "--classes",
        "car",
    ]);
    let ids: Vec<u64> = text
        .lines()
        .filter(|l| l.starts_with('p'))
        .map(|l| l.split_whitespace().nth(6).unwrap().parse().unwrap())
        .collect();
    assert_eq!(ids.len(), 5, "{text}");
    assert!(ids[4] <= ids[1] && ids[1] <= ids[0], "{text}");
    assert!(ids[4] < ids[0], "{text}");
}

#[test]
fn viz_copies_frames_and_warns_on_missing() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "crossing", "0");
    let imgs = dir.path().join("img").join("{frame:06}.png");
    let empty = dir.path().join("empty.txt");
    std::fs::write(&empty, "").unwrap();
    let out = dir.path().join("viz");
    ok(&["viz", "--res", p(&empty), "--imgs", p(&imgs), "--out", p(&out)]);
    let src = image::open(dir.path().join("img").join("000003.png")).unwrap().to_rgb8();
    let dst = image::open(out.join("000003.png")).unwrap().to_rgb8();
    assert_eq!(src, dst);

    // a result frame past the last image is skipped with a warning
    let m = BinaryMask::from_box(320, 192, &BBox::new(5, 5, 10, 10));
    let r = ResultRecord { frame: 99, object_id: 1001, class: 1, img_h: 192, img_w: 320, rle: rle_encode(&m) };
    let res = dir.path().join("res.txt");
    std::fs::write(&res, r.to_line() + "\n").unwrap();
    let o = bin(&["viz", "--res", p(&res), "--imgs", p(&imgs), "--out", p(&out)]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("frame 99"));
}

#[test]
fn exit_codes_separate_usage_and_data_errors() {
    assert_eq!(bin(&["track", "--pipeline", "p9"]).status.code(), Some(1));
    assert_eq!(bin(&["synth", "--scenario", "nowhere", "--out", "x"]).status.code(), Some(1));
    assert_eq!(bin(&["--help"]).status.code(), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.txt");
    let o = bin(&["track", "--dets", p(&missing), "--out", p(&dir.path().join("o")), "--pipeline", "p1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.txt"));
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "0 1 0.9 4 4\n").unwrap();
    let o = bin(&["eval", "--gt", p(&bad), "--res", p(&bad)]);
    assert_eq!(o.status.code(), Some(2));
}
