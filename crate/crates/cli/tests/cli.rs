use std::path::Path;
use std::process::{Command, Output};

use mipcarve::io::{read_container, Container};
use mipcarve::project::mip;
use mipcarve::{Axis, Image, Label, MipAnnotationSet, Volume};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mipcarve")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Asserts a failure with the given exit status and `error: <code>:` line.
fn fails_with(o: &Output, exit: i32, code: &str) {
    assert_eq!(o.status.code(), Some(exit), "{}", stderr(o));
    let err = stderr(o);
    let line = err.lines().last().unwrap_or("");
    assert!(line.starts_with(&format!("error: {code}: ")), "{err}");
    assert_eq!(err.lines().count(), 1, "{err}");
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn small_synth_config(dir: &Path) -> String {
    let cfg = dir.join("phantom.txt");
    std::fs::write(&cfg, "# small phantom\ndims=16 32 32\ntube_count=3\nclutter_blob_count=2\nrng_seed=4\n").unwrap();
    cfg.to_str().unwrap().to_string()
}

#[test]
fn usage_errors_exit_2() {
    fails_with(&run(&[]), 2, "usage");
    fails_with(&run(&["frobnicate"]), 2, "usage");
    fails_with(&run(&["mip", "--in", "x.vsg", "--out", "o", "--bogus"]), 2, "usage");
    let tmp = tempfile::tempdir().unwrap();
    let net = tmp.path().join("n.bin");
    for bad in ["2d", "mip:", "mip:3", "slices:0:0", "mip:00"] {
        fails_with(&run(&["train", "--data", p(tmp.path()), "--supervision", bad, "--out", p(&net)]), 2, "usage");
    }
    fails_with(&run(&["train", "--data", p(tmp.path()), "--supervision", "3d", "--out", p(&net), "--threads", "2"]), 2, "usage");
    assert!(run(&["--help"]).status.success());
    assert!(run(&["train", "--help"]).status.success());
}

#[test]
fn data_errors_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing.vsg");
    fails_with(&run(&["mip", "--in", p(&missing), "--out", "x"]), 3, "io");
    let junk = tmp.path().join("junk.vsg");
    std::fs::write(&junk, b"XXXXjunkjunk").unwrap();
    fails_with(&run(&["mip", "--in", p(&junk), "--out", "x"]), 3, "bad_magic");
    let mut trunc = b"VSG1\x00\x03\xff\x00".to_vec();
    trunc.extend([2, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 1, 2]);
    std::fs::write(&junk, &trunc).unwrap();
    fails_with(&run(&["mip", "--in", p(&junk), "--out", "x"]), 3, "truncated");
    let net = tmp.path().join("n.bin");
    fails_with(&run(&["train", "--data", p(tmp.path()), "--supervision", "3d", "--out", p(&net)]), 3, "invalid_config");
}

#[test]
fn mip_output_equals_library_output() {
    let tmp = tempfile::tempdir().unwrap();
    let vol = Volume::from_fn([3, 4, 5], |[i, j, k]| ((i * 7 + j * 3 + k * 11) % 13) as f32 / 13.0).unwrap();
    let input = tmp.path().join("v.vsg");
    std::fs::write(&input, Container::ScalarVolume(vol.clone()).encode()).unwrap();
    let prefix = tmp.path().join("out");
    let o = run(&["mip", "--in", p(&input), "--out", p(&prefix), "--preview"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for axis in Axis::ALL {
        let (img, _) = mip(&vol, axis);
        let file = format!("{}_mip{}.vsg", p(&prefix), axis.index());
        assert_eq!(std::fs::read(&file).unwrap(), Container::ScalarImage(img).encode());
        let pgm = std::fs::read(format!("{}_mip{}.pgm", p(&prefix), axis.index())).unwrap();
        assert!(pgm.starts_with(b"P5\n"));
    }
    let o = run(&["mip", "--in", p(&input), "--axis", "1", "--out", p(&tmp.path().join("one"))]);
    assert!(o.status.success());
    assert!(tmp.path().join("one_mip1.vsg").exists());
    assert!(!tmp.path().join("one_mip0.vsg").exists());
    fails_with(&run(&["mip", "--in", p(&input), "--axis", "3", "--out", "x"]), 2, "usage");
}

fn write_label_image(path: &Path, img: Image<Label>) {
    std::fs::write(path, Container::LabelImage(img).encode()).unwrap();
}

#[test]
fn hull_filter_and_consistency() {
    let tmp = tempfile::tempdir().unwrap();
    // one voxel at (0,0,0) seen by both views, plus an Axis0 label at (1,1)
    // that no voxel can explain
    let mut a0 = Image::filled(Some(Axis::Axis0), [2, 2], Label::Background).unwrap();
    a0.set(0, 0, Label::Foreground);
    a0.set(1, 1, Label::Foreground);
    let mut a1 = Image::filled(Some(Axis::Axis1), [2, 2], Label::Background).unwrap();
    a1.set(0, 0, Label::Foreground);
    let (m0, m1) = (tmp.path().join("a_mip0.vsg"), tmp.path().join("a_mip1.vsg"));
    write_label_image(&m0, a0.clone());
    write_label_image(&m1, a1.clone());

    let hull = tmp.path().join("hull.vsg");
    let o = run(&["hull", "--mips", p(&m0), p(&m1), "--out", p(&hull)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let h = read_container(&hull).unwrap().into_label_volume().unwrap();
    assert_eq!(h.dims(), [2, 2, 2]);
    assert_eq!(h.count(Label::Foreground), 1);
    assert!(stdout(&o).contains("hull_voxels=1"));

    let prefix = tmp.path().join("f");
    let o = run(&["filter", "--mips", p(&m0), p(&m1), "--out-prefix", p(&prefix)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let set = MipAnnotationSet::new([2, 2, 2], vec![a0, a1]).unwrap();
    let expected = mipcarve::carve::filter_labels(&set).unwrap();
    let f0 = read_container(format!("{}_mip0.vsg", p(&prefix))).unwrap().into_label_image().unwrap();
    assert_eq!(&f0, expected.get(Axis::Axis0).unwrap());
    assert_eq!(f0.get(1, 1), Label::Background);

    let curve = tmp.path().join("curve.csv");
    let o = run(&["consistency", "--mips", p(&m0), p(&m1), "--dmax", "2", "--out", p(&curve)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&curve).unwrap();
    assert_eq!(text, mipcarve::agree::cross_view_inconsistency(&set, 2).unwrap().to_csv());
    assert!(text.starts_with("d,fraction\n0,0.3333333333333333\n"));

    fails_with(&run(&["hull", "--mips", p(&m0), "--out", p(&hull)]), 3, "invalid_config");
    fails_with(&run(&["hull", "--mips", p(&m0), p(&m0), "--out", p(&hull)]), 3, "duplicate_axis");
}

#[test]
fn rasterize_swc() {
    let tmp = tempfile::tempdir().unwrap();
    let swc = tmp.path().join("c.swc");
    std::fs::write(&swc, "1 0 2 2 1 1 -1\n2 0 2 2 6 1 1\n").unwrap();
    let out = tmp.path().join("l.vsg");
    let prefix = tmp.path().join("l");
    let o = run(&["rasterize", "--swc", p(&swc), "--dims", "5", "5", "8", "--width", "3", "--out", p(&out), "--mips-prefix", p(&prefix)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let lv = read_container(&out).unwrap().into_label_volume().unwrap();
    assert_eq!(lv.dims(), [5, 5, 8]);
    for k in 1..=6 {
        assert_eq!(lv.get([2, 2, k]), Label::Foreground);
    }
    assert_eq!(lv.get([0, 0, 0]), Label::Background);
    assert!(tmp.path().join("l_mip2.vsg").exists());
    fails_with(&run(&["rasterize", "--swc", p(&swc), "--dims", "5", "5", "8", "--width", "4", "--out", p(&out)]), 3, "invalid_config");
    std::fs::write(&swc, "1 0 2 2\n").unwrap();
    fails_with(&run(&["rasterize", "--swc", p(&swc), "--dims", "5", "5", "8", "--out", p(&out)]), 3, "parse");
}

#[test]
fn synth_train_eval_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_synth_config(tmp.path());
    let data = tmp.path().join("data");
    std::fs::create_dir(&data).unwrap();
    let o = run(&["synth", "--config", &cfg, "--out-prefix", p(&data.join("ph")), "--count", "2", "--labels"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for name in ["ph-000_volume.vsg", "ph-001_labels.vsg", "ph-001_mip2.vsg", "ph-000_centerlines.swc"] {
        assert!(data.join(name).exists(), "{name}");
    }
    let net = tmp.path().join("net.bin");
    let trace = tmp.path().join("trace.csv");
    let o = run(&[
        "train", "--data", p(&data), "--supervision", "mip:01", "--iters", "5", "--seed", "3", "--out", p(&net),
        "--trace", p(&trace), "--base-channels", "2", "--crop", "16", "16", "16",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let trace_text = std::fs::read_to_string(&trace).unwrap();
    assert!(trace_text.starts_with("iter,loss\n1,"));
    assert_eq!(trace_text.lines().count(), 6);

    let pr = tmp.path().join("pr.csv");
    let pred = tmp.path().join("pred.vsg");
    let vol = data.join("ph-000_volume.vsg");
    let labels = data.join("ph-000_labels.vsg");
    let o = run(&["eval", "--net", p(&net), "--in", p(&vol), "--labels", p(&labels), "--out", p(&pr), "--pred-out", p(&pred)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("best_f1="));
    let csv = std::fs::read_to_string(&pr).unwrap();
    assert!(csv.starts_with("threshold,precision,recall,f1\n"));
    assert_eq!(csv.lines().count(), 257);
    let probs = read_container(&pred).unwrap().into_scalar_volume().unwrap();
    assert!(probs.data().iter().all(|&y| (0.0..=1.0).contains(&y)));

    // crops that do not fit the network, and labels of another shape
    fails_with(
        &run(&["train", "--data", p(&data), "--supervision", "3d", "--iters", "1", "--out", p(&net), "--crop", "16", "16", "14"]),
        3,
        "not_divisible",
    );
    fails_with(&run(&["eval", "--net", p(&net), "--in", p(&vol), "--labels", p(&data.join("ph-000_mip0.vsg")), "--out", p(&pr)]), 3, "wrong_kind");
}

#[test]
fn training_is_reproducible_from_the_command_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_synth_config(tmp.path());
    let data = tmp.path().join("data");
    std::fs::create_dir(&data).unwrap();
    assert!(run(&["synth", "--config", &cfg, "--out-prefix", p(&data.join("ph")), "--labels"]).status.success());
    let once = |tag: &str, seed: &str| {
        let net = tmp.path().join(format!("{tag}.bin"));
        let trace = tmp.path().join(format!("{tag}.csv"));
        let o = run(&[
            "train", "--data", p(&data), "--supervision", "slices:0:3", "--iters", "4", "--seed", seed, "--out", p(&net),
            "--trace", p(&trace), "--base-channels", "2", "--crop", "8", "16", "16",
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        (std::fs::read(net).unwrap(), std::fs::read(trace).unwrap())
    };
    let a = once("a", "5");
    let b = once("b", "5");
    assert_eq!(a, b);
    let c = once("c", "6");
    assert_ne!(a.0, c.0);
}
