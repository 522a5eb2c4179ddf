use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lgimap_core::io::{decode_pfm, encode_mask_png, encode_pfm, read_mask_png, Pfm};
use lgimap_core::{MaskKind, ShadowMask};
use serde_json::Value;
use tempfile::TempDir;

fn lgimap(args: &[&str]) -> Output {
    lgimap_env(args, &[])
}

fn lgimap_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lgimap"));
    cmd.args(args).env_remove("LGIMAP_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn ok(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    assert_eq!(text.lines().count(), 1, "one report line: {text}");
    serde_json::from_str(text.trim()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen(dir: &Path, seed: u64, count: usize, res: usize) -> Value {
    ok(&lgimap(&[
        "gen-scene",
        "--seed",
        &seed.to_string(),
        "--count",
        &count.to_string(),
        "--resolution",
        &res.to_string(),
        "--out",
        s(dir),
    ]))
}

fn gen_kind(dir: &Path, kind: &str, res: usize) -> Value {
    ok(&lgimap(&["gen-scene", "--kind", kind, "--count", "1", "--resolution", &res.to_string(), "--out", s(dir)]))
}

fn write_mask(path: &Path, w: usize, h: usize, bits: &[u8]) {
    let values = bits.iter().map(|b| *b as f64).collect();
    let m = ShadowMask::new(w, h, values, MaskKind::Hard).unwrap();
    fs::write(path, encode_mask_png(&m).unwrap()).unwrap();
}

fn eval(dir: &Path, pred: &[u8], gt: &[u8]) -> Value {
    let (p, g) = (dir.join("p.png"), dir.join("g.png"));
    write_mask(&p, pred.len(), 1, pred);
    write_mask(&g, gt.len(), 1, gt);
    ok(&lgimap(&["eval", "--pred", s(&p), "--gt", s(&g)]))["metrics"].clone()
}

fn lgi(depth: &Path, scene: &Path, out: &Path, extra: &[&str]) -> Value {
    let mut args = vec!["lgi", "--depth", s(depth), "--scene", s(scene), "--out", s(out)];
    args.extend_from_slice(extra);
    ok(&lgimap(&args))
}

fn suffixed(prefix: &Path, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{}{suffix}", prefix.display()))
}

#[test]
fn gen_scene_is_deterministic_per_seed() {
    let t = TempDir::new().unwrap();
    let a = gen(&t.path().join("a"), 3, 2, 32);
    let b = gen(&t.path().join("b"), 3, 2, 32);
    let c = gen(&t.path().join("c"), 4, 2, 32);
    let ma = fs::read(t.path().join("a/manifest.json")).unwrap();
    assert_eq!(ma, fs::read(t.path().join("b/manifest.json")).unwrap());
    assert_ne!(ma, fs::read(t.path().join("c/manifest.json")).unwrap());
    assert_eq!(a["seed"], 3);
    assert_eq!(b["config"]["count"], 2);
    assert_eq!(c["config"]["lgi"]["n_samples"], 16);
}

#[test]
fn gen_scene_matches_golden_digests() {
    let t = TempDir::new().unwrap();
    gen(t.path(), 7, 3, 32);
    let got: Value = serde_json::from_slice(&fs::read(t.path().join("manifest.json")).unwrap()).unwrap();
    let golden: Value = serde_json::from_str(include_str!("golden/gen_scene_seed7_n3_r32.json")).unwrap();
    assert_eq!(got, golden);
}

#[test]
fn gen_scene_count_zero_writes_empty_manifest() {
    let t = TempDir::new().unwrap();
    let report = gen(t.path(), 0, 0, 32);
    assert_eq!(report["metrics"]["scenes"], 0);
    let m: Value = serde_json::from_slice(&fs::read(t.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["scenes"].as_array().unwrap().len(), 0);
}

#[test]
fn eval_fixtures() {
    let t = TempDir::new().unwrap();
    let same = eval(t.path(), &[1, 0, 1, 0], &[1, 0, 1, 0]);
    assert_eq!(same["iou"], 1.0);
    assert_eq!(same["ber"], 0.0);

    let comp = eval(t.path(), &[1, 0, 1, 0], &[0, 1, 0, 1]);
    assert_eq!(comp["iou"], 0.0);
    assert_eq!(comp["ber"], 1.0);

    let third = eval(t.path(), &[1, 1, 0, 0], &[0, 1, 1, 0]);
    assert!((third["iou"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    assert!((third["ber"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(third["confusion"]["tp"], 1);
    assert_eq!(third["confusion"]["fn"], 1);
}

#[test]
fn eval_degenerate_metrics_are_undefined_not_errors() {
    let t = TempDir::new().unwrap();
    let m = eval(t.path(), &[0, 0, 0], &[0, 0, 0]);
    assert_eq!(m["iou"], "undefined");
    assert_eq!(m["ber"], "undefined");
    assert_eq!(m["confusion"]["tn"], 3);
}

#[test]
fn eval_shape_mismatch_exits_2() {
    let t = TempDir::new().unwrap();
    let (p, g) = (t.path().join("p.png"), t.path().join("g.png"));
    write_mask(&p, 3, 1, &[0, 1, 0]);
    write_mask(&g, 4, 1, &[0, 1, 0, 0]);
    let out = lgimap(&["eval", "--pred", s(&p), "--gt", s(&g)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn lgi_writes_maps_and_masks_with_full_config() {
    let t = TempDir::new().unwrap();
    gen(t.path(), 1, 1, 48);
    let (depth, scene, out) = (
        t.path().join("scene_000_depth.pfm"),
        t.path().join("scene_000.json"),
        t.path().join("run"),
    );
    let r = lgi(&depth, &scene, &out, &["--soft", "1"]);
    assert_eq!(r["seed"], 1);
    let cfg = &r["config"]["lgi"];
    assert_eq!(cfg["n_samples"], 16);
    assert_eq!(cfg["interp"], "bilinear");
    assert!((cfg["eta"].as_f64().unwrap() - 5f64.to_radians()).abs() < 1e-15);
    assert!((cfg["softness_beta"].as_f64().unwrap() - 1f64.to_radians()).abs() < 1e-15);

    let maps = decode_pfm(&fs::read(suffixed(&out, "_lgi.pfm")).unwrap()).unwrap();
    assert_eq!((maps.header.width, maps.header.height, maps.header.bands), (48, 48, 3));
    let hard = read_mask_png(suffixed(&out, "_hard.png")).unwrap();
    let soft = read_mask_png(suffixed(&out, "_soft.png")).unwrap();
    let valid = read_mask_png(suffixed(&out, "_valid.png")).unwrap();
    assert_eq!(hard.kind, MaskKind::Hard);
    assert_eq!(hard.positive_count(), r["metrics"]["shadow_pixels"].as_u64().unwrap() as usize);
    assert_eq!(valid.positive_count(), r["metrics"]["valid_pixels"].as_u64().unwrap() as usize);
    // Soft mask crosses one half exactly at the hard threshold.
    for (h, s) in hard.values.iter().zip(&soft.values) {
        if *h == 1.0 {
            assert!(*s >= 0.49, "soft {s} under a hard shadow pixel");
        }
    }
}

#[test]
fn doubling_samples_only_widens_the_extremes() {
    let t = TempDir::new().unwrap();
    gen(t.path(), 2, 1, 48);
    let (depth, scene) = (t.path().join("scene_000_depth.pfm"), t.path().join("scene_000.json"));
    let r8 = lgi(&depth, &scene, &t.path().join("n8"), &["--n", "8", "--interp", "nearest"]);
    let r16 = lgi(&depth, &scene, &t.path().join("n16"), &["--n", "16", "--interp", "nearest"]);
    let m8 = decode_pfm(&fs::read(t.path().join("n8_lgi.pfm")).unwrap()).unwrap();
    let m16 = decode_pfm(&fs::read(t.path().join("n16_lgi.pfm")).unwrap()).unwrap();
    let v8 = read_mask_png(t.path().join("n8_valid.png")).unwrap();
    for (i, px) in m8.data.chunks(3).zip(m16.data.chunks(3)).enumerate() {
        if v8.values[i] == 0.0 {
            continue;
        }
        let (a, b) = px;
        assert!(b[0] <= a[0], "c1 grew at {i}: {} -> {}", a[0], b[0]);
        assert!(b[1] >= a[1], "c2 shrank at {i}: {} -> {}", a[1], b[1]);
        assert!(b[2].abs() <= a[2].abs(), "|c3| grew at {i}");
    }
    let h8 = read_mask_png(t.path().join("n8_hard.png")).unwrap();
    let h16 = read_mask_png(t.path().join("n16_hard.png")).unwrap();
    for (a, b) in h8.values.iter().zip(&h16.values) {
        assert!(*b >= *a);
    }
    assert!(r16["metrics"]["shadow_pixels"].as_u64() >= r8["metrics"]["shadow_pixels"].as_u64());
}

#[test]
fn lgi_shape_mismatch_exits_2() {
    let t = TempDir::new().unwrap();
    gen(&t.path().join("small"), 0, 1, 32);
    gen(&t.path().join("big"), 0, 1, 40);
    let out = lgimap(&[
        "lgi",
        "--depth",
        s(&t.path().join("small/scene_000_depth.pfm")),
        "--scene",
        s(&t.path().join("big/scene_000.json")),
        "--out",
        s(&t.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    assert!(!t.path().join("o_lgi.pfm").exists());
}

#[test]
fn malformed_inputs_exit_2_with_location() {
    let t = TempDir::new().unwrap();
    gen(t.path(), 0, 1, 32);
    let depth = t.path().join("scene_000_depth.pfm");

    let bad_cfg = t.path().join("bad.json");
    let mut cfg: Value = serde_json::from_slice(&fs::read(t.path().join("scene_000.json")).unwrap()).unwrap();
    cfg["lights"][0]["kind"] = "spot".into();
    fs::write(&bad_cfg, cfg.to_string()).unwrap();
    let out = lgimap(&["lgi", "--depth", s(&depth), "--scene", s(&bad_cfg), "--out", s(&t.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lights[0].kind"));

    let bad_pfm = t.path().join("bad.pfm");
    fs::write(&bad_pfm, b"P7\n1 1\n-1.0\n\0\0\0\0").unwrap();
    let out = lgimap(&[
        "lgi",
        "--depth",
        s(&bad_pfm),
        "--scene",
        s(&t.path().join("scene_000.json")),
        "--out",
        s(&t.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("at byte 0"));

    let missing = lgimap(&["eval", "--pred", "/nonexistent.png", "--gt", "/nonexistent.png"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn thread_env_overrides_flag_and_output_is_identical() {
    let t = TempDir::new().unwrap();
    gen(t.path(), 5, 1, 40);
    let (depth, scene) = (t.path().join("scene_000_depth.pfm"), t.path().join("scene_000.json"));
    let args = |out: &str| {
        vec![
            "lgi".to_string(),
            "--depth".into(),
            s(&depth).into(),
            "--scene".into(),
            s(&scene).into(),
            "--out".into(),
            s(&t.path().join(out)).into(),
            "--threads".into(),
            "3".into(),
        ]
    };
    let a1: Vec<String> = args("one");
    let a1: Vec<&str> = a1.iter().map(String::as_str).collect();
    let r1 = ok(&lgimap_env(&a1, &[("LGIMAP_THREADS", "1")]));
    assert_eq!(r1["threads"], 1);
    let a3: Vec<String> = args("three");
    let a3: Vec<&str> = a3.iter().map(String::as_str).collect();
    let r3 = ok(&lgimap(&a3));
    assert_eq!(r3["threads"], 3);
    assert_eq!(r1["metrics"]["lgi_digest"], r3["metrics"]["lgi_digest"]);
    assert_eq!(
        fs::read(t.path().join("one_lgi.pfm")).unwrap(),
        fs::read(t.path().join("three_lgi.pfm")).unwrap()
    );

    let bad = lgimap_env(&a1, &[("LGIMAP_THREADS", "many")]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn compose_of_per_light_renders_matches_joint_render() {
    let t = TempDir::new().unwrap();
    gen(t.path(), 6, 1, 32);
    let mut cfg: Value = serde_json::from_slice(&fs::read(t.path().join("scene_000.json")).unwrap()).unwrap();
    let second = serde_json::json!({ "kind": "directional", "direction": [0.3, -1.0, -0.4], "color": [0.2, 0.4, 0.9] });
    cfg["lights"].as_array_mut().unwrap().push(second);
    let scene = t.path().join("two.json");
    fs::write(&scene, cfg.to_string()).unwrap();
    let depth = t.path().join("d.pfm");
    let render = |light: Option<&str>, name: &str| {
        let out = t.path().join(name);
        let mut args = vec![
            "render-depth",
            "--scene",
            s(&scene),
            "--out",
            s(&depth),
            "--radiance",
            s(&out),
        ];
        if let Some(l) = light {
            args.extend(["--light", l]);
        }
        ok(&lgimap(&args));
        out
    };
    let l0 = render(Some("0"), "l0.pfm");
    let l1 = render(Some("1"), "l1.pfm");
    let both = render(None, "both.pfm");
    let sum = t.path().join("sum.pfm");
    let png = t.path().join("sum.png");
    ok(&lgimap(&["compose", "--inputs", s(&l0), s(&l1), "--out", s(&sum), "--clamp", s(&png)]));
    let a = decode_pfm(&fs::read(&sum).unwrap()).unwrap();
    let b = decode_pfm(&fs::read(&both).unwrap()).unwrap();
    let worst = a.data.iter().zip(&b.data).map(|(x, y)| (x - y).abs()).fold(0f32, f32::max);
    assert!(worst < 1e-6, "max error {worst}");
    assert!(png.exists());

    // A single input passes through unchanged, and so does adding a zero image.
    let one = t.path().join("one.pfm");
    ok(&lgimap(&["compose", "--inputs", s(&l0), "--out", s(&one)]));
    assert_eq!(fs::read(&one).unwrap(), fs::read(&l0).unwrap());

    let zero = t.path().join("zero.pfm");
    let mut z = decode_pfm(&fs::read(&l0).unwrap()).unwrap();
    z.data.iter_mut().for_each(|v| *v = 0.0);
    fs::write(&zero, encode_pfm(&z, true)).unwrap();
    let plus_zero = t.path().join("plus_zero.pfm");
    ok(&lgimap(&["compose", "--inputs", s(&l0), s(&zero), "--out", s(&plus_zero)]));
    assert_eq!(fs::read(&plus_zero).unwrap(), fs::read(&l0).unwrap());

    // Mixed shapes are an input error.
    let small = t.path().join("small.pfm");
    fs::write(&small, encode_pfm(&Pfm::new(2, 2, 3, vec![0.0; 12]).unwrap(), true)).unwrap();
    let out = lgimap(&["compose", "--inputs", s(&l0), s(&small), "--out", s(&t.path().join("bad.pfm"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sunlight_matches_a_distant_point_light() {
    let t = TempDir::new().unwrap();
    gen_kind(t.path(), "sphere", 128);
    let scene = t.path().join("scene_000.json");
    let depth = t.path().join("scene_000_depth.pfm");
    let mut cfg: Value = serde_json::from_slice(&fs::read(&scene).unwrap()).unwrap();
    let light = &cfg["lights"][0];
    let (az, el) = (light["azimuth"].as_f64().unwrap(), light["elevation"].as_f64().unwrap());
    let dir = [el.cos() * az.cos(), el.cos() * az.sin(), el.sin()];
    let anchor = [
        light["position"][0].as_f64().unwrap() - 2.5 * dir[0],
        light["position"][1].as_f64().unwrap() - 2.5 * dir[1],
        light["position"][2].as_f64().unwrap() - 2.5 * dir[2],
    ];
    let dist = 1e4;
    cfg["lights"][0]["position"] = serde_json::json!([
        anchor[0] + dist * dir[0],
        anchor[1] + dist * dir[1],
        anchor[2] + dist * dir[2]
    ]);
    cfg["lights"][0]["distance"] = dist.into();
    let far = t.path().join("far.json");
    fs::write(&far, cfg.to_string()).unwrap();

    lgi(&depth, &far, &t.path().join("point"), &[]);
    let sun = format!("{},{},{}", dir[0], dir[1], dir[2]);
    let r = lgi(&depth, &far, &t.path().join("sun"), &["--sunlight", &sun]);
    assert_eq!(r["config"]["light"]["kind"], "directional");

    let p = read_mask_png(t.path().join("point_hard.png")).unwrap();
    let q = read_mask_png(t.path().join("sun_hard.png")).unwrap();
    let differ = p.values.iter().zip(&q.values).filter(|(a, b)| a != b).count();
    let either = p.values.iter().zip(&q.values).filter(|(a, b)| **a > 0.0 || **b > 0.0).count();
    let both = p.values.iter().zip(&q.values).filter(|(a, b)| **a > 0.0 && **b > 0.0).count();
    assert!(both > 100, "shadow should be visible");
    let iou = both as f64 / either as f64;
    assert!(iou >= 0.99 && (differ as f64) < 1e-3 * p.values.len() as f64, "iou {iou}, {differ} pixels differ");
}

#[test]
fn sphere_scene_lgi_matches_library_and_reports_iou() {
    let t = TempDir::new().unwrap();
    gen_kind(t.path(), "sphere", 128);
    let (depth, scene) = (t.path().join("scene_000_depth.pfm"), t.path().join("scene_000.json"));
    let r = lgi(&depth, &scene, &t.path().join("sphere"), &[]);

    let entry = lgimap_core::synth::sphere_scene(128);
    let d = lgimap_core::synth::render_depth(&entry.scene, &entry.intrinsics).unwrap();
    let maps = lgimap_core::compute_lgi(&d, &entry.intrinsics, &entry.light, &Default::default()).unwrap();
    assert_eq!(r["metrics"]["lgi_digest"], lgimap_core::io::digest_lgi(&maps));

    let hard = t.path().join("sphere_hard.png");
    let gt = t.path().join("scene_000_gt.png");
    let m = ok(&lgimap(&["eval", "--pred", s(&hard), "--gt", s(&gt)]))["metrics"].clone();
    let iou = m["iou"].as_f64().unwrap();
    println!("sphere scene hard mask vs oracle: IoU {iou:.4}, BER {:.4}", m["ber"].as_f64().unwrap());
    assert!(iou > 0.5);
}

#[test]
fn losses_on_exact_predictions_vanish() {
    let t = TempDir::new().unwrap();
    // zt = 0.5*0 + 0.5*2 + 0 = 1; drift target (2 - 1) / 0.5 = 2.
    let batch = serde_json::json!({
        "sigma": 1.0,
        "items": [{ "z0": [0.0], "z1": [2.0], "t": 0.5, "noise": [0.0], "drift": [2.0] }]
    });
    let path = t.path().join("batch.json");
    fs::write(&path, batch.to_string()).unwrap();
    let r = ok(&lgimap(&["losses", "latent", "--input", s(&path)]));
    assert_eq!(r["metrics"]["latent_loss"], 0.0);
    assert_eq!(r["metrics"]["items"][0]["retrieved"][0], 2.0);

    let g = t.path().join("g.png");
    write_mask(&g, 4, 1, &[0, 1, 1, 0]);
    let r = ok(&lgimap(&["losses", "mask", "--pred", s(&g), "--gt", s(&g), "--dilation", "1"]));
    assert!(r["metrics"]["bce"].as_f64().unwrap() < 1e-6);
    assert_eq!(r["metrics"]["iou_loss"], 0.0);

    let bad = t.path().join("bad.json");
    fs::write(&bad, r#"{"sigma": 1.0, "items": [{"z0": [0.0], "z1": [1.0], "t": 0.5, "noise": [0.0], "drift": [0.0], "extra": 1}]}"#).unwrap();
    let out = lgimap(&["losses", "latent", "--input", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("items[0]"));
}

#[test]
fn bench_digests_are_thread_invariant() {
    let r = ok(&lgimap(&["bench", "--size", "512", "--n", "16", "--threads", "1,8", "--repeat", "3"]));
    assert_eq!(r["metrics"]["digests_identical"], true);
    let runs = r["metrics"]["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 2);
    assert_eq!(r["config"]["threads"], serde_json::json!([1, 8]));
    let rate = |i: usize| runs[i]["pixel_samples_per_s"].as_f64().unwrap();
    println!("bench 512^2 N=16: {:.3e} (1 thread) / {:.3e} (8 threads) pixel-samples/s", rate(0), rate(1));
    // Scaling can only show up with more than one core.
    let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    if cores > 1 {
        assert!(rate(1) > rate(0));
    } else {
        println!("single core available; scaling check not applicable");
    }

    let env = ok(&lgimap_env(&["bench", "--size", "32", "--threads", "1,2", "--repeat", "1"], &[("LGIMAP_THREADS", "2")]));
    assert_eq!(env["config"]["threads"], serde_json::json!([2]));
}
