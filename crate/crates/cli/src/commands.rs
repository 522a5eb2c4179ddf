use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use lgimap_core::bridgemath::{
    bridge_sample, combined_loss, drift_target, latent_loss, light_estimation_loss, mask_bce, mask_iou_loss,
    retrieve_target, weighted_l1, BridgeTriple, Image, LatentVec, WeightedL1Config,
};
use lgimap_core::io::{
    decode_mask_png, decode_pfm, digest_lgi, encode_display_png, encode_mask_png, encode_pfm, image_to_pfm,
    lgi_to_pfm, pfm_to_depth, pfm_to_image, depth_to_pfm, LightConfig, SceneConfig,
};
use lgimap_core::metrics::{ber, confusion, iou, rmse};
use lgimap_core::synth::{ambiguous_suite, oracle_shadow_mask, render_depth as trace_depth, render_direct, scene_suite_with, sphere_scene};
use lgimap_core::{compute_lgi, hard_mask, soft_mask, Interp, LgiConfig, LightSpec, Point3, ShadowMask};
use serde::Deserialize;
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::report::RunReport;
use crate::{BenchArgs, ComposeArgs, EvalArgs, GenSceneArgs, InterpArg, LgiArgs, LossCommand, RenderDepthArgs, SuiteKind};

const LITTLE_ENDIAN: bool = true;

fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::output_io(path, e))
}

fn parse_scene(report: &mut RunReport, path: &Path) -> CliResult<SceneConfig> {
    let bytes = report.input(path)?;
    let text = String::from_utf8(bytes).map_err(|_| CliError::input(format!("{}: not UTF-8", path.display())))?;
    Ok(SceneConfig::from_json(&text)?)
}

fn pick_light(lights: &[LightSpec], index: usize) -> CliResult<&LightSpec> {
    lights.get(index).ok_or_else(|| {
        CliError::input(format!("light index {index} out of range ({} lights in config)", lights.len()))
    })
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn gen_scene(a: &GenSceneArgs) -> CliResult<()> {
    if a.resolution == 0 {
        return Err(CliError::input("--resolution must be > 0"));
    }
    let mut report = RunReport::start("gen-scene");
    report.seed = Some(a.seed);
    report.config = json!({
        "seed": a.seed,
        "count": a.count,
        "resolution": a.resolution,
        "kind": a.kind,
        "out": a.out,
        "lgi": LgiConfig::default(),
    });
    create_dir(&a.out)?;
    let suite = match a.kind {
        SuiteKind::Suite => scene_suite_with(a.seed, a.count, a.resolution),
        SuiteKind::Ambiguous => ambiguous_suite(a.seed, a.count, a.resolution),
        SuiteKind::Sphere => vec![sphere_scene(a.resolution); a.count.min(1)],
    };
    let mut manifest = Vec::with_capacity(suite.len());
    for (i, entry) in suite.iter().enumerate() {
        let cfg = SceneConfig::from_suite_entry(entry, Some(a.seed), LgiConfig::default());
        let resolved = cfg.resolve()?;
        let depth = trace_depth(&resolved.scene, &resolved.intrinsics)?;
        let gt = oracle_shadow_mask(&resolved.scene, &depth, &resolved.intrinsics, &entry.light, &resolved.oracle)?;

        let names = [
            format!("scene_{i:03}.json"),
            format!("scene_{i:03}_depth.pfm"),
            format!("scene_{i:03}_gt.png"),
        ];
        let blobs = [
            cfg.to_json()?.into_bytes(),
            encode_pfm(&depth_to_pfm(&depth), LITTLE_ENDIAN),
            encode_mask_png(&gt)?,
        ];
        let mut files = serde_json::Map::new();
        for (name, bytes) in names.iter().zip(&blobs) {
            report.output(&a.out.join(name), bytes)?;
            files.insert(name.clone(), lgimap_core::io::sha256_hex(bytes).into());
        }
        manifest.push(json!({ "index": i, "files": files, "shadow_pixels": gt.positive_count() }));
    }
    let manifest = json!({ "seed": a.seed, "count": a.count, "resolution": a.resolution, "scenes": manifest });
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    report.output(&a.out.join("manifest.json"), text.as_bytes())?;
    report.metric("scenes", suite.len());
    report.finish(None)
}

pub fn render_depth(a: &RenderDepthArgs) -> CliResult<()> {
    let mut report = RunReport::start("render-depth");
    let cfg = parse_scene(&mut report, &a.scene)?;
    let resolved = cfg.resolve()?;
    report.seed = resolved.seed;
    report.config = json!({ "scene": cfg, "light": a.light, "gt": a.gt, "radiance": a.radiance });
    let depth = trace_depth(&resolved.scene, &resolved.intrinsics)?;
    report.output(&a.out, &encode_pfm(&depth_to_pfm(&depth), LITTLE_ENDIAN))?;
    report.metric("valid_pixels", depth.valid_count());

    if let Some(gt_path) = &a.gt {
        let light = pick_light(&resolved.lights, a.light.unwrap_or(0))?;
        let gt = oracle_shadow_mask(&resolved.scene, &depth, &resolved.intrinsics, light, &resolved.oracle)?;
        report.output(gt_path, &encode_mask_png(&gt)?)?;
        report.metric("shadow_pixels", gt.positive_count());
    }
    if let Some(path) = &a.radiance {
        let lights = match a.light {
            Some(i) => vec![*pick_light(&resolved.lights, i)?],
            None => resolved.lights.clone(),
        };
        let img = render_direct(&resolved.scene, &resolved.intrinsics, &lights, &resolved.oracle)?;
        report.output(path, &encode_pfm(&image_to_pfm(&img)?, LITTLE_ENDIAN))?;
    }
    report.finish(None)
}

fn degrees(v: f64) -> f64 {
    v.to_radians()
}

pub fn lgi(a: &LgiArgs) -> CliResult<()> {
    let mut report = RunReport::start("lgi");
    let depth_bytes = report.input(&a.depth)?;
    let depth = pfm_to_depth(&decode_pfm(&depth_bytes)?)?;
    let scene = parse_scene(&mut report, &a.scene)?;
    let resolved = scene.resolve()?;
    report.seed = resolved.seed;

    let mut cfg = resolved.lgi;
    if let Some(n) = a.n {
        cfg = cfg.with_samples(n);
    }
    if let Some(eta) = a.eta {
        cfg = cfg.with_eta(degrees(eta));
    }
    if let Some(beta) = a.soft {
        cfg.softness_beta = degrees(beta);
    }
    if let Some(interp) = a.interp {
        cfg = cfg.with_interp(match interp {
            InterpArg::Nearest => Interp::Nearest,
            InterpArg::Bilinear => Interp::Bilinear,
        });
    }
    cfg.validate()?;
    let light = match &a.sunlight {
        Some(d) => LightSpec::directional(Point3::new(d[0], d[1], d[2]))?,
        None => *pick_light(&resolved.lights, a.light)?,
    };
    report.config = json!({
        "depth": a.depth,
        "scene": a.scene,
        "intrinsics": resolved.intrinsics,
        "light": LightConfig::from_spec(&light),
        "light_index": if a.sunlight.is_some() { None } else { Some(a.light) },
        "lgi": cfg,
        "soft": a.soft.is_some(),
        "out": a.out,
    });

    let maps = compute_lgi(&depth, &resolved.intrinsics, &light, &cfg)?;
    let hard = hard_mask(&maps, cfg.eta);
    report.output(&with_suffix(&a.out, "_lgi.pfm"), &encode_pfm(&lgi_to_pfm(&maps), LITTLE_ENDIAN))?;
    report.output(&with_suffix(&a.out, "_valid.png"), &encode_mask_png(&maps.validity_mask())?)?;
    report.output(&with_suffix(&a.out, "_hard.png"), &encode_mask_png(&hard)?)?;
    if a.soft.is_some() {
        let soft = soft_mask(&maps, cfg.eta, cfg.softness_beta)?;
        report.output(&with_suffix(&a.out, "_soft.png"), &encode_mask_png(&soft)?)?;
    }
    report.metric("valid_pixels", maps.valid_count());
    report.metric("shadow_pixels", hard.positive_count());
    report.metric("lgi_digest", digest_lgi(&maps));
    report.finish(a.report.as_deref())
}

fn read_mask(report: &mut RunReport, path: &Path) -> CliResult<ShadowMask> {
    let bytes = report.input(path)?;
    Ok(decode_mask_png(&bytes)?)
}

fn read_image(report: &mut RunReport, path: &Path) -> CliResult<Image> {
    let bytes = report.input(path)?;
    Ok(pfm_to_image(&decode_pfm(&bytes)?))
}

pub fn eval(a: &EvalArgs) -> CliResult<()> {
    let mut report = RunReport::start("eval");
    report.config = json!({
        "pred": a.pred,
        "gt": a.gt,
        "threshold": a.threshold,
        "region_rmse": a.region_rmse,
    });
    let pred = read_mask(&mut report, &a.pred)?;
    let gt = read_mask(&mut report, &a.gt)?;
    let counts = confusion(&pred, &gt, a.threshold)?;
    report.metric("confusion", counts);
    report.metric_or_undefined("iou", iou(&counts));
    report.metric_or_undefined("ber", ber(&counts));
    if let Some(paths) = &a.region_rmse {
        let img_a = read_image(&mut report, &paths[0])?;
        let img_b = read_image(&mut report, &paths[1])?;
        if (img_a.width, img_a.height) != (gt.width, gt.height) {
            return Err(lgimap_core::Error::shape(
                format!("{}x{}", gt.width, gt.height),
                format!("{}x{}", img_a.width, img_a.height),
            )
            .into());
        }
        let region = gt.binarize(a.threshold);
        report.metric("rmse", rmse(&img_a, &img_b, None)?);
        report.metric_or_undefined("rmse_shadow", rmse(&img_a, &img_b, Some(&region)));
    }
    report.finish(a.report.as_deref())
}

pub fn compose(a: &ComposeArgs) -> CliResult<()> {
    let mut report = RunReport::start("compose");
    report.config = json!({ "inputs": a.inputs, "out": a.out, "clamp": a.clamp });
    let images = a
        .inputs
        .iter()
        .map(|p| read_image(&mut report, p))
        .collect::<CliResult<Vec<_>>>()?;
    let sum = lgimap_core::bridgemath::compose_lights(&images)?;
    report.output(&a.out, &encode_pfm(&image_to_pfm(&sum)?, LITTLE_ENDIAN))?;
    if let Some(path) = &a.clamp {
        report.output(path, &encode_display_png(&sum)?)?;
    }
    report.metric("max", sum.data.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    report.finish(None)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

pub fn bench(a: &BenchArgs, threads: &[usize]) -> CliResult<()> {
    if a.size == 0 || a.repeat == 0 || threads.is_empty() {
        return Err(CliError::input("--size, --repeat and --threads must be non-empty and > 0"));
    }
    let entry = sphere_scene(a.size);
    let cfg = LgiConfig::default().with_samples(a.n);
    cfg.validate()?;
    let depth = trace_depth(&entry.scene, &entry.intrinsics)?;
    let mut report = RunReport::start("bench");
    report.config = json!({
        "size": a.size,
        "n": a.n,
        "threads": threads,
        "repeat": a.repeat,
        "lgi": cfg,
        "scene": "sphere",
    });
    let work = (a.size * a.size * a.n) as f64;
    let mut runs = Vec::new();
    let mut digests = Vec::new();
    for &t in threads {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CliError {
                code: 1,
                message: format!("thread pool: {e}"),
            })?;
        let mut times = Vec::with_capacity(a.repeat);
        let mut digest = String::new();
        for _ in 0..a.repeat {
            let start = Instant::now();
            let maps = pool.install(|| compute_lgi(&depth, &entry.intrinsics, &entry.light, &cfg))?;
            times.push(start.elapsed().as_secs_f64());
            digest = digest_lgi(&maps);
        }
        let secs = median(times);
        runs.push(json!({
            "threads": t,
            "median_s": secs,
            "pixel_samples_per_s": work / secs,
            "digest": digest,
        }));
        digests.push(digest);
    }
    report.metric("runs", runs);
    report.metric("digests_identical", digests.windows(2).all(|w| w[0] == w[1]));
    report.finish(a.report.as_deref())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LatentItem {
    z0: LatentVec,
    z1: LatentVec,
    t: f64,
    noise: LatentVec,
    /// Predicted drift at z(t).
    drift: LatentVec,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LatentBatch {
    sigma: f64,
    items: Vec<LatentItem>,
}

pub fn losses(c: &LossCommand) -> CliResult<()> {
    match c {
        LossCommand::Latent { input } => {
            let mut report = RunReport::start("losses latent");
            let bytes = report.input(input)?;
            let de = &mut serde_json::Deserializer::from_slice(&bytes);
            let batch: LatentBatch = serde_path_to_error::deserialize(de)
                .map_err(|e| CliError::input(format!("{}: {}: {}", input.display(), e.path(), e.inner())))?;
            report.config = json!({ "input": input, "sigma": batch.sigma, "items": batch.items.len() });
            let triples: Vec<BridgeTriple> = batch
                .items
                .iter()
                .map(|it| BridgeTriple {
                    z0: it.z0.clone(),
                    z1: it.z1.clone(),
                    t: it.t,
                    noise: it.noise.clone(),
                })
                .collect();
            let mut preds = batch.items.iter().map(|it| &it.drift);
            let loss = latent_loss(&triples, batch.sigma, |_, _| preds.next().expect("one drift per item").clone())?;
            let mut per_item = Vec::with_capacity(triples.len());
            for (tr, it) in triples.iter().zip(&batch.items) {
                let zt = bridge_sample(&tr.z0, &tr.z1, tr.t, batch.sigma, &tr.noise)?;
                per_item.push(json!({
                    "zt": zt,
                    "drift_target": drift_target(&zt, &tr.z1, tr.t)?,
                    "retrieved": retrieve_target(&zt, tr.t, &it.drift)?,
                }));
            }
            report.metric("latent_loss", loss);
            report.metric("items", per_item);
            report.finish(None)
        }
        LossCommand::Image {
            pred,
            target,
            source,
            tau,
            kernel,
            lz,
            lambda,
        } => {
            let mut report = RunReport::start("losses image");
            let cfg = WeightedL1Config {
                tau: *tau,
                dilation_kernel: *kernel,
            };
            cfg.validate()?;
            report.config = json!({
                "pred": pred, "target": target, "source": source,
                "weighted_l1": cfg, "lz": lz, "lambda": lambda,
            });
            let x1_hat = read_image(&mut report, pred)?;
            let x1 = read_image(&mut report, target)?;
            let x0 = read_image(&mut report, source)?;
            let lx = weighted_l1(&x1_hat, &x1, &x0, &cfg)?;
            report.metric("weighted_l1", lx);
            if let Some(lz) = lz {
                report.metric("combined", combined_loss(*lz, lx, *lambda));
            }
            report.finish(None)
        }
        LossCommand::Mask { pred, gt, dilation } => {
            let mut report = RunReport::start("losses mask");
            report.config = json!({ "pred": pred, "gt": gt, "dilation": dilation });
            let p = read_mask(&mut report, pred)?;
            let g = read_mask(&mut report, gt)?;
            report.metric("bce", mask_bce(&p, &g)?);
            report.metric_or_undefined("iou_loss", mask_iou_loss(&p, &g));
            report.metric_or_undefined("light_loss", light_estimation_loss(&p, &g, *dilation));
            report.finish(None)
        }
    }
}
