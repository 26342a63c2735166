//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use irsr::backends::{restore, BackendSpec, BuiltinBackend, BuiltinKind};
use irsr::ensemble::{
    fuse_unclamped, self_ensemble, tiled_restore, Blend, BranchConfig, EnsembleConfig,
    FusionWeights, Pipeline, PipelineConfig, TileConfig, TilePlan,
};
use irsr::geometry::{apply_transform, compose, inverse, TransformId};
use irsr::harness::{
    build_manifest, render_report, run_eval, synth_scenes, synthesize_lr, EvalOptions, ReportFormat,
};
use irsr::image::{load_image, store_image, BitDepth, Image, PixelFormat};
use irsr::metrics::{psnr, score, ssim, MetricConfig, SsimParams};
use irsr::resample::{axis_weights, bicubic_upscale, keys_cubic, resize, KernelSpec};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize) -> Image {
    Image::from_fn(h, w, c, |_, _, _| rng.gen::<f64>())
}

fn table2_score_consistency() -> Outcome {
    let rows = [
        ("Bicubic", 37.1588, 0.9270, 55.6982),
        ("MambaIRv2", 37.8274, 0.9321, 56.4690),
        ("HAT", 37.8657, 0.9321, 56.5070),
        ("Fusion", 37.8699, 0.9321, 56.5128),
    ];
    let mut worst: f64 = 0.0;
    for (name, p, s, printed) in rows {
        let d = (score(p, s) - printed).abs();
        worst = worst.max(d);
        check(d <= 0.0015, || {
            format!("{name}: computed {:.4}, printed {printed}", score(p, s))
        })?;
    }
    Ok(format!("4 rows, max deviation {worst:.4}"))
}

fn d4_group_laws() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let images: Vec<Image> = [(5, 9, 1), (7, 4, 3), (1, 6, 1)]
        .iter()
        .map(|&(h, w, c)| random_image(&mut rng, h, w, c))
        .collect();
    let mut checked = 0;
    for a in TransformId::ALL {
        check(compose(a, inverse(a)) == TransformId::Identity, || {
            format!("{a} * {a}^-1 != id")
        })?;
        check(
            compose(TransformId::Identity, a) == a && compose(a, TransformId::Identity) == a,
            || format!("identity law fails for {a}"),
        )?;
        for img in &images {
            let back = apply_transform(&apply_transform(img, a), inverse(a));
            check(back == *img, || format!("{a} round trip mismatch"))?;
        }
        for b in TransformId::ALL {
            for c in TransformId::ALL {
                check(
                    compose(compose(a, b), c) == compose(a, compose(b, c)),
                    || format!("associativity fails for ({a}, {b}, {c})"),
                )?;
            }
            for img in &images {
                let two_step = apply_transform(&apply_transform(img, b), a);
                check(two_step == apply_transform(img, compose(a, b)), || {
                    format!("composition table wrong for {a} after {b}")
                })?;
                checked += 1;
            }
        }
    }
    let row: Vec<_> = TransformId::ALL
        .iter()
        .map(|&b| compose(TransformId::Rot90, b))
        .collect();
    let mut sorted = row.clone();
    sorted.sort_by_key(|t| t.code());
    sorted.dedup();
    check(sorted.len() == 8, || {
        "composition row is not a permutation".into()
    })?;
    Ok(format!("64 products, {checked} image checks, 0 mismatches"))
}

fn self_ensemble_oracle() -> Outcome {
    let b = BuiltinBackend::new(BuiltinKind::BlurBicubic, 4, KernelSpec::default())
        .map_err(|e| e.to_string())?;
    let cfg = EnsembleConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let img = random_image(&mut rng, 24, 32, 1);
        let direct = restore(&b, &img).map_err(|e| e.to_string())?;
        let ens = self_ensemble(&b, &img, &cfg).map_err(|e| e.to_string())?;
        worst = worst.max(direct.max_abs_diff(&ens));
    }
    check(worst < 1e-9, || format!("max abs error {worst:e}"))?;
    Ok(format!(
        "10 images x 8 transforms, max abs error {worst:.1e}"
    ))
}

fn tiled_equivalence() -> Outcome {
    let b = BuiltinBackend::new(BuiltinKind::BlurBicubic, 4, KernelSpec::default())
        .map_err(|e| e.to_string())?;
    let tc = TileConfig {
        tile: 16,
        overlap: 8,
        blend: Blend::Uniform,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let img = random_image(&mut rng, 37, 53, 1);
    let direct = restore(&b, &img).map_err(|e| e.to_string())?;
    let tiled = tiled_restore(&b, &img, &tc).map_err(|e| e.to_string())?;
    let err = direct.max_abs_diff(&tiled);
    check(err < 1e-9, || format!("max abs error {err:e}"))?;

    let plan = TilePlan::new(37, 53, 4, &tc).map_err(|e| e.to_string())?;
    let wsum = plan
        .weight_totals()
        .iter()
        .map(|t| (t - 1.0).abs())
        .fold(0.0, f64::max);
    check(wsum <= 1e-12, || format!("weight sums deviate by {wsum:e}"))?;
    // Tent weights are normalised by their totals; the normalised sum is 1.
    let tent = TilePlan::new(
        37,
        53,
        4,
        &TileConfig {
            blend: Blend::Tent,
            ..tc
        },
    )
    .map_err(|e| e.to_string())?;
    check(tent.weight_totals().iter().all(|&t| t > 0.0), || {
        "tent weights vanish somewhere".into()
    })?;
    Ok(format!(
        "{} tiles, max abs error {err:.1e}, weight-sum deviation {wsum:.1e}",
        plan.tiles().len()
    ))
}

fn metric_analytics() -> Outcome {
    let base = Image::filled(32, 32, 1, 0.5);
    let off = base.map(|v| v + 1.0 / 255.0);
    let p = psnr(&base, &off).map_err(|e| e.to_string())?;
    check((p - 48.1308).abs() <= 1e-3, || format!("PSNR {p}"))?;

    let sp = SsimParams::default();
    let quarter = Image::filled(32, 32, 1, 0.25);
    let s = ssim(&base, &quarter, &sp).map_err(|e| e.to_string())?;
    check((s - 0.800064).abs() <= 1e-6, || format!("SSIM {s}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = random_image(&mut rng, 29, 41, 1);
    let y = x.map(|v| (v + 0.05 * (v * 37.0).sin()).clamp(0.0, 1.0));
    let self_ssim = ssim(&x, &x, &sp).map_err(|e| e.to_string())?;
    check(self_ssim == 1.0, || format!("SSIM(x, x) = {self_ssim}"))?;

    let p0 = psnr(&x, &y).map_err(|e| e.to_string())?;
    let s0 = ssim(&x, &y, &sp).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for t in TransformId::ALL {
        let (tx, ty) = (apply_transform(&x, t), apply_transform(&y, t));
        let pt = psnr(&tx, &ty).map_err(|e| e.to_string())?;
        let st = ssim(&tx, &ty, &sp).map_err(|e| e.to_string())?;
        worst = worst.max((pt - p0).abs()).max((st - s0).abs());
    }
    check(worst <= 1e-12, || {
        format!("D4 invariance deviation {worst:e}")
    })?;
    Ok(format!(
        "PSNR {p:.4} dB, SSIM {s:.6}, D4 deviation {worst:.1e}"
    ))
}

fn kernel_suite() -> Outcome {
    let a = -0.5;
    let mut pou: f64 = 0.0;
    for i in 0..1000 {
        let t = i as f64 / 1000.0;
        let sum: f64 = (-2..=2).map(|k| keys_cubic(t - k as f64, a)).sum();
        pou = pou.max((sum - 1.0).abs());
    }
    check(pou < 1e-12, || format!("partition of unity off by {pou:e}"))?;

    let k = KernelSpec::default();
    for (n_in, n_out) in [(37, 148), (50, 13), (16, 16)] {
        for taps in axis_weights(n_in, n_out, &k) {
            let s: f64 = taps.iter().map(|&(_, w)| w).sum();
            check((s - 1.0).abs() < 1e-12, || {
                format!("weights for {n_in}->{n_out} sum to {s}")
            })?;
        }
    }

    let ramp = Image::from_fn(20, 24, 1, |_, y, x| 0.1 + 0.01 * y as f64 + 0.02 * x as f64);
    let up = bicubic_upscale(&ramp, 4, &k).map_err(|e| e.to_string())?;
    let mut ramp_err: f64 = 0.0;
    for y in 8..up.height() - 8 {
        for x in 8..up.width() - 8 {
            let sy = (y as f64 + 0.5) / 4.0 - 0.5;
            let sx = (x as f64 + 0.5) / 4.0 - 0.5;
            ramp_err = ramp_err.max((up.get(0, y, x) - (0.1 + 0.01 * sy + 0.02 * sx)).abs());
        }
    }
    check(ramp_err < 1e-9, || format!("ramp error {ramp_err:e}"))?;

    let flat = Image::filled(19, 23, 1, 0.37);
    let mut const_err: f64 = 0.0;
    for (h, w) in [(76, 92), (5, 6), (19, 50)] {
        let r = resize(&flat, h, w, &k).map_err(|e| e.to_string())?;
        const_err = const_err.max(
            r.data()
                .iter()
                .map(|v| (v - 0.37).abs())
                .fold(0.0, f64::max),
        );
    }
    check(const_err <= 1e-12, || {
        format!("constant drift {const_err:e}")
    })?;
    Ok(format!(
        "unity {pou:.1e}, ramp {ramp_err:.1e}, constant {const_err:.1e}"
    ))
}

fn write_synth_set(dir: &Path) -> Result<(), String> {
    for (name, img) in synth_scenes(12, 7) {
        store_image(
            &img,
            dir.join(format!("{name}.png")),
            PixelFormat::for_image(&img, BitDepth::Sixteen),
        )
        .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn single(kind: BuiltinKind) -> PipelineConfig {
    PipelineConfig::new(
        4,
        vec![BranchConfig::new(kind.to_string(), BackendSpec::Builtin { kind }).without_tiling()],
    )
}

fn two_branch() -> PipelineConfig {
    PipelineConfig::new(
        4,
        vec![
            BranchConfig::new(
                "blur",
                BackendSpec::Builtin {
                    kind: BuiltinKind::BlurBicubic,
                },
            )
            .with_tiling(TileConfig {
                tile: 24,
                overlap: 8,
                blend: Blend::Tent,
            }),
            BranchConfig::new(
                "bicubic",
                BackendSpec::Builtin {
                    kind: BuiltinKind::Bicubic,
                },
            )
            .with_self_ensemble(true),
        ],
    )
}

fn end_to_end_ordering() -> Outcome {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let hr = root.path().join("hr");
    std::fs::create_dir(&hr).map_err(|e| e.to_string())?;
    write_synth_set(&hr)?;
    let m = build_manifest(&hr, None, 4).map_err(|e| e.to_string())?;
    let m = synthesize_lr(&m, &root.path().join("lr"), &KernelSpec::default())
        .map_err(|e| e.to_string())?;
    let mc = MetricConfig::default();
    let opts = EvalOptions::default();
    let bic = run_eval(&m, &single(BuiltinKind::Bicubic), &mc, &opts).map_err(|e| e.to_string())?;
    let near =
        run_eval(&m, &single(BuiltinKind::Nearest), &mc, &opts).map_err(|e| e.to_string())?;
    check(
        bic.images.len() == 12 && !bic.partial && !near.partial,
        || "incomplete reports".into(),
    )?;
    let (sb, sn) = (bic.aggregate.score, near.aggregate.score);
    check(sb > sn, || format!("bicubic {sb:.4} <= nearest {sn:.4}"))?;

    let p = Pipeline::build(&two_branch()).map_err(|e| e.to_string())?;
    let w = FusionWeights::equal(2);
    let mut worst: f64 = 0.0;
    for e in &m.entries {
        let lr = load_image(e.lr.as_ref().unwrap()).map_err(|e| e.to_string())?;
        let branches = p.run_branches(&lr).map_err(|e| e.to_string())?;
        let fused = p.run(&lr).map_err(|e| e.to_string())?;
        let recomputed = Image::from_fn(
            fused.height(),
            fused.width(),
            fused.channels(),
            |c, y, x| {
                (0.5 * branches[0].get(c, y, x) + 0.5 * branches[1].get(c, y, x)).clamp(0.0, 1.0)
            },
        );
        worst = worst.max(fused.max_abs_diff(&recomputed));
        let via_fuse = fuse_unclamped(&branches, &w)
            .map_err(|e| e.to_string())?
            .clamp01();
        worst = worst.max(fused.max_abs_diff(&via_fuse));
    }
    check(worst <= 1e-12, || format!("fusion deviates by {worst:e}"))?;
    Ok(format!(
        "Score bicubic {sb:.4} > nearest {sn:.4}; fused max abs error {worst:.1e} over 12 images"
    ))
}

fn determinism() -> Outcome {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let hr = root.path().join("hr");
    std::fs::create_dir(&hr).map_err(|e| e.to_string())?;
    write_synth_set(&hr)?;
    let m = build_manifest(&hr, None, 4).map_err(|e| e.to_string())?;
    let m = synthesize_lr(&m, &root.path().join("lr"), &KernelSpec::default())
        .map_err(|e| e.to_string())?;
    let cfg = two_branch();
    let mc = MetricConfig::default();
    let run = |tag: &str, workers: usize| -> Result<String, String> {
        let opts = EvalOptions {
            workers,
            sr_dir: Some(root.path().join(tag)),
        };
        let r = run_eval(&m, &cfg, &mc, &opts).map_err(|e| e.to_string())?;
        render_report(&r, ReportFormat::Json).map_err(|e| e.to_string())
    };
    let a = run("a", 1)?;
    let b = run("b", 1)?;
    let c = run("c", 4)?;
    check(a == b, || "JSON differs between identical runs".into())?;
    check(a == c, || "JSON differs between 1 and 4 workers".into())?;
    for e in &m.entries {
        let f = format!("{}.png", e.name);
        let bytes =
            |tag: &str| std::fs::read(root.path().join(tag).join(&f)).map_err(|e| e.to_string());
        let (x, y, z) = (bytes("a")?, bytes("b")?, bytes("c")?);
        check(x == y && x == z, || format!("{f} differs between runs"))?;
    }
    Ok("2 runs + 4-worker run: identical JSON and 12 identical images".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        (
            "score-formula consistency on reference rows",
            table2_score_consistency,
        ),
        ("D4 group laws", d4_group_laws),
        ("self-ensemble oracle", self_ensemble_oracle),
        ("tiled-equivalence oracle", tiled_equivalence),
        ("metric analytic values", metric_analytics),
        ("bicubic kernel suite", kernel_suite),
        ("end-to-end ordering and fusion", end_to_end_ordering),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let t = Instant::now();
        let r = f();
        let ms = t.elapsed().as_millis();
        match r {
            Ok(detail) => println!("PASS  {name} ({detail}) [{ms} ms]"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why} [{ms} ms]");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
