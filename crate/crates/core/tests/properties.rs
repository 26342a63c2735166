use proptest::prelude::*;

use irsr::backends::{restore, BuiltinBackend, BuiltinKind};
use irsr::ensemble::{fuse, tiled_restore, Blend, FusionWeights, TileConfig, TilePlan};
use irsr::geometry::{apply_transform, compose, inverse, TransformId};
use irsr::image::{dequantize, modcrop, quantize, BitDepth, Image};
use irsr::metrics::{psnr, ssim, SsimParams};
use irsr::resample::{bicubic_upscale, degrade, resize, KernelSpec};

fn image(max_h: usize, max_w: usize) -> impl Strategy<Value = Image> {
    (
        1..=max_h,
        1..=max_w,
        prop_oneof![Just(1usize), Just(3usize)],
    )
        .prop_flat_map(|(h, w, c)| {
            proptest::collection::vec(0.0f64..=1.0, h * w * c)
                .prop_map(move |d| Image::new(h, w, c, d).unwrap())
        })
}

fn gray(
    h: std::ops::RangeInclusive<usize>,
    w: std::ops::RangeInclusive<usize>,
) -> impl Strategy<Value = Image> {
    (h, w).prop_flat_map(|(h, w)| {
        proptest::collection::vec(0.0f64..=1.0, h * w)
            .prop_map(move |d| Image::new(h, w, 1, d).unwrap())
    })
}

fn transform() -> impl Strategy<Value = TransformId> {
    (0u8..8).prop_map(|c| TransformId::from_code(c).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn transform_round_trip(img in image(9, 9), t in transform()) {
        prop_assert_eq!(apply_transform(&apply_transform(&img, t), inverse(t)), img);
    }

    #[test]
    fn composition_matches_sequential_application(img in image(6, 7), a in transform(), b in transform()) {
        prop_assert_eq!(
            apply_transform(&apply_transform(&img, b), a),
            apply_transform(&img, compose(a, b))
        );
    }

    #[test]
    fn resize_is_d4_equivariant(img in gray(2..=10, 2..=10), t in transform(), s in 1usize..=4) {
        let k = KernelSpec::default();
        let a = apply_transform(&bicubic_upscale(&img, s, &k).unwrap(), t);
        let b = bicubic_upscale(&apply_transform(&img, t), s, &k).unwrap();
        prop_assert!(a.max_abs_diff(&b) < 1e-12);
    }

    #[test]
    fn resize_preserves_constants(v in 0.0f64..=1.0, h in 1usize..20, w in 1usize..20, oh in 1usize..40, ow in 1usize..40) {
        let out = resize(&Image::filled(h, w, 1, v), oh, ow, &KernelSpec::default()).unwrap();
        prop_assert_eq!(out.dims(), (oh, ow, 1));
        prop_assert!(out.data().iter().all(|x| (x - v).abs() < 1e-12));
    }

    #[test]
    fn degrade_shapes(h in 4usize..40, w in 4usize..40, s in 1usize..=4) {
        let img = modcrop(&Image::filled(h, w, 1, 0.3), s).unwrap();
        let lr = degrade(&img, s, &KernelSpec::default()).unwrap();
        prop_assert_eq!(lr.dims(), (h / s, w / s, 1));
    }

    #[test]
    fn fusion_is_affine(a in gray(3..=3, 4..=4), b in gray(3..=3, 4..=4), w in 0.0f64..=1.0) {
        let weights = FusionWeights::new(vec![w, 1.0 - w]).unwrap();
        let f = fuse(&[a.clone(), b.clone()], &weights).unwrap();
        for i in 0..f.data().len() {
            let expected = w * a.data()[i] + (1.0 - w) * b.data()[i];
            prop_assert!((f.data()[i] - expected).abs() < 1e-12);
        }
        let same = fuse(&[a.clone(), a.clone()], &weights).unwrap();
        prop_assert!(same.max_abs_diff(&a) < 1e-12);
    }

    #[test]
    fn metrics_are_d4_invariant(x in gray(11..=16, 11..=16), t in transform()) {
        let y = x.map(|v| 1.0 - v * v);
        let p = SsimParams::default();
        let (tx, ty) = (apply_transform(&x, t), apply_transform(&y, t));
        prop_assert!((psnr(&x, &y).unwrap() - psnr(&tx, &ty).unwrap()).abs() < 1e-9);
        prop_assert!((ssim(&x, &y, &p).unwrap() - ssim(&tx, &ty, &p).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn ssim_decreases_with_offset(x in gray(12..=14, 12..=14), c1 in 0.0f64..0.25, dc in 0.01f64..0.25) {
        let base = x.map(|v| 0.5 * v);
        let p = SsimParams::default();
        let near = ssim(&base, &base.map(|v| v + c1), &p).unwrap();
        let far = ssim(&base, &base.map(|v| v + c1 + dc), &p).unwrap();
        prop_assert!(far < near);
        prop_assert!(near <= 1.0 + 1e-12);
    }

    #[test]
    fn quantization_round_trips(code in 0u32..=65535) {
        prop_assert_eq!(quantize(dequantize(code, BitDepth::Sixteen), BitDepth::Sixteen), code);
        let c8 = code % 256;
        prop_assert_eq!(quantize(dequantize(c8, BitDepth::Eight), BitDepth::Eight), c8);
    }

    #[test]
    fn uniform_weights_partition(h in 1usize..80, w in 1usize..80, tile in 8usize..32, ov in 0usize..8, s in 1usize..=4) {
        let tc = TileConfig { tile, overlap: ov.min(tile - 1), blend: Blend::Uniform };
        let plan = TilePlan::new(h, w, s, &tc).unwrap();
        prop_assert!(plan.weight_totals().iter().all(|&t| t == 1.0));
        let tent = TilePlan::new(h, w, s, &TileConfig { blend: Blend::Tent, ..tc }).unwrap();
        prop_assert!(tent.weight_totals().iter().all(|&t| t > 0.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn uniform_tiling_is_exact_for_local_backends(img in gray(9..=40, 9..=40), tile in 12usize..24) {
        // Blur-bicubic reads 3 LR pixels around each output, so an overlap of
        // 6 or more hides every seam.
        let b = BuiltinBackend::new(BuiltinKind::BlurBicubic, 2, KernelSpec::default()).unwrap();
        let tc = TileConfig { tile, overlap: 6, blend: Blend::Uniform };
        let direct = restore(&b, &img).unwrap();
        let tiled = tiled_restore(&b, &img, &tc).unwrap();
        prop_assert!(direct.max_abs_diff(&tiled) < 1e-9);
    }
}
