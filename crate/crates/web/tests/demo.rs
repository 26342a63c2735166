use irsr_web::{compare_upscalers_impl, ensemble_views_impl, tile_weights_impl};

fn summary(json: &str) -> serde_json::Value {
    serde_json::from_str(json).unwrap()
}

#[test]
fn upscaler_panel_ranks_bicubic_over_nearest() {
    let mut p = compare_upscalers_impl(3, 4).unwrap();
    assert_eq!(p.count(), 5);
    let gt = p.frame(0).unwrap();
    assert_eq!((gt.width(), gt.height()), (128, 96));
    assert_eq!(gt.rgba().len(), 128 * 96 * 4);
    let s = summary(&p.summary());
    let score = |m: &str| {
        s.as_array()
            .unwrap()
            .iter()
            .find(|r| r["method"] == m)
            .unwrap()["score"]
            .as_f64()
            .unwrap()
    };
    assert!(score("bicubic") > score("nearest"));
    assert!(compare_upscalers_impl(3, 7).is_err());
}

#[test]
fn tile_panel_reports_unit_totals_for_uniform() {
    let p = tile_weights_impl(37, 53, 16, 8, "uniform", 5).unwrap();
    let s = summary(&p.summary());
    assert_eq!(s["min_total"], 1.0);
    assert_eq!(s["max_total"], 1.0);
    let tent = tile_weights_impl(37, 53, 16, 8, "tent", 0).unwrap();
    assert!(summary(&tent.summary())["min_total"].as_f64().unwrap() > 0.0);
    assert!(tile_weights_impl(37, 53, 16, 8, "gaussian", 0).is_err());
    assert!(tile_weights_impl(37, 53, 4, 2, "tent", 0).is_err());
}

#[test]
fn ensemble_panel_matches_direct_for_equivariant_backend() {
    let mut p = ensemble_views_impl(
        1,
        "blur-bicubic",
        "id,rot90,rot180,rot270,hflip,vflip,transpose,antitranspose",
    )
    .unwrap();
    assert_eq!(p.count(), 10);
    assert_eq!(p.frame(8).unwrap().label(), "ensemble");
    let s = summary(&p.summary());
    assert!(s["max_abs_vs_direct"].as_f64().unwrap() < 1e-9);
    assert!(ensemble_views_impl(1, "bicubic", "id,spin").is_err());
    assert!(ensemble_views_impl(1, "bicubic", "").is_err());
}
