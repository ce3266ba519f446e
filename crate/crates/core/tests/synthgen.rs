use proptest::prelude::*;
use ventus_core::region::CapacityEntry;
use ventus_core::synth::{
    generate_benchmark, generate_wind_fields, power_curve, synthesize_power, BenchmarkConfig, FieldParams,
    TurbineParams,
};
use ventus_core::{Farm, MapSeries, RegionSpec};

fn params(seed: u64) -> FieldParams {
    FieldParams {
        mean_speed: 8.0,
        std_speed: 2.0,
        spatial_smoothing_cells: 1.0,
        temporal_ar1: 0.8,
        rng_seed: seed,
    }
}

#[test]
fn field_statistics_match_parameters() {
    let p = params(11);
    let m = generate_wind_fields(0, 5000, 16, 16, &p).unwrap();
    let avg: Vec<f64> = (0..m.steps())
        .map(|t| m.frame(t).iter().map(|v| *v as f64).sum::<f64>() / m.frame_len() as f64)
        .collect();
    let mean = avg.iter().sum::<f64>() / avg.len() as f64;
    assert!((mean - p.mean_speed).abs() < 0.1, "mean {mean}");
    let var: f64 = avg.iter().map(|a| (a - mean).powi(2)).sum();
    let cov: f64 = avg.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
    let rho = cov / var;
    assert!((rho - p.temporal_ar1).abs() < 0.05, "lag-1 autocorrelation {rho}");
}

#[test]
fn same_seed_same_field() {
    let a = generate_wind_fields(0, 50, 8, 9, &params(3)).unwrap();
    let b = generate_wind_fields(0, 50, 8, 9, &params(3)).unwrap();
    assert_eq!(a, b);
    let c = generate_wind_fields(0, 50, 8, 9, &params(4)).unwrap();
    assert_ne!(a, c);
}

#[test]
fn invalid_field_params_rejected() {
    let mut p = params(1);
    p.temporal_ar1 = 1.0;
    assert!(generate_wind_fields(0, 5, 4, 4, &p).is_err());
    let mut p = params(1);
    p.mean_speed = 0.0;
    assert!(generate_wind_fields(0, 5, 4, 4, &p).is_err());
}

#[test]
fn bilinear_midpoint_feeds_the_curve() {
    // speeds 4 and 8 in neighbouring columns; farm halfway sees 6 m/s
    let mut v = vec![0.0f32; 4];
    v[0] = 4.0;
    v[1] = 8.0;
    v[2] = 4.0;
    v[3] = 8.0;
    let maps = MapSeries::new(0, 1, 2, 2, v).unwrap();
    let r = one_region(vec![farm(0.5, 0.0, 1.0)]);
    let t = TurbineParams::default();
    let p = synthesize_power(&maps, &r, &t, 0.0, 0).unwrap();
    assert!((p.values()[0] - power_curve(6.0, &t)).abs() < 1e-12);
}

fn farm(x: f64, y: f64, capacity_mw: f64) -> Farm {
    Farm { x, y, capacity_mw }
}

fn one_region(farms: Vec<Farm>) -> RegionSpec {
    RegionSpec {
        region_id: "R".into(),
        farms,
        capacity_series: vec![CapacityEntry {
            quarter_start: chrono::NaiveDate::from_ymd_opt(1970, 1, 1).unwrap(),
            installed_mw: 1.0,
        }],
        hull_mask: None,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn curve_is_monotone_below_cut_out(a in 0.0f64..30.0, b in 0.0f64..30.0) {
        let t = TurbineParams::default();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        if hi < t.cut_out {
            prop_assert!(power_curve(lo, &t) <= power_curve(hi, &t));
        } else {
            prop_assert_eq!(power_curve(hi, &t), 0.0);
        }
        let v = power_curve(a, &t);
        prop_assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn noiseless_power_is_additive_and_bounded(
        seed in 0u64..1000,
        f1 in (0.0f64..7.0, 0.0f64..5.0, 1.0f64..100.0),
        f2 in (0.0f64..7.0, 0.0f64..5.0, 1.0f64..100.0),
    ) {
        let mut p = params(seed);
        p.std_speed = 4.0;
        let maps = generate_wind_fields(0, 30, 6, 8, &p).unwrap();
        let t = TurbineParams::default();
        let a = farm(f1.0, f1.1, f1.2);
        let b = farm(f2.0, f2.1, f2.2);
        let both = synthesize_power(&maps, &one_region(vec![a, b]), &t, 0.0, 0).unwrap();
        let pa = synthesize_power(&maps, &one_region(vec![a]), &t, 0.0, 0).unwrap();
        let pb = synthesize_power(&maps, &one_region(vec![b]), &t, 0.0, 0).unwrap();
        // per-farm brute force
        for k in 0..maps.steps() {
            let brute: f64 = [a, b]
                .iter()
                .map(|f| f.capacity_mw * power_curve(bilinear_oracle(&maps, k, f.x, f.y), &t))
                .sum();
            prop_assert!((both.values()[k] - brute).abs() < 1e-9);
            prop_assert!((both.values()[k] - pa.values()[k] - pb.values()[k]).abs() < 1e-9);
            prop_assert!(both.values()[k] <= a.capacity_mw + b.capacity_mw + 1e-9);
        }
    }
}

fn bilinear_oracle(m: &MapSeries, t: usize, x: f64, y: f64) -> f64 {
    // weighted sum over the four surrounding cell centres
    let mut acc = 0.0;
    for r in 0..m.rows() {
        for c in 0..m.cols() {
            let wx = (1.0 - (x - c as f64).abs()).max(0.0);
            let wy = (1.0 - (y - r as f64).abs()).max(0.0);
            acc += wx * wy * m.at(t, r, c) as f64;
        }
    }
    acc
}

#[test]
fn single_farm_benchmark_is_valid_and_deterministic() {
    let cfg = BenchmarkConfig {
        regions: 1,
        farms_per_region: 1,
        rows: 8,
        cols: 8,
        max_hours: Some(48),
        ..Default::default()
    };
    let a = generate_benchmark(&cfg).unwrap();
    a.validate().unwrap();
    assert_eq!(a.maps.steps(), 48);
    assert_eq!(a.regions.len(), 1);
    let b = generate_benchmark(&cfg).unwrap();
    assert_eq!(a.content_hash(), b.content_hash());
    let c = generate_benchmark(&BenchmarkConfig { seed: 8, ..cfg }).unwrap();
    assert_ne!(a.content_hash(), c.content_hash());
}

#[test]
fn regions_get_disjoint_farm_cells() {
    let cfg = BenchmarkConfig {
        max_hours: Some(6),
        ..Default::default()
    };
    let ds = generate_benchmark(&cfg).unwrap();
    let mut cells = std::collections::BTreeSet::new();
    for r in &ds.regions {
        assert_eq!(r.farms.len(), cfg.farms_per_region);
        for f in &r.farms {
            assert!(cells.insert((f.y.round() as i64, f.x.round() as i64)));
        }
    }
}

#[test]
fn default_benchmark_spans_three_years() {
    let cfg = BenchmarkConfig::default();
    // 2018 and 2019 have 8760 hours, 2020 is a leap year
    assert_eq!(cfg.steps(), 8760 + 8760 + 8784);
    let ds = generate_benchmark(&cfg).unwrap();
    assert_eq!(ds.maps.steps(), 26304);
    assert_eq!(ds.regions.len(), 4);
    for r in &ds.regions {
        let p = &ds.power[&r.region_id];
        assert_eq!(p.len(), 26304);
        assert!(p.mean() > 0.0);
    }
}
