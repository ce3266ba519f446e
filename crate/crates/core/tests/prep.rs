use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ventus_core::prep::{
    build_region_crop, chronological_split, convex_hull, point_in_polygon, scale_by_capacity, unscale, Point,
};
use ventus_core::region::CapacityEntry;
use ventus_core::synth::{generate_benchmark, BenchmarkConfig};
use ventus_core::time::year_start;
use ventus_core::{Farm, MapSeries, PowerSeries, RegionSpec};

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn in_triangle(p: Point, a: Point, b: Point, c: Point) -> bool {
    let d1 = cross(a, b, p);
    let d2 = cross(b, c, p);
    let d3 = cross(c, a, p);
    let neg = d1 < 0.0 || d2 < 0.0 || d3 < 0.0;
    let pos = d1 > 0.0 || d2 > 0.0 || d3 > 0.0;
    !(neg && pos)
}

/// A point is a hull vertex iff no triangle of other points contains it.
fn brute_force_vertices(pts: &[Point]) -> Vec<Point> {
    let n = pts.len();
    let mut out = Vec::new();
    'outer: for i in 0..n {
        for a in 0..n {
            for b in a + 1..n {
                for c in b + 1..n {
                    if [a, b, c].contains(&i) {
                        continue;
                    }
                    if in_triangle(pts[i], pts[a], pts[b], pts[c]) {
                        continue 'outer;
                    }
                }
            }
        }
        out.push(pts[i]);
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out
}

#[test]
fn random_hull_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let pts: Vec<Point> = (0..50)
            .map(|_| (rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)))
            .collect();
        let mut hull = convex_hull(&pts).unwrap();
        hull.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(hull, brute_force_vertices(&pts));
    }
}

fn signed_area(poly: &[Point]) -> f64 {
    (0..poly.len())
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum::<f64>()
        / 2.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn hull_contains_inputs_and_is_idempotent(
        pts in prop::collection::vec((-20i32..20, -20i32..20), 3..40)
    ) {
        let pts: Vec<Point> = pts.into_iter().map(|(x, y)| (x as f64 * 0.5, y as f64 * 0.25)).collect();
        if let Ok(h) = convex_hull(&pts) {
            prop_assert!(signed_area(&h) > 0.0);
            let min = pts.iter().copied().fold(pts[0], |m, p| if p < m { p } else { m });
            prop_assert_eq!(h[0], min);
            for p in &pts {
                prop_assert!(point_in_polygon(*p, &h));
            }
            for i in 0..h.len() {
                let c = cross(h[i], h[(i + 1) % h.len()], h[(i + 2) % h.len()]);
                prop_assert!(c > 0.0);
            }
            prop_assert_eq!(convex_hull(&h).unwrap(), h);
        }
    }

    #[test]
    fn mask_grows_with_buffer(
        farms in prop::collection::vec((0.0f64..15.0, 0.0f64..15.0), 1..4),
        b1 in 0.6f64..4.0,
        extra in 0.0f64..3.0,
    ) {
        let maps = MapSeries::new(0, 1, 16, 16, vec![1.0; 256]).unwrap();
        let r = region(farms.into_iter().map(|(x, y)| Farm { x, y, capacity_mw: 1.0 }).collect());
        let small = build_region_crop(&maps, &r, b1).unwrap();
        let large = build_region_crop(&maps, &r, b1 + extra).unwrap();
        for i in 0..256 {
            prop_assert!(!small.grid_mask.cells[i] || large.grid_mask.cells[i]);
        }
        for f in &r.farms {
            prop_assert!(point_in_polygon((f.x, f.y), &small.hull));
        }
    }
}

fn region(farms: Vec<Farm>) -> RegionSpec {
    RegionSpec {
        region_id: "R01".into(),
        farms,
        capacity_series: vec![],
        hull_mask: None,
    }
}

fn grid(rows: usize, cols: usize) -> MapSeries {
    MapSeries::new(0, 2, rows, cols, (0..2 * rows * cols).map(|v| v as f32).collect()).unwrap()
}

#[test]
fn single_farm_crop_covers_neighbours() {
    let maps = grid(32, 32);
    let r = region(vec![Farm {
        x: 5.0,
        y: 5.0,
        capacity_mw: 1.0,
    }]);
    let crop = build_region_crop(&maps, &r, 1.6).unwrap();
    for (row, col) in [(5, 5), (4, 5), (6, 5), (5, 4), (5, 6)] {
        assert!(crop.grid_mask.get(row, col));
    }
    // inradius 1.6 cos(pi/16) = 1.569 > sqrt(2): diagonals in, distance 2 out
    assert_eq!(crop.grid_mask.count(), 9);
    assert_eq!((crop.row0, crop.row1, crop.col0, crop.col1), (4, 7, 4, 7));
    // seamless crop: values copied, not masked
    assert_eq!(crop.maps.at(1, 0, 0), maps.at(1, 4, 4));
    assert!(crop.report().contains("mask cells 9"));
}

#[test]
fn coincident_farms_equal_one_farm() {
    let maps = grid(32, 32);
    let f = Farm {
        x: 10.3,
        y: 7.7,
        capacity_mw: 1.0,
    };
    let one = build_region_crop(&maps, &region(vec![f]), 2.0).unwrap();
    let two = build_region_crop(&maps, &region(vec![f, f]), 2.0).unwrap();
    assert_eq!(one.grid_mask, two.grid_mask);
    assert_eq!((one.row0, one.row1, one.col0, one.col1), (two.row0, two.row1, two.col0, two.col1));
}

#[test]
fn spanning_farms_crop_full_grid() {
    let maps = grid(10, 12);
    let r = region(vec![
        Farm { x: 0.0, y: 0.0, capacity_mw: 1.0 },
        Farm { x: 11.0, y: 9.0, capacity_mw: 1.0 },
        Farm { x: 0.0, y: 9.0, capacity_mw: 1.0 },
        Farm { x: 11.0, y: 0.0, capacity_mw: 1.0 },
    ]);
    let crop = build_region_crop(&maps, &r, 3.0).unwrap();
    assert_eq!((crop.row0, crop.row1, crop.col0, crop.col1), (0, 10, 0, 12));
    assert_eq!(crop.maps, maps);
}

#[test]
fn tiny_buffer_between_centres_gives_empty_mask() {
    let maps = grid(8, 8);
    let r = region(vec![Farm { x: 2.5, y: 2.5, capacity_mw: 1.0 }]);
    assert!(matches!(
        build_region_crop(&maps, &r, 0.3),
        Err(ventus_core::CoreError::EmptyMask { .. })
    ));
    assert!(build_region_crop(&maps, &r, 0.0).is_err());
}

fn quarters() -> Vec<CapacityEntry> {
    vec![
        CapacityEntry {
            quarter_start: chrono::NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
            installed_mw: 1000.0,
        },
        CapacityEntry {
            quarter_start: chrono::NaiveDate::from_ymd_opt(2020, 4, 1).unwrap(),
            installed_mw: 1250.0,
        },
    ]
}

#[test]
fn scaling_uses_the_quarter_in_force() {
    let q1_end = year_start(2020) + 24 * 91 - 1; // 2020-03-31T23
    let p = PowerSeries::from_start(q1_end, vec![500.0, 500.0]).unwrap();
    let s = scale_by_capacity(&p, &quarters()).unwrap();
    assert_eq!(s.values(), &[0.5, 0.4]);
    let back = unscale(&s, &quarters()).unwrap();
    for (a, b) in back.values().iter().zip(p.values()) {
        assert!((a - b).abs() <= 1e-9 * b.abs());
    }
    let early = PowerSeries::from_start(year_start(2019), vec![1.0]).unwrap();
    assert!(scale_by_capacity(&early, &quarters()).is_err());
    let mut zero = quarters();
    zero[0].installed_mw = 0.0;
    assert!(scale_by_capacity(&p, &zero).is_err());
}

#[test]
fn noiseless_scaled_targets_stay_in_unit_interval() {
    let cfg = BenchmarkConfig {
        noise_std_mw: 0.0,
        max_hours: Some(24 * 200),
        regions: 2,
        ..Default::default()
    };
    let ds = generate_benchmark(&cfg).unwrap();
    for r in &ds.regions {
        let s = scale_by_capacity(&ds.power[&r.region_id], &r.capacity_series).unwrap();
        assert!(s.values().iter().all(|v| (0.0..=1.0 + 1e-12).contains(v)));
    }
}

#[test]
fn year_split_sizes_and_order() {
    let cfg = BenchmarkConfig {
        regions: 1,
        farms_per_region: 2,
        rows: 6,
        cols: 6,
        spatial_smoothing_cells: 0.5,
        nwp_error_smoothing_cells: 0.5,
        ..Default::default()
    };
    let ds = generate_benchmark(&cfg).unwrap();
    let (train, test) = chronological_split(&ds, &[2018, 2019], &[2020]).unwrap();
    assert_eq!(train.maps.steps(), 17520);
    assert_eq!(test.maps.steps(), 8784);
    assert!(train.maps.end() <= test.maps.start());
    let mut ts = train.maps.timestamps();
    ts.extend(test.maps.timestamps());
    assert_eq!(ts, ds.maps.timestamps());
    assert!(chronological_split(&ds, &[2018, 2019], &[]).is_err());
    assert!(chronological_split(&ds, &[2018, 2019], &[2019, 2020]).is_err());
    assert!(chronological_split(&ds, &[2020], &[2018]).is_err());
    assert!(chronological_split(&ds, &[2018], &[2021]).is_err());
}
