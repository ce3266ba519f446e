use std::collections::BTreeMap;

use proptest::prelude::*;
use sha2::{Digest, Sha256};
use ventus_core::format::{
    decode_map_stack, decode_power_csv, encode_map_stack, encode_power_csv, read_map_stack, read_power_csv,
    write_map_stack, write_power_csv,
};
use ventus_core::region::CapacityEntry;
use ventus_core::time::year_start;
use ventus_core::{CoreError, Dataset, Farm, MapSeries, PowerSeries, RegionSpec};

fn map_strategy() -> impl Strategy<Value = MapSeries> {
    (1usize..6, 2usize..6, 2usize..6, 0i64..500_000).prop_flat_map(|(t, m, n, start)| {
        prop::collection::vec(0.0f32..40.0, t * m * n)
            .prop_map(move |v| MapSeries::new(start, t, m, n, v).unwrap())
    })
}

fn power_strategy() -> impl Strategy<Value = PowerSeries> {
    (0i64..200_000, prop::collection::vec(0u32..5_000_000, 1..60)).prop_map(|(start, milli)| {
        let v = milli.into_iter().map(|m| m as f64 / 1000.0).collect();
        PowerSeries::from_start(start, v).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn map_stack_round_trips(m in map_strategy()) {
        let bytes = encode_map_stack(&m).unwrap();
        prop_assert_eq!(bytes.len(), 26 + 4 * m.values().len());
        prop_assert_eq!(decode_map_stack(&bytes).unwrap(), m);
    }

    #[test]
    fn power_csv_round_trips(p in power_strategy()) {
        let text = encode_power_csv(&p);
        prop_assert!(!text.contains('\r'));
        prop_assert_eq!(decode_power_csv(&text).unwrap(), p);
    }
}

#[test]
fn large_stack_rewrites_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let (t, m, n) = (1000, 32, 32);
    let values = (0..t * m * n).map(|i| ((i * 7919) % 4001) as f32 / 100.0).collect();
    let series = MapSeries::new(year_start(2018), t, m, n, values).unwrap();
    let a = dir.path().join("a.wdgs");
    let b = dir.path().join("b.wdgs");
    write_map_stack(&series, &a).unwrap();
    let back = read_map_stack(&a).unwrap();
    assert_eq!(back, series);
    write_map_stack(&back, &b).unwrap();
    let ha = Sha256::digest(std::fs::read(&a).unwrap());
    let hb = Sha256::digest(std::fs::read(&b).unwrap());
    assert_eq!(ha, hb);
}

#[test]
fn foreign_magic_is_a_format_error() {
    let m = MapSeries::new(0, 2, 3, 4, (0..24).map(|v| v as f32).collect()).unwrap();
    let mut bytes = encode_map_stack(&m).unwrap();
    bytes[..4].copy_from_slice(b"XXXX");
    match decode_map_stack(&bytes) {
        Err(CoreError::Format { offset, .. }) => assert_eq!(offset, 0),
        other => panic!("expected format error, got {other:?}"),
    }
}

#[test]
fn power_file_round_trip_and_negative_rejection() {
    let dir = tempfile::tempdir().unwrap();
    let p = PowerSeries::from_start(year_start(2020), vec![1.5, 0.0, 1234.567]).unwrap();
    let path = dir.path().join("p.csv");
    write_power_csv(&p, &path).unwrap();
    assert_eq!(read_power_csv(&path).unwrap(), p);
    let bad = "timestamp,power_mw\n2020-01-01T00:00:00Z,-1\n";
    assert!(decode_power_csv(bad).is_err());
}

fn tiny_dataset() -> Dataset {
    let start = year_start(2020);
    let maps = MapSeries::new(start, 4, 3, 3, vec![5.0; 36]).unwrap();
    let region = RegionSpec {
        region_id: "R01".into(),
        farms: vec![Farm {
            x: 1.0,
            y: 1.0,
            capacity_mw: 10.0,
        }],
        capacity_series: vec![CapacityEntry {
            quarter_start: chrono::NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
            installed_mw: 10.0,
        }],
        hull_mask: None,
    };
    let mut power = BTreeMap::new();
    power.insert("R01".to_string(), PowerSeries::from_start(start, vec![1.0, 2.0, 3.0, 4.0]).unwrap());
    Dataset::new(maps, vec![region], power).unwrap()
}

#[test]
fn dataset_rejects_misaligned_power() {
    let ds = tiny_dataset();
    let mut power = ds.power.clone();
    power.insert("R01".to_string(), PowerSeries::from_start(ds.maps.start(), vec![1.0; 3]).unwrap());
    assert!(Dataset::new(ds.maps.clone(), ds.regions.clone(), power).is_err());
}

#[test]
fn dataset_directory_round_trip() {
    let ds = tiny_dataset();
    let dir = tempfile::tempdir().unwrap();
    ds.save(dir.path()).unwrap();
    let back = Dataset::load(dir.path()).unwrap();
    assert_eq!(back, ds);
    assert_eq!(back.content_hash(), ds.content_hash());
}
