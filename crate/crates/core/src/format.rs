//! On-disk formats.
//!
//! Map stack (`WDGS`), little-endian, no padding:
//!
//! | offset | size | field |
//! |-------:|-----:|-------|
//! | 0  | 4 | magic `WDGS` |
//! | 4  | 2 | version (u16) = 1 |
//! | 6  | 4 | T (u32) |
//! | 10 | 4 | m rows (u32) |
//! | 14 | 4 | n cols (u32) |
//! | 18 | 8 | start, epoch hours (u64) |
//! | 26 | 4·T·m·n | f32 values, time-major, row-major |
//!
//! Power CSV: header `timestamp,power_mw`, one row per hour, ISO-8601 UTC
//! timestamps, decimal power with at most three fractional digits, LF.

use std::path::Path;

use crate::error::{CoreError, Result};
use crate::series::{MapSeries, PowerSeries};
use crate::time::{format_iso, parse_iso};

pub const MAP_MAGIC: &[u8; 4] = b"WDGS";
pub const MAP_VERSION: u16 = 1;
pub const MAP_HEADER_LEN: usize = 26;
pub const POWER_CSV_HEADER: &str = "timestamp,power_mw";

fn format_err(offset: usize, reason: impl Into<String>) -> CoreError {
    CoreError::Format {
        offset: offset as u64,
        reason: reason.into(),
    }
}

pub fn encode_map_stack(series: &MapSeries) -> Result<Vec<u8>> {
    let start = u64::try_from(series.start())
        .map_err(|_| CoreError::validation("map stack start precedes the epoch"))?;
    let dim = |v: usize, name: &str| {
        u32::try_from(v).map_err(|_| CoreError::validation(format!("{name} = {v} does not fit in u32")))
    };
    let mut out = Vec::with_capacity(MAP_HEADER_LEN + series.values().len() * 4);
    out.extend_from_slice(MAP_MAGIC);
    out.extend_from_slice(&MAP_VERSION.to_le_bytes());
    out.extend_from_slice(&dim(series.steps(), "T")?.to_le_bytes());
    out.extend_from_slice(&dim(series.rows(), "m")?.to_le_bytes());
    out.extend_from_slice(&dim(series.cols(), "n")?.to_le_bytes());
    out.extend_from_slice(&start.to_le_bytes());
    for v in series.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_map_stack(bytes: &[u8]) -> Result<MapSeries> {
    if bytes.len() < 4 {
        return Err(format_err(bytes.len(), "truncated magic"));
    }
    if &bytes[0..4] != MAP_MAGIC {
        return Err(format_err(0, format!("bad magic {:?}, expected \"WDGS\"", String::from_utf8_lossy(&bytes[0..4]))));
    }
    if bytes.len() < MAP_HEADER_LEN {
        return Err(format_err(bytes.len(), format!("truncated header ({} of {MAP_HEADER_LEN} bytes)", bytes.len())));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as usize;
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != MAP_VERSION {
        return Err(format_err(4, format!("unsupported version {version}")));
    }
    let (steps, rows, cols) = (u32_at(6), u32_at(10), u32_at(14));
    if steps == 0 || rows < 2 || cols < 2 {
        return Err(format_err(6, format!("invalid dimensions T={steps} m={rows} n={cols}")));
    }
    let start = u64::from_le_bytes(bytes[18..26].try_into().expect("8 bytes"));
    let start = i64::try_from(start).map_err(|_| format_err(18, "start hour out of range"))?;
    let count = steps
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| format_err(6, "dimension product overflows"))?;
    let expected = MAP_HEADER_LEN + count * 4;
    if bytes.len() < expected {
        return Err(format_err(bytes.len(), format!("truncated payload: {} bytes, expected {expected}", bytes.len())));
    }
    if bytes.len() > expected {
        return Err(format_err(expected, format!("dimension mismatch: {} trailing bytes", bytes.len() - expected)));
    }
    let mut values = Vec::with_capacity(count);
    for (i, chunk) in bytes[MAP_HEADER_LEN..].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().expect("4 bytes"));
        if !v.is_finite() || v < 0.0 {
            return Err(format_err(MAP_HEADER_LEN + 4 * i, format!("invalid wind speed {v}")));
        }
        values.push(v);
    }
    MapSeries::new(start, steps, rows, cols, values)
}

pub fn write_map_stack(series: &MapSeries, path: &Path) -> Result<()> {
    let bytes = encode_map_stack(series)?;
    std::fs::write(path, bytes).map_err(|e| CoreError::io(path, e))
}

pub fn read_map_stack(path: &Path) -> Result<MapSeries> {
    let bytes = std::fs::read(path).map_err(|e| CoreError::io(path, e))?;
    decode_map_stack(&bytes)
}

/// Decimal text with at most three fractional digits.
pub fn format_power(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

pub fn encode_power_csv(series: &PowerSeries) -> String {
    let mut out = String::with_capacity(32 * (series.len() + 1));
    out.push_str(POWER_CSV_HEADER);
    out.push('\n');
    for (t, v) in series.timestamps().iter().zip(series.values()) {
        out.push_str(&format_iso(*t));
        out.push(',');
        out.push_str(&format_power(*v));
        out.push('\n');
    }
    out
}

pub fn decode_power_csv(text: &str) -> Result<PowerSeries> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == POWER_CSV_HEADER => {}
        other => {
            return Err(CoreError::validation(format!(
                "power CSV header must be {POWER_CSV_HEADER:?}, found {:?}",
                other.unwrap_or("")
            )))
        }
    }
    let mut ts = Vec::new();
    let mut vals = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 2;
        let (t, v) = line
            .split_once(',')
            .ok_or_else(|| CoreError::validation(format!("line {lineno}: expected two fields")))?;
        ts.push(parse_iso(t).map_err(|e| CoreError::validation(format!("line {lineno}: {e}")))?);
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| CoreError::validation(format!("line {lineno}: bad power value {v:?}")))?;
        vals.push(v);
    }
    PowerSeries::new(ts, vals)
}

pub fn write_power_csv(series: &PowerSeries, path: &Path) -> Result<()> {
    std::fs::write(path, encode_power_csv(series)).map_err(|e| CoreError::io(path, e))
}

pub fn read_power_csv(path: &Path) -> Result<PowerSeries> {
    let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
    decode_power_csv(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::{hours_in_years, year_start};

    #[test]
    fn small_stack_round_trips() {
        let m = MapSeries::new(438_000, 2, 3, 4, (0..24).map(|v| v as f32 * 0.5).collect()).unwrap();
        let bytes = encode_map_stack(&m).unwrap();
        assert_eq!(bytes.len(), MAP_HEADER_LEN + 24 * 4);
        assert_eq!(decode_map_stack(&bytes).unwrap(), m);
    }

    #[test]
    fn bad_magic_is_reported_at_offset_zero() {
        let m = MapSeries::new(0, 1, 2, 2, vec![1.0; 4]).unwrap();
        let mut bytes = encode_map_stack(&m).unwrap();
        bytes[0..4].copy_from_slice(b"XXXX");
        match decode_map_stack(&bytes).unwrap_err() {
            CoreError::Format { offset, .. } => assert_eq!(offset, 0),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn truncation_and_trailing_bytes_name_offsets() {
        let m = MapSeries::new(0, 1, 2, 2, vec![1.0; 4]).unwrap();
        let bytes = encode_map_stack(&m).unwrap();
        match decode_map_stack(&bytes[..30]).unwrap_err() {
            CoreError::Format { offset, .. } => assert_eq!(offset, 30),
            e => panic!("unexpected {e}"),
        }
        let mut long = bytes.clone();
        long.extend_from_slice(&[0, 0, 0, 0]);
        match decode_map_stack(&long).unwrap_err() {
            CoreError::Format { offset, .. } => assert_eq!(offset, bytes.len() as u64),
            e => panic!("unexpected {e}"),
        }
        assert!(matches!(decode_map_stack(&bytes[..10]), Err(CoreError::Format { offset: 10, .. })));
    }

    #[test]
    fn two_row_csv() {
        let p = decode_power_csv("timestamp,power_mw\n2020-01-01T00,1.5\n2020-01-01T01,2\n").unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.values(), &[1.5, 2.0]);
    }

    #[test]
    fn csv_gap_lists_the_missing_hour() {
        let err = decode_power_csv("timestamp,power_mw\n2020-01-01T00,1\n2020-01-01T02,2\n").unwrap_err();
        match err {
            CoreError::Gap { missing } => assert_eq!(missing, vec!["2020-01-01T01:00:00Z".to_string()]),
            e => panic!("unexpected {e}"),
        }
        assert!(decode_power_csv("timestamp,power_mw\n2020-01-01T00,-1\n").is_err());
        assert!(decode_power_csv("time,power\n").is_err());
    }

    #[test]
    fn leap_year_file_has_8784_rows() {
        let n = hours_in_years(2020, 2020) as usize;
        let p = PowerSeries::from_start(year_start(2020), (0..n).map(|i| (i % 997) as f64 * 0.125).collect()).unwrap();
        let text = encode_power_csv(&p);
        assert_eq!(text.lines().count(), 8785);
        assert_eq!(decode_power_csv(&text).unwrap().len(), 8784);
    }

    #[test]
    fn power_text_has_at_most_three_decimals() {
        assert_eq!(format_power(1.0), "1");
        assert_eq!(format_power(12.3456), "12.346");
        assert_eq!(format_power(0.1), "0.1");
        assert_eq!(format_power(-0.0), "0");
    }
}
