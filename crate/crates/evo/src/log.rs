//! Append-only search log and its CSV form.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{EvoError, Result};

pub const LOG_HEADER: &str = "eval_index,phase,arch_hash,region,raw_loss,normalized_loss,parent_a,parent_b,\
replaced_eval_index,replaced_hash,population_size,region_best_raw";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Init,
    Offspring,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Init => "init",
            Phase::Offspring => "offspring",
        }
    }
}

/// One completed evaluation, in the order the coordinator applied it.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub eval_index: usize,
    pub phase: Phase,
    pub arch_hash: String,
    pub region: String,
    pub raw_loss: f64,
    pub normalized_loss: f64,
    pub parents: Option<(usize, usize)>,
    pub replaced: Option<(usize, String)>,
    pub population_size: usize,
    /// The region's best raw loss after this evaluation (+inf if none yet).
    pub region_best_raw: f64,
}

fn num(v: f64) -> String {
    // Display is the shortest representation that parses back exactly
    format!("{v}")
}

pub fn encode_log(rows: &[LogRow]) -> String {
    let mut s = String::from(LOG_HEADER);
    s.push('\n');
    for r in rows {
        let (pa, pb) = r.parents.map_or((String::new(), String::new()), |(a, b)| (a.to_string(), b.to_string()));
        let (ri, rh) = r
            .replaced
            .as_ref()
            .map_or((String::new(), String::new()), |(i, h)| (i.to_string(), h.clone()));
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.eval_index,
            r.phase.name(),
            r.arch_hash,
            r.region,
            num(r.raw_loss),
            num(r.normalized_loss),
            pa,
            pb,
            ri,
            rh,
            r.population_size,
            num(r.region_best_raw)
        );
    }
    s
}

pub fn decode_log(text: &str) -> Result<Vec<LogRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(LOG_HEADER) {
        return Err(EvoError::Log("missing or unexpected header".into()));
    }
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let err = |what: &str| EvoError::Log(format!("line {}: {what}", n + 2));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 12 {
            return Err(err(&format!("expected 12 fields, found {}", f.len())));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|_| err(&format!("bad integer `{s}`")));
        let float = |s: &str| s.parse::<f64>().map_err(|_| err(&format!("bad number `{s}`")));
        let opt = |s: &str| if s.is_empty() { Ok(None) } else { int(s).map(Some) };
        let phase = match f[1] {
            "init" => Phase::Init,
            "offspring" => Phase::Offspring,
            other => return Err(err(&format!("unknown phase `{other}`"))),
        };
        let parents = match (opt(f[6])?, opt(f[7])?) {
            (Some(a), Some(b)) => Some((a, b)),
            (None, None) => None,
            _ => return Err(err("half a parent pair")),
        };
        let replaced = match (opt(f[8])?, f[9]) {
            (Some(i), h) if !h.is_empty() => Some((i, h.to_string())),
            (None, "") => None,
            _ => return Err(err("replaced index and hash must both be set or both empty")),
        };
        rows.push(LogRow {
            eval_index: int(f[0])?,
            phase,
            arch_hash: f[2].to_string(),
            region: f[3].to_string(),
            raw_loss: float(f[4])?,
            normalized_loss: float(f[5])?,
            parents,
            replaced,
            population_size: int(f[10])?,
            region_best_raw: float(f[11])?,
        });
    }
    Ok(rows)
}

pub fn write_log(rows: &[LogRow], path: &Path) -> std::io::Result<()> {
    std::fs::write(path, encode_log(rows))
}
