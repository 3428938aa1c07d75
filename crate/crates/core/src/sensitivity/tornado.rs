use std::io::Write;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::incremental_nmb;
use crate::cea::Perspective;
use crate::config::{ModelSpec, ParamValue, ParameterPath};
use crate::error::{Error, Result};

/// Half-width of the default one-way range, relative to the base value.
pub const DEFAULT_RELATIVE_RANGE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TornadoEntry {
    pub parameter: String,
    pub low_value: f64,
    pub high_value: f64,
    pub outcome_at_low: f64,
    pub outcome_at_high: f64,
    pub bar_width: f64,
}

/// Base value ±20%, clamped to the parameter's domain, for every scalar
/// PSA target.
pub fn default_ranges(spec: &ModelSpec) -> Result<IndexMap<String, [f64; 2]>> {
    let mut out = IndexMap::new();
    for d in &spec.psa.distributions {
        let path = ParameterPath::parse(&d.target, spec)?;
        if let ParamValue::Scalar(base) = path.get(spec)? {
            let domain = path.domain();
            let low = domain.clamp(base * (1.0 - DEFAULT_RELATIVE_RANGE));
            let high = domain.clamp(base * (1.0 + DEFAULT_RELATIVE_RANGE));
            out.insert(d.target.clone(), [low.min(high), low.max(high)]);
        }
    }
    Ok(out)
}

fn checked_path(spec: &ModelSpec, name: &str, [low, high]: [f64; 2]) -> Result<ParameterPath> {
    let path = ParameterPath::parse(name, spec)?;
    let domain = path.domain();
    let invalid = |detail: String| Error::InvalidRange {
        path: name.to_string(),
        detail,
    };
    if !domain.is_scalar() {
        return Err(invalid("one-way ranges need a scalar parameter".into()));
    }
    if !(low <= high) {
        return Err(invalid(format!("low {low} exceeds high {high}")));
    }
    for v in [low, high] {
        if !domain.contains(v) {
            return Err(invalid(format!("{v} is outside the parameter's valid domain")));
        }
    }
    Ok(path)
}

/// Re-runs the deterministic model with each parameter at its low and high
/// value (others at base). Entries come back sorted by descending bar width.
pub fn tornado(
    spec: &ModelSpec,
    ranges: &IndexMap<String, [f64; 2]>,
    wtp: f64,
    perspective: Perspective,
) -> Result<Vec<TornadoEntry>> {
    let mut entries = Vec::with_capacity(ranges.len());
    for (name, &range) in ranges {
        let path = checked_path(spec, name, range)?;
        let at = |v: f64| {
            let mut s = spec.clone();
            path.set(&mut s, ParamValue::Scalar(v))?;
            incremental_nmb(&s, wtp, perspective)
        };
        let outcome_at_low = at(range[0])?;
        let outcome_at_high = at(range[1])?;
        entries.push(TornadoEntry {
            parameter: name.clone(),
            low_value: range[0],
            high_value: range[1],
            outcome_at_low,
            outcome_at_high,
            bar_width: (outcome_at_high - outcome_at_low).abs(),
        });
    }
    entries.sort_by(|a, b| b.bar_width.total_cmp(&a.bar_width));
    Ok(entries)
}

/// Writes `tornado.csv`.
pub fn write_tornado_csv<W: Write>(entries: &[TornadoEntry], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["parameter", "low", "high", "outcome_low", "outcome_high"])?;
    for e in entries {
        w.write_record([
            e.parameter.clone(),
            e.low_value.to_string(),
            e.high_value.to_string(),
            e.outcome_at_low.to_string(),
            e.outcome_at_high.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("tornado.csv", e))?;
    Ok(())
}
