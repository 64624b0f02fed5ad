//! CSV and JSON emission.

use std::io::Write;

use serde::Serialize;

use crate::sweep::{BoundRow, KeyRateRow, SweepRows, BOUND_ROUNDS};

pub const SCHEMA_VERSION: u32 = 1;
const SIGNIFICANT_DIGITS: i32 = 12;

/// Decimal notation with 12 significant digits, independent of locale.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (SIGNIFICANT_DIGITS - 1 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // re-round when log10 landed just below a power of ten
    if s.trim_start_matches('-').replace('.', "").trim_start_matches('0').len() > SIGNIFICANT_DIGITS as usize
        && decimals > 0
    {
        let d = decimals - 1;
        return format!("{x:.d$}");
    }
    s
}

fn clamp(x: f64, enabled: bool) -> f64 {
    if enabled {
        x.max(0.0)
    } else {
        x
    }
}

pub const KEY_RATE_HEADER: &[&str] = &[
    "schema_version",
    "distance_km",
    "ratio",
    "rounds",
    "eta1",
    "eta2",
    "variance",
    "optimized",
    "below_threshold",
    "i_ud",
    "h_u",
    "h_u_given_d",
    "chi_ue",
    "chi_de",
    "r_dr",
    "r_rr",
    "r_ps",
    "rate",
    "plob",
    "discarded_mass",
    "retained_fraction",
    "low_precision",
];

pub fn key_rate_record(row: &KeyRateRow, clamp_rates: bool) -> Vec<String> {
    let r = &row.report;
    let n = format_number;
    vec![
        SCHEMA_VERSION.to_string(),
        n(row.distance_km),
        n(row.ratio),
        row.rounds.to_string(),
        n(row.eta1),
        n(row.eta2),
        n(row.variance),
        row.optimized.to_string(),
        row.below_threshold.to_string(),
        n(r.i_ud),
        n(r.h_u),
        n(r.h_u_given_d),
        n(r.chi_ue),
        n(r.chi_de),
        n(clamp(r.r_dr, clamp_rates)),
        n(clamp(r.r_rr, clamp_rates)),
        n(clamp(r.r_ps, clamp_rates)),
        n(clamp(row.rate, clamp_rates)),
        n(row.plob),
        n(r.discarded_mass),
        n(r.retained_fraction),
        r.low_precision.to_string(),
    ]
}

pub fn bound_header() -> Vec<String> {
    let mut h: Vec<String> = ["schema_version", "distance_km", "ratio", "n_mean"].map(String::from).to_vec();
    h.extend(BOUND_ROUNDS.iter().map(|m| format!("p_sdd_m{m}")));
    h.extend(["p_phd", "p_sql", "p_helstrom"].map(String::from));
    h.extend(BOUND_ROUNDS.iter().map(|m| format!("delta_sdd_m{m}")));
    h.extend(["delta_phd", "sql_fallback"].map(String::from));
    h
}

pub fn bound_record(row: &BoundRow) -> Vec<String> {
    let r = &row.report;
    let n = format_number;
    let mut v = vec![SCHEMA_VERSION.to_string(), n(row.distance_km), n(row.ratio), n(row.n_mean)];
    v.extend(r.p_sdd.iter().map(|&x| n(x)));
    v.extend([n(r.p_phd), n(r.p_sql), n(r.p_helstrom)]);
    v.extend(r.delta_sdd.iter().map(|&x| n(x)));
    v.extend([n(r.delta_phd), r.sql_fallback.to_string()]);
    v
}

pub fn write_csv<W: Write>(out: W, rows: &SweepRows, clamp_rates: bool) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    match rows {
        SweepRows::KeyRate(rows) => {
            w.write_record(KEY_RATE_HEADER)?;
            for row in rows {
                w.write_record(key_rate_record(row, clamp_rates))?;
            }
        }
        SweepRows::Bound(rows) => {
            w.write_record(bound_header())?;
            for row in rows {
                w.write_record(bound_record(row))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Top-level JSON document: schema version, the resolved config, payload.
#[derive(Debug, Serialize)]
pub struct Document<'a, C: Serialize, T: Serialize> {
    pub schema_version: u32,
    pub command: &'a str,
    pub config: &'a C,
    #[serde(flatten)]
    pub payload: T,
}

pub fn write_json<W: Write, T: Serialize>(mut out: W, value: &T) -> anyhow::Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}
