//! Distortion sweeps over the feasible interval of one direction.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::config::{check_range, SweepTarget};
use super::format::{sig, snap};
use crate::error::{RdlError, Result};
use crate::model::{derive, SystemParams};
use crate::tradeoff::{serde_bits, Direction, DirectionTerms, Regime};

/// Offset from `D_min`, relative to the interval width, where sweeps start.
pub const ENDPOINT_OFFSET: f64 = 1e-6;

pub const CSV_HEADER: &str = "d,rate_bits,leakage_bits,regime,s";

/// One grid point: the swept distortion and the transmitting direction's outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub d: f64,
    pub rate: f64,
    pub leakage: f64,
    pub regime: Regime,
    /// Test-channel noise variance; `+∞` when nothing is sent.
    #[serde(with = "serde_bits")]
    pub s: Option<f64>,
}

impl SweepTarget {
    /// The direction whose rate and leakage this distortion governs.
    pub fn direction(self) -> Direction {
        match self {
            SweepTarget::D1 => Direction::TwoToOne,
            SweepTarget::D2 => Direction::OneToTwo,
        }
    }
}

/// Evaluates `points` distortions spread over `range` (fractions of
/// `[D_min, D_max]`). The grid never starts below `D_min + ENDPOINT_OFFSET·width`
/// and every `d` is rounded to its 12-digit CSV rendering before evaluation.
pub fn sweep(params: &SystemParams, target: SweepTarget, points: usize, range: [f64; 2]) -> Result<Vec<SweepRecord>> {
    if points < 2 {
        return Err(RdlError::InvalidInput(format!("points must be at least 2, got {points}")));
    }
    check_range(range).map_err(RdlError::InvalidInput)?;
    let q = derive(params)?;
    let terms = DirectionTerms::new(&q, params, target.direction());
    let (d_min, d_max) = (terms.d_min_receiver, terms.d_max_receiver);
    let width = d_max - d_min;

    let lo = d_min + (range[0] * width).max(ENDPOINT_OFFSET * width);
    let hi = d_min + range[1] * width;
    (0..points)
        .map(|i| {
            let raw = if i + 1 == points && range[1] == 1.0 {
                d_max
            } else {
                lo + (hi - lo) * i as f64 / (points - 1) as f64
            };
            let d = if raw >= d_max { snap_at_least(raw) } else { snap_above(raw, d_min) };
            evaluate(&terms, d)
        })
        .collect()
}

/// Rounds to 12 significant digits, stepping up if rounding lands on or below `floor`.
fn snap_above(d: f64, floor: f64) -> f64 {
    snap_until(d, |s| s > floor)
}

/// Smallest-magnitude 12-digit value not below `d`, so `D_max` stays in the zero-rate branch.
fn snap_at_least(d: f64) -> f64 {
    snap_until(d, |s| s >= d)
}

fn snap_until(d: f64, ok: impl Fn(f64) -> bool) -> f64 {
    let mut x = d;
    let mut s = snap(x);
    for _ in 0..8 {
        if ok(s) {
            break;
        }
        x += 5e-12 * x.abs().max(f64::MIN_POSITIVE);
        s = snap(x);
    }
    s
}

pub fn evaluate(terms: &DirectionTerms, d: f64) -> Result<SweepRecord> {
    let regime = terms.classify(d);
    Ok(SweepRecord {
        d,
        rate: terms.rate(d)?,
        leakage: terms.leakage(d)?,
        regime,
        s: Some(terms.calibrate_noise(d)?),
    })
}

pub fn write_csv<W: Write>(records: &[SweepRecord], out: &mut W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{}",
            sig(r.d),
            sig(r.rate),
            sig(r.leakage),
            r.regime,
            r.s.map_or_else(|| "inf".to_string(), sig)
        )?;
    }
    Ok(())
}

/// Parses CSV produced by [`write_csv`].
pub fn read_csv(text: &str) -> std::result::Result<Vec<SweepRecord>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => return Err(format!("unexpected header {other:?}")),
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let fields: Vec<&str> = line.split(',').collect();
            let [d, rate, leak, regime, s] = fields[..] else {
                return Err(format!("expected 5 fields in {line:?}"));
            };
            let num = |v: &str| v.parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
            let regime = match regime {
                "infeasible" => Regime::Infeasible,
                "infinite_rate" => Regime::InfiniteRate,
                "interior" => Regime::Interior,
                "zero_rate" => Regime::ZeroRate,
                other => return Err(format!("unknown regime {other:?}")),
            };
            Ok(SweepRecord {
                d: num(d)?,
                rate: num(rate)?,
                leakage: num(leak)?,
                regime,
                s: Some(num(s)?),
            })
        })
        .collect()
}
