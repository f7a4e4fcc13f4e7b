//! Closed-form concentration bounds and measurement-count formulas.
//!
//! All logarithms are natural.

use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};

/// `exp(−δ²n/8)`.
pub fn azuma_bound(delta: f64, n: u64) -> Result<f64> {
    check_range("delta", delta, "(0, ∞)", delta > 0.0)?;
    Ok((-delta * delta * n as f64 / 8.0).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequiredRounds {
    pub rounds: u64,
    /// The formula gives less than one round (ε close to 1).
    pub degenerate: bool,
}

/// `⌈(8/ε²)·ln(1/ε)⌉`, or 0 flagged degenerate when the formula is below 1.
pub fn required_rounds(epsilon: f64) -> Result<RequiredRounds> {
    check_range("epsilon", epsilon, "(0, 1)", epsilon > 0.0 && epsilon < 1.0)?;
    let raw = 8.0 / (epsilon * epsilon) * (1.0 / epsilon).ln();
    if raw < 1.0 {
        return Ok(RequiredRounds { rounds: 0, degenerate: true });
    }
    if raw > u64::MAX as f64 {
        return Err(Error::ScaleExceeded(format!("{raw:e} rounds")));
    }
    Ok(RequiredRounds { rounds: raw.ceil() as u64, degenerate: false })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountSetting {
    Iid,
    Noniid,
}

impl std::str::FromStr for CountSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iid" => Ok(Self::Iid),
            "noniid" | "non-iid" => Ok(Self::Noniid),
            other => Err(Error::InvalidInput(format!("unknown setting {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountReport {
    pub c: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub setting: CountSetting,
    pub count: f64,
}

/// Measurements needed to reach trace distance `d` with bound constant `c`:
/// `(2c⁴/D⁴)·ln(c/D)` (iid) or `(8c⁴/D¹²)·ln(c²/D⁶)` (noniid).
pub fn measurement_count(c: f64, d: f64, setting: CountSetting) -> Result<CountReport> {
    check_range("c", c, "(0, ∞)", c > 0.0)?;
    // Explicit products: `powi` can round differently when constant-folded.
    let c2 = c * c;
    let c4 = c2 * c2;
    let d2 = d * d;
    let d4 = d2 * d2;
    let d6 = d4 * d2;
    let count = match setting {
        CountSetting::Iid => {
            check_range("D", d, "(0, c)", d > 0.0 && d < c)?;
            2.0 * c4 / d4 * (c / d).ln()
        }
        CountSetting::Noniid => {
            check_range("D", d, "(0, c^(1/3))", d > 0.0 && d6 < c2)?;
            8.0 * c4 / (d6 * d6) * (c2 / d6).ln()
        }
    };
    Ok(CountReport { c, d, setting, count })
}

/// `(1 − γ^{1/3}, γ^{1/3})`: probability of a typical round and its distance.
pub fn typical_state_bound(gamma: f64) -> Result<(f64, f64)> {
    check_range("gamma", gamma, "(0, 1)", gamma > 0.0 && gamma < 1.0)?;
    let r = gamma.cbrt();
    Ok((1.0 - r, r))
}

/// `2√δ + δ`.
pub fn gentle_measurement_bound(delta: f64) -> Result<f64> {
    check_range("delta", delta, "[0, ∞)", delta >= 0.0)?;
    Ok(2.0 * delta.sqrt() + delta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountCurveRow {
    #[serde(rename = "D")]
    pub d: f64,
    pub iid_count: f64,
    pub noniid_count: f64,
}

/// Counts for both settings over a grid of target distances.
pub fn count_curve_data(d_grid: &[f64], c_iid: f64, c_noniid: f64) -> Result<Vec<CountCurveRow>> {
    d_grid
        .iter()
        .map(|&d| {
            Ok(CountCurveRow {
                d,
                iid_count: measurement_count(c_iid, d, CountSetting::Iid)?.count,
                noniid_count: measurement_count(c_noniid, d, CountSetting::Noniid)?.count,
            })
        })
        .collect()
}

/// CSV with header `D,iid_count,noniid_count` and 17 significant digits.
pub fn count_curve_csv(rows: &[CountCurveRow]) -> String {
    let mut out = String::from("D,iid_count,noniid_count\n");
    for r in rows {
        out.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", r.d, r.iid_count, r.noniid_count));
    }
    out
}
