//! Argument value parsers.

use std::f64::consts::PI;

/// Angles such as `0.5`, `pi`, `-pi/4`, `2pi/3`, `2π/3`, `1.5pi`, `90deg`.
pub fn angle(s: &str) -> Result<f64, String> {
    let t = s.trim().replace('π', "pi").replace(' ', "");
    if let Some(deg) = t.strip_suffix("deg") {
        return number(deg).map(f64::to_radians);
    }
    let (head, den) = match t.split_once('/') {
        Some((h, d)) => (h, number(d)?),
        None => (t.as_str(), 1.0),
    };
    if den == 0.0 {
        return Err(format!("angle {s:?} divides by zero"));
    }
    let value = match head.strip_suffix("pi") {
        Some(coef) => {
            let coef = coef.strip_suffix('*').unwrap_or(coef);
            let c = match coef {
                "" | "+" => 1.0,
                "-" => -1.0,
                c => number(c)?,
            };
            c * PI
        }
        None => number(head)?,
    };
    Ok(value / den)
}

fn number(s: &str) -> Result<f64, String> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("{s:?} is not a finite number"))
}

/// A time value: plain numbers are τ-units, a unit suffix (`s`, `ms`, `us`,
/// `µs`, `ns`) makes it SI seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeValue {
    Tau(f64),
    Seconds(f64),
}

impl TimeValue {
    pub fn in_tau(self, tau_seconds: f64) -> f64 {
        match self {
            TimeValue::Tau(v) => v,
            TimeValue::Seconds(s) => s / tau_seconds,
        }
    }
}

pub fn time(s: &str) -> Result<TimeValue, String> {
    let t = s.trim();
    for (suffix, scale) in [("ms", 1e-3), ("us", 1e-6), ("µs", 1e-6), ("ns", 1e-9), ("s", 1.0)] {
        if let Some(v) = t.strip_suffix(suffix) {
            return number(v.trim()).map(|v| TimeValue::Seconds(v * scale));
        }
    }
    number(t).map(TimeValue::Tau)
}
