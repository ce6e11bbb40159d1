//! Number formatting for JSON and CSV output.

use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

/// Formats like C's `%.17g`; non-finite values become `null`.
pub fn format_g17(x: f64) -> String {
    if !x.is_finite() {
        return "null".into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    if (-5..17).contains(&exp) {
        let (int, frac) = if exp >= 0 {
            let e = exp as usize + 1;
            (digits[..e].to_string(), digits[e..].to_string())
        } else {
            ("0".to_string(), "0".repeat((-exp - 1) as usize) + &digits)
        };
        let frac = frac.trim_end_matches('0');
        if frac.is_empty() {
            format!("{sign}{int}")
        } else {
            format!("{sign}{int}.{frac}")
        }
    } else {
        let (lead, rest) = digits.split_at(1);
        let rest = rest.trim_end_matches('0');
        let sign_e = if exp < 0 { "-" } else { "+" };
        if rest.is_empty() {
            format!("{sign}{lead}e{sign_e}{:02}", exp.abs())
        } else {
            format!("{sign}{lead}.{rest}e{sign_e}{:02}", exp.abs())
        }
    }
}

/// JSON number written with 17 significant digits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let raw = RawValue::from_string(format_g17(self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

pub fn nums(v: &[f64]) -> Vec<Num> {
    v.iter().copied().map(Num).collect()
}

/// CSV field for an optional value; missing values are empty.
pub fn csv_opt(v: Option<f64>) -> String {
    v.map(format_g17).unwrap_or_default()
}
