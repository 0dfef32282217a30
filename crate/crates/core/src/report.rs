//! Shared rendering helpers for numeric reports.

use serde_json::Value;

/// Significant digits used for printed numbers.
pub const PRINT_DIGITS: u32 = 6;

/// Rounds to `digits` significant digits; non-finite values pass through.
pub fn round_sig(x: f64, digits: u32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    // going through the exponent formatter avoids 10^k overflow for tiny values
    let s = format!("{:.*e}", digits.saturating_sub(1) as usize, x);
    s.parse().unwrap_or(x)
}

/// Rounds every floating-point number in a JSON tree.
pub fn round_json(v: &mut Value, digits: u32) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64() {
                if let Some(r) = serde_json::Number::from_f64(round_sig(x, digits)) {
                    *n = r;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(|i| round_json(i, digits)),
        Value::Object(map) => map.values_mut().for_each(|i| round_json(i, digits)),
        _ => {}
    }
}

/// Formats a number at print precision (or lossless when `full`), in
/// exponent form outside `[1e-4, 1e9)`.
pub fn fmt_value(x: f64, full: bool) -> String {
    let v = if full { x } else { round_sig(x, PRINT_DIGITS) };
    let a = v.abs();
    if v != 0.0 && v.is_finite() && !(1e-4..1e9).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}
