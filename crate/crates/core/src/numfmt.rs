//! Canonical number formatting shared by every attribute writer.
//!
//! Values are rounded half-to-even at two decimal places on their exact
//! binary value, trailing zeros and a trailing decimal point are stripped,
//! and negative zero prints as `0`.

/// Formats `x` in canonical attribute form.
pub fn format_number(x: f64) -> String {
    debug_assert!(x.is_finite(), "non-finite value reached the formatter");
    let mut s = format!("{x:.2}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".to_owned();
    }
    s
}

/// Rounds `x` to the value its canonical string denotes.
pub fn round_canonical(x: f64) -> f64 {
    format_number(x).parse().unwrap_or(x)
}

/// Parses a plain real number (`-1.5`, `.5`, `1e3`), rejecting anything
/// with surrounding garbage, NaN or infinities.
pub fn parse_real(s: &str) -> Option<f64> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    let bytes = s.as_bytes();
    // `f64::from_str` accepts "inf", "nan" and friends; only allow numeric text.
    if !bytes
        .iter()
        .all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'-' | b'+' | b'e' | b'E'))
    {
        return None;
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Formats a list of numbers separated by single spaces.
pub fn format_list(values: &[f64]) -> String {
    values.iter().map(|v| format_number(*v)).collect::<Vec<_>>().join(" ")
}

/// Splits a comma/whitespace separated number list.
pub fn parse_list(s: &str) -> Option<Vec<f64>> {
    s.split(|c: char| c == ',' || c.is_ascii_whitespace())
        .filter(|t| !t.is_empty())
        .map(parse_real)
        .collect()
}
