//! Number formatting shared by the text and CSV writers.

/// Significant digits in CSV and text output.
pub const SIG_DIGITS: usize = 12;

/// Formats like C's `%.12g`: 12 significant digits, trailing zeros trimmed,
/// exponent notation only for very small or very large magnitudes.
pub fn sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.*e}", SIG_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent in {:e} output");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= SIG_DIGITS as i32 {
        format!("{}e{exp}", trim_zeros(mantissa))
    } else {
        let decimals = (SIG_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

/// Rounds `x` to the value its [`sig`] rendering parses back to.
pub fn snap(x: f64) -> f64 {
    sig(x).parse().expect("sig output parses")
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
