//! CSV number formatting shared by every exported table.

use crate::error::{Error, Result};

/// Significant digits of every serialized float.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// Formats like C's `%.12g`: 12 significant digits, trailing zeros dropped,
/// scientific notation for exponents below -4 or at least 12.
///
/// Parsing the output and formatting again yields the same string.
pub fn format_f64(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= SIGNIFICANT_DIGITS as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim_zeros(mantissa), sign, exp.abs())
    } else {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Parses a float written by [`format_f64`].
pub fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::InvalidInput(format!("not a number: {s:?}")))
}

/// Flushes an in-memory writer into a `String`.
pub fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(e.error().to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g() {
        assert_eq!(format_f64(0.25), "0.25");
        assert_eq!(format_f64(4.0), "4");
        assert_eq!(format_f64(-1.5), "-1.5");
        assert_eq!(format_f64(1e-5), "1e-05");
        assert_eq!(format_f64(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_f64(123456789012345.0), "1.23456789012e+14");
        assert_eq!(format_f64(2.547e-40), "2.547e-40");
        assert_eq!(format_f64(0.0001), "0.0001");
        assert_eq!(format_f64(999999999999.5), "1e+12");
    }

    #[test]
    fn round_trips() {
        for v in [
            1.0 / 7.0,
            4404.712345678901,
            6.02e23,
            -3.3e-9,
            0.1 + 0.2,
            1e-300,
        ] {
            let s = format_f64(v);
            assert_eq!(format_f64(parse_f64(&s).unwrap()), s);
        }
    }
}
