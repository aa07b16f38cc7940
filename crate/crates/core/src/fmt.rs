//! Locale-independent numeric rendering shared by every text export.

/// Significant digits used for every probability or score written to disk.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// Renders `x` with 12 significant digits in the style of C's `%.12g`.
///
/// The output is always a valid JSON number for finite input; trailing zeros
/// are dropped and scientific notation is used for very small or large values.
pub fn sig12(x: f64) -> String {
    sig(x, SIGNIFICANT_DIGITS)
}

pub fn sig(x: f64, digits: usize) -> String {
    let digits = digits.max(1);
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    // Let the formatter do the rounding, then read back the decimal exponent.
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent in scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= digits as i32 {
        format!("{}e{}", trim_zeros(mantissa), exp)
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_like_printf_g() {
        assert_eq!(sig12(0.6), "0.6");
        assert_eq!(sig12(0.4), "0.4");
        assert_eq!(sig12(1.0), "1");
        assert_eq!(sig12(0.0), "0");
        assert_eq!(sig12(1.0 / 3.0), "0.333333333333");
        assert_eq!(sig12(2.0 / 3.0), "0.666666666667");
        assert_eq!(sig12(1.5e-7), "1.5e-7");
        assert_eq!(sig12(0.00012345), "0.00012345");
        assert_eq!(sig12(-0.25), "-0.25");
        assert_eq!(sig12(123456789012345.0), "1.23456789012e14");
        assert_eq!(sig12(42.0), "42");
    }

    #[test]
    fn output_parses_back_within_precision() {
        for &x in &[0.1234567890123456, 3.3e-9, 7.0 / 11.0, 0.999999999999999] {
            let back: f64 = serde_json::from_str(&sig12(x)).unwrap();
            assert!(((back - x) / x).abs() < 1e-11, "{x} -> {back}");
        }
    }
}
