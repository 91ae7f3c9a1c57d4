//! Decimal output with a fixed number of significant digits.

/// Formats `x` in plain decimal notation rounded to 10 significant digits,
/// without trailing zeros (`6`, `0.1234567891`, `-42.5`).
pub fn format_sig(x: f64) -> String {
    format_sig_digits(x, 10)
}

pub fn format_sig_digits(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".to_owned();
    }
    // Round through scientific notation, then expand to plain decimal.
    let sci = format!("{:.*e}", digits.saturating_sub(1), x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    let negative = mantissa.starts_with('-');
    let digits_only: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let digits_only = digits_only.trim_end_matches('0');
    let digits_only = if digits_only.is_empty() { "0" } else { digits_only };

    // Position of the decimal point relative to the start of the digits.
    let point = exp + 1;
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    if point <= 0 {
        out.push_str("0.");
        out.extend(std::iter::repeat_n('0', (-point) as usize));
        out.push_str(digits_only);
    } else if point as usize >= digits_only.len() {
        out.push_str(digits_only);
        out.extend(std::iter::repeat_n('0', point as usize - digits_only.len()));
    } else {
        let (int, frac) = digits_only.split_at(point as usize);
        out.push_str(int);
        out.push('.');
        out.push_str(frac);
    }
    out
}
