//! Text formatting for machine-readable outputs.

/// Minimum significant digits written to CSV.
pub const MIN_SIGNIFICANT_DIGITS: usize = 12;

/// Decimal (non-exponent) rendering of `x` that round-trips exactly and carries
/// at least [`MIN_SIGNIFICANT_DIGITS`] significant digits, padding with zeros.
///
/// ```
/// use orderbatch_core::io::format_decimal;
/// assert_eq!(format_decimal(4.0), "4.00000000000");
/// assert_eq!(format_decimal(0.1), "0.100000000000");
/// assert_eq!(format_decimal(-1.25e-3), "-0.00125000000000");
/// ```
pub fn format_decimal(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    // f64's Display is the shortest round-trip form and never uses an exponent.
    let mut s = x.to_string();
    let digits: String = s.chars().filter(|c| c.is_ascii_digit()).collect();
    let significant = match digits.find(|c| c != '0') {
        Some(first) => digits.len() - first,
        None => 1,
    };
    if significant < MIN_SIGNIFICANT_DIGITS {
        if !s.contains('.') {
            s.push('.');
        }
        s.extend(std::iter::repeat_n(
            '0',
            MIN_SIGNIFICANT_DIGITS - significant,
        ));
    }
    s
}
