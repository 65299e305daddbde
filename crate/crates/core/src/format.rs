//! Shared CSV conventions: comma separated, header row, LF line endings and
//! floats with 17 significant digits.

/// Formats `v` with 17 significant digits so it round-trips exactly.
pub fn float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

/// Parses a float cell, naming the column on failure.
pub(crate) fn parse_float(cell: &str, column: &str) -> std::result::Result<f64, String> {
    cell.trim()
        .parse::<f64>()
        .map_err(|e| format!("column `{column}`: cannot parse `{cell}` as a number ({e})"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 123456789.12345679, 0.0] {
            let s = float(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            let mantissa = s.split('e').next().unwrap().replace(['-', '.'], "");
            assert_eq!(mantissa.len(), 17);
        }
    }
}
