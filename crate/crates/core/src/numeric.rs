//! Decimal rounding helpers shared by rendering and scoring.

/// Rounds half away from zero at `places` decimals, treating values within
/// 1e-9 of a tie as a tie so that binary representation noise
/// (e.g. `139.45 == 139.449999…`) does not decide the direction.
pub fn round_half_up(value: f64, places: u32) -> f64 {
    let scale = 10f64.powi(places as i32);
    let scaled = value * scale;
    let snapped = (scaled * 1e9).round() / 1e9;
    let rounded = if snapped >= 0.0 {
        (snapped + 0.5).floor()
    } else {
        -((-snapped + 0.5).floor())
    };
    rounded / scale
}

/// Formats with exactly one decimal after [`round_half_up`].
pub fn fmt_1dp(value: f64) -> String {
    format!("{:.1}", round_half_up(value, 1))
}

/// Formats a delta with an explicit sign, one decimal.
pub fn fmt_signed_1dp(value: f64) -> String {
    let r = round_half_up(value, 1);
    if r > 0.0 {
        format!("+{r:.1}")
    } else if r < 0.0 {
        format!("{r:.1}")
    } else {
        "+0.0".to_string()
    }
}

/// Number of whole microseconds in `seconds`, rounded to nearest.
pub fn to_micros(seconds: f64) -> i64 {
    (seconds * 1e6).round() as i64
}

/// Quantizes a time in seconds to microsecond resolution.
pub fn quantize_seconds(seconds: f64) -> f64 {
    to_micros(seconds) as f64 / 1e6
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_ties_round_up() {
        assert_eq!(round_half_up(139.45, 1), 139.5);
        assert_eq!(round_half_up(133.45, 1), 133.5);
        assert_eq!(round_half_up(122.75, 1), 122.8);
        assert_eq!(round_half_up(1.18034, 2), 1.18);
        assert_eq!(round_half_up(-0.25, 1), -0.3);
        assert_eq!(round_half_up(2.5, 0), 3.0);
    }

    #[test]
    fn signed_formatting() {
        assert_eq!(fmt_signed_1dp(32.4), "+32.4");
        assert_eq!(fmt_signed_1dp(-70.1), "-70.1");
        assert_eq!(fmt_signed_1dp(0.0), "+0.0");
        assert_eq!(fmt_signed_1dp(-0.01), "+0.0");
    }

    #[test]
    fn micro_quantization() {
        assert_eq!(quantize_seconds(0.1), 0.1);
        assert_eq!(quantize_seconds(1.2 - 0.5), 0.7);
    }
}
