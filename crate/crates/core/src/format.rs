//! Numeric formatting shared by CSV/report emitters.
//!
//! All floating-point output is printed with 12 significant digits so that
//! regression diffs on generated files are meaningful and reruns are
//! byte-identical.

/// Formats `x` with 12 significant digits.
///
/// Plain decimal notation is used for magnitudes between 1e-4 and 1e15,
/// scientific notation otherwise. `0` is printed as `"0"`.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        // Tables never carry NaN/Inf cells; this only shows up in debugging.
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-4..=15).contains(&exp) {
        format!("{x:.11e}")
    } else {
        let prec = (11 - exp).max(0) as usize;
        format!("{x:.prec$}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(12.82), "12.8200000000");
        assert_eq!(fmt_sig(2015.0), "2015.00000000");
        assert_eq!(fmt_sig(0.05333333333333), "0.0533333333333");
        assert_eq!(fmt_sig(-1.5), "-1.50000000000");
        assert_eq!(fmt_sig(1e-9), "1.00000000000e-9");
    }

    #[test]
    fn stable_across_calls() {
        let x = 1.0 / 3.0;
        assert_eq!(fmt_sig(x), fmt_sig(x));
    }
}
