/// Shortest decimal rendering of `x` rounded to 12 significant digits.
pub fn sig12(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let r: f64 = format!("{x:.11e}").parse().unwrap_or(x);
    if r == 0.0 {
        return "0".into();
    }
    if r.abs() < 1e-5 || r.abs() >= 1e15 {
        format!("{r:e}")
    } else {
        format!("{r}")
    }
}

#[cfg(test)]
mod tests {
    use super::sig12;

    #[test]
    fn twelve_digits() {
        assert_eq!(sig12(0.041), "0.041");
        assert_eq!(sig12(1.0 / 3.0), "0.333333333333");
        assert_eq!(sig12(-0.0), "0");
        assert_eq!(sig12(2368.0), "2368");
        assert_eq!(sig12(1e-20 / 3.0), "3.33333333333e-21");
        assert_eq!(sig12(f64::NAN), "NaN");
    }
}
