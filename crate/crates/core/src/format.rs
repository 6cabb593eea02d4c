//! Fixed text formatting shared by every emitted file.

/// 12 significant digits in scientific notation; `-0` is normalized to `0`.
pub fn float(x: f64) -> String {
    if x == 0.0 {
        return format!("{:.11e}", 0.0);
    }
    format!("{x:.11e}")
}
