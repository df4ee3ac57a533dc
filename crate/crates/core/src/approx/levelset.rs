use crate::error::{Error, Result};
use crate::forms::Form;

/// Points `r(θ)(cos θ, sin θ)` on `{f = level}` for `resolution` angles
/// evenly spaced in `[0, 2π)`, with `r(θ) = (level / f(cos θ, sin θ))^{1/d}`.
pub fn emit_level_set(f: &Form, level: f64, resolution: usize) -> Result<Vec<[f64; 2]>> {
    if f.n_vars() != 2 {
        return Err(Error::LevelSet(format!(
            "level sets are drawn for bivariate forms, got {} variables",
            f.n_vars()
        )));
    }
    if f.degree() == 0 || !(level > 0.0) || resolution == 0 {
        return Err(Error::LevelSet(
            "need positive degree, positive level and at least one angle".into(),
        ));
    }
    let d = f.degree() as f64;
    (0..resolution)
        .map(|k| {
            let th = 2.0 * std::f64::consts::PI * k as f64 / resolution as f64;
            let (s, c) = th.sin_cos();
            let v = f.eval(&[c, s]);
            if !(v > 0.0) {
                return Err(Error::LevelSet(format!(
                    "form is not positive in direction θ = {th}: f = {v}"
                )));
            }
            let r = (level / v).powf(1.0 / d);
            Ok([r * c, r * s])
        })
        .collect()
}
