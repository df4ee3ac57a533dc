use serde::Serialize;

use crate::error::{Error, Result};

/// A multiplier degree from a degree bound, or no finite bound when the
/// ratio is zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DegreeBound {
    Finite(u32),
    NoFiniteBound,
}

impl DegreeBound {
    pub fn finite(self) -> Option<u32> {
        match self {
            DegreeBound::Finite(r) => Some(r),
            DegreeBound::NoFiniteBound => None,
        }
    }
}

impl std::fmt::Display for DegreeBound {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DegreeBound::Finite(r) => write!(f, "{r}"),
            DegreeBound::NoFiniteBound => f.write_str("NO_FINITE_BOUND"),
        }
    }
}

fn ratio_check(value: f64, name: &str) -> Result<bool> {
    if !value.is_finite() || !(0.0..=1.0).contains(&value) {
        return Err(Error::InvalidInput(format!(
            "{name} must lie in [0, 1], got {value}"
        )));
    }
    Ok(value > 0.0)
}

fn clamp(x: f64) -> DegreeBound {
    let r = x.ceil().max(0.0);
    DegreeBound::Finite(if r > u32::MAX as f64 { u32::MAX } else { r as u32 })
}

/// Smallest `r ≥ nd(d−1)/(4 ln2 ε) − (n+d)/2` for a form with sphere ratio `ε`.
pub fn reznick_bound(eps: f64, n: usize, d: u32) -> Result<DegreeBound> {
    if !ratio_check(eps, "eps")? {
        return Ok(DegreeBound::NoFiniteBound);
    }
    let (n, d) = (n as f64, d as f64);
    Ok(clamp(
        n * d * (d - 1.0) / (4.0 * std::f64::consts::LN_2 * eps) - (n + d) / 2.0,
    ))
}

/// Smallest `r ≥ n(d−2)(d−3)/(4 ln2 η) − (n+d−2)/2 − d` for a form with
/// bisphere Hessian ratio `η`.
pub fn eta_bound(eta: f64, n: usize, d: u32) -> Result<DegreeBound> {
    if !ratio_check(eta, "eta")? {
        return Ok(DegreeBound::NoFiniteBound);
    }
    let (n, d) = (n as f64, d as f64);
    Ok(clamp(
        n * (d - 2.0) * (d - 3.0) / (4.0 * std::f64::consts::LN_2 * eta) - (n + d - 2.0) / 2.0 - d,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_evaluation() {
        // 24 / (2 ln 2) - 3 = 14.31...
        assert_eq!(reznick_bound(0.5, 2, 4).unwrap(), DegreeBound::Finite(15));
        // 4 / (4 ln 2 / 3) - 6 < 0
        assert_eq!(eta_bound(1.0 / 3.0, 2, 4).unwrap(), DegreeBound::Finite(0));
        assert_eq!(eta_bound(0.0, 3, 8).unwrap(), DegreeBound::NoFiniteBound);
        assert_eq!(reznick_bound(0.0, 3, 6).unwrap(), DegreeBound::NoFiniteBound);
        assert_eq!(reznick_bound(1.0, 2, 2).unwrap(), DegreeBound::Finite(0));
    }

    #[test]
    fn out_of_range_ratios_are_errors() {
        assert!(reznick_bound(-0.1, 2, 4).is_err());
        assert!(eta_bound(-1e-9, 2, 4).is_err());
        assert!(eta_bound(1.5, 2, 4).is_err());
        assert!(reznick_bound(f64::NAN, 2, 4).is_err());
    }

    #[test]
    fn monotone_in_the_ratio() {
        for (n, d) in [(2, 4), (3, 6), (5, 8)] {
            let mut prev_r = u32::MAX;
            let mut prev_e = u32::MAX;
            for k in 1..=200 {
                let x = k as f64 / 200.0;
                let r = reznick_bound(x, n, d).unwrap().finite().unwrap();
                let e = eta_bound(x, n, d).unwrap().finite().unwrap();
                assert!(r <= prev_r && e <= prev_e);
                prev_r = r;
                prev_e = e;
            }
        }
    }
}
