use serde::Serialize;

use crate::error::{Error, Result};

/// Relative agreement required between the general and `gamma = 2p` forms.
pub const SECOND_FORM_TOL: f64 = 1e-14;

/// Exponents of the Hardy family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HardyParams {
    pub p: f64,
    pub gamma: f64,
}

impl HardyParams {
    /// Requires `p >= 1` and `gamma < k`.
    pub fn new(p: f64, gamma: f64, k: usize) -> Result<Self> {
        if !(p.is_finite() && p >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "p = {p} must be a real >= 1"
            )));
        }
        if !(gamma.is_finite() && gamma < k as f64) {
            return Err(Error::InvalidParameter(format!(
                "gamma = {gamma} must be < k = {k}"
            )));
        }
        Ok(Self { p, gamma })
    }

    /// `((k - gamma) / p)^{p-1}`, the factor shared by the curvature and boundary terms.
    pub fn c(&self, k: usize) -> f64 {
        ((k as f64 - self.gamma) / self.p).powf(self.p - 1.0)
    }

    /// `((k - gamma) / p)^p`.
    pub fn leading(&self, k: usize) -> f64 {
        ((k as f64 - self.gamma) / self.p).powf(self.p)
    }
}

/// Exponents of the Rellich family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RellichParams {
    pub p: f64,
    pub gamma: f64,
    pub flat_ambient: bool,
}

impl RellichParams {
    /// Requires `2 - (p-1)(k-2) < gamma < k` in flat ambients and `2 < gamma < k` otherwise.
    pub fn new(p: f64, gamma: f64, k: usize, flat_ambient: bool) -> Result<Self> {
        if !(p.is_finite() && p >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "p = {p} must be a real >= 1"
            )));
        }
        let kf = k as f64;
        let lower = if flat_ambient {
            2.0 - (p - 1.0) * (kf - 2.0)
        } else {
            2.0
        };
        if !(gamma.is_finite() && gamma > lower && gamma < kf) {
            return Err(Error::InvalidParameter(format!(
                "gamma = {gamma} outside ({lower}, {kf}) for k = {k}, p = {p}{}",
                if flat_ambient {
                    " in a flat ambient"
                } else {
                    ""
                }
            )));
        }
        Ok(Self {
            p,
            gamma,
            flat_ambient,
        })
    }
}

/// Constants of the `gamma = 2p` specialization, stated in closed form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SecondForm {
    pub a: f64,
    pub b: f64,
    /// Coefficient of `grad psi` in `W`.
    pub w_gradient: f64,
    /// Coefficient of `psi grad r^T / r` inside the bracket of `W`.
    pub w_radial_ratio: f64,
}

/// Rellich constants; `second_form` is present when `gamma = 2p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RellichConstants {
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    /// `E^{p-1} / p^{p-2}`, the coefficient of `grad psi` in `W`.
    pub w_gradient: f64,
    pub second_form: Option<SecondForm>,
}

fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Evaluates `E`, `A`, `B` and the `W` coefficient for `k`, `gamma`, `p`.
pub fn rellich_constants(
    k: usize,
    gamma: f64,
    p: f64,
    flat_ambient: bool,
) -> Result<RellichConstants> {
    RellichParams::new(p, gamma, k, flat_ambient)?;
    let kf = k as f64;
    let e = (kf - gamma) / p * (gamma - 2.0 + (p - 1.0) * (kf - 2.0));
    if !(e > 0.0) {
        return Err(Error::InvalidParameter(format!("E = {e} is not positive")));
    }
    let a = e.powf(p) / p.powf(p);
    let b = e.powf(p - 1.0) / p.powf(p - 1.0) * (e / (kf - gamma) + (p - 1.0) / p);
    let w_gradient = e.powf(p - 1.0) / p.powf(p - 2.0);
    let second_form = if (gamma - 2.0 * p).abs() <= 1e-12 * gamma.abs().max(1.0) {
        let s = SecondForm {
            a: kf.powf(p) * (kf - 2.0 * p).powf(p) * (p - 1.0).powf(p) / p.powf(2.0 * p),
            b: kf.powf(p - 1.0) * (kf - 2.0 * p).powf(p - 1.0) * (p - 1.0).powf(p) * (kf + 1.0)
                / p.powf(2.0 * p - 1.0),
            w_gradient: (kf - 2.0 * p).powf(p - 1.0) * kf.powf(p - 1.0) * (p - 1.0).powf(p - 1.0)
                / p.powf(2.0 * p - 3.0),
            w_radial_ratio: (p - 1.0) * (kf + 1.0) / (p * p),
        };
        let pairs = [
            ("A", a, s.a),
            ("B", b, s.b),
            ("W gradient coefficient", w_gradient, s.w_gradient),
            ("W radial coefficient", b, s.w_gradient * s.w_radial_ratio),
        ];
        for (name, general, special) in pairs {
            let d = rel_diff(general, special);
            if d > SECOND_FORM_TOL {
                return Err(Error::InvalidParameter(format!(
                    "{name}: general form {general} and gamma = 2p form {special} differ by {d:e}"
                )));
            }
        }
        Some(s)
    } else {
        None
    };
    Ok(RellichConstants {
        e,
        a,
        b,
        w_gradient,
        second_form,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spot_value() {
        let c = rellich_constants(5, 4.0, 2.0, true).unwrap();
        assert!((c.e - 2.5).abs() < 1e-15);
        assert!((c.a - 1.5625).abs() < 1e-15);
        assert!((c.b - 3.75).abs() < 1e-15);
        let s = c.second_form.unwrap();
        assert!((s.a - 25.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn p_one_reduces() {
        for (k, gamma) in [(3, 2.5), (5, 3.0), (7, 6.9)] {
            let c = rellich_constants(k, gamma, 1.0, false).unwrap();
            let expect = (gamma - 2.0) * (k as f64 - gamma);
            assert!((c.a - expect).abs() < 1e-14 * expect.max(1.0));
            assert!((c.b - (gamma - 2.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn ranges() {
        assert!(RellichParams::new(1.0, 2.0, 3, true).is_err());
        assert!(RellichParams::new(2.0, 1.5, 3, true).is_ok());
        assert!(RellichParams::new(2.0, 1.5, 3, false).is_err());
        assert!(RellichParams::new(0.5, 2.5, 3, true).is_err());
        assert!(HardyParams::new(1.0, 2.0, 2).is_err());
        assert!(HardyParams::new(1.0, -5.0, 2).is_ok());
        assert!(rellich_constants(3, 3.0, 1.0, true).is_err());
    }
}
