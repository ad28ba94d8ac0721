//! QoE curves mapping an integral quality value `V` onto the MOS scale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper end of the MOS scale.
pub const MOS_SCALE: f64 = 100.0;

/// Edge clamp applied before taking the logit.
pub const MOS_EPSILON: f64 = 1e-6;

/// `QoE = b1 / (1 + exp(b2 (V - b3)))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmoidParams {
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
}

impl SigmoidParams {
    /// `b1 = 100, b2 = -1, b3 = 0`: exact inverse of [`mos_to_v`].
    pub const CANONICAL: SigmoidParams = SigmoidParams { b1: MOS_SCALE, b2: -1.0, b3: 0.0 };
}

impl Default for SigmoidParams {
    fn default() -> Self {
        SigmoidParams::CANONICAL
    }
}

/// Logit of a MOS value: `ln(q / (100 - q))`.
pub fn mos_to_v(qoe: f64) -> Result<f64> {
    if !(0.0..=MOS_SCALE).contains(&qoe) {
        return Err(Error::Domain(format!("MOS {qoe} outside [0, {MOS_SCALE}]")));
    }
    let q = qoe.clamp(MOS_EPSILON, MOS_SCALE - MOS_EPSILON);
    Ok((q / (MOS_SCALE - q)).ln())
}

pub fn v_to_mos(v: f64, p: SigmoidParams) -> f64 {
    p.b1 / (1.0 + (p.b2 * (v - p.b3)).exp())
}

/// Piecewise curve: flat at `scale_min` below `v_low`, logarithmic in the
/// middle, flat at `scale_max` above `v_high`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositeCurveParams {
    pub v_low: f64,
    pub v_high: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub scale_min: f64,
    pub scale_max: f64,
}

impl CompositeCurveParams {
    // Negated comparisons reject NaN too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if !(self.v_low < self.v_high) {
            return Err(Error::Domain(format!(
                "v_low {} must be below v_high {}",
                self.v_low, self.v_high
            )));
        }
        if !(self.scale_min < self.scale_max) {
            return Err(Error::Domain(format!(
                "scale_min {} must be below scale_max {}",
                self.scale_min, self.scale_max
            )));
        }
        Ok(())
    }
}

pub fn composite_eval(v: f64, p: &CompositeCurveParams) -> Result<f64> {
    p.validate()?;
    if v < p.v_low {
        return Ok(p.scale_min);
    }
    if v > p.v_high {
        return Ok(p.scale_max);
    }
    let arg = p.b1 * (p.b2 - v) / v;
    if !(arg > 0.0 && arg.is_finite()) {
        return Err(Error::Domain(format!(
            "log argument {arg} is not positive at v = {v}"
        )));
    }
    Ok((-arg.ln() + p.b3).clamp(p.scale_min, p.scale_max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logit_known_values() {
        assert_eq!(mos_to_v(50.0).unwrap(), 0.0);
        assert!((mos_to_v(80.0).unwrap() - 4f64.ln()).abs() < 1e-12);
        assert!((mos_to_v(11.64).unwrap() - (-2.0270)).abs() < 5e-5);
    }

    #[test]
    fn logit_domain() {
        assert!(mos_to_v(-0.1).is_err());
        assert!(mos_to_v(100.1).is_err());
        assert!(mos_to_v(f64::NAN).is_err());
        assert!(mos_to_v(0.0).unwrap().is_finite());
        assert!(mos_to_v(100.0).unwrap().is_finite());
    }

    #[test]
    fn sigmoid_values() {
        let p = SigmoidParams::CANONICAL;
        assert_eq!(v_to_mos(0.0, p), 50.0);
        assert!((v_to_mos(mos_to_v(80.0).unwrap(), p) - 80.0).abs() < 1e-9);
        assert_eq!(v_to_mos(1e6, p), 100.0);
        assert_eq!(v_to_mos(-1e6, p), 0.0);
    }

    fn comp() -> CompositeCurveParams {
        CompositeCurveParams {
            v_low: 0.5,
            v_high: 1.5,
            b1: 1.0,
            b2: 2.0,
            b3: 0.0,
            scale_min: -10.0,
            scale_max: 10.0,
        }
    }

    #[test]
    fn composite_branches() {
        let p = comp();
        assert_eq!(composite_eval(0.1, &p).unwrap(), p.scale_min);
        assert_eq!(composite_eval(1.9, &p).unwrap(), p.scale_max);
        assert_eq!(composite_eval(1.0, &p).unwrap(), 0.0);
    }

    #[test]
    fn composite_domain_error() {
        let p = CompositeCurveParams { b2: 0.5, ..comp() };
        let err = composite_eval(1.0, &p).unwrap_err();
        assert!(err.to_string().contains("v = 1"), "{err}");
        let bad = CompositeCurveParams { v_low: 2.0, ..comp() };
        assert!(composite_eval(1.0, &bad).is_err());
    }

    #[test]
    fn composite_monotone_in_middle() {
        let p = comp();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=200 {
            let v = 0.3 + 1.4 * i as f64 / 200.0;
            let q = composite_eval(v, &p).unwrap();
            assert!(q >= prev);
            prev = q;
        }
    }
}
