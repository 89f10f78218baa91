use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmath::exp;
use crate::map_model::{HypothesisSet, IntervalMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    /// `theta_c` for each critical spec, in spec order; singular specs get
    /// `None`.
    pub theta_c: Vec<Option<f64>>,
    pub theta: f64,
    pub theta_hat: f64,
    /// Upper end of the admissible window for `theta_hat`.
    pub theta_hat_max: f64,
    pub sigma: f64,
}

/// `theta_c = 1 - 5 alpha ell_c / Lambda`, `theta = min theta_c` and
/// `sigma = min(e^lambda, e^theta_hat)` for a chosen `theta_hat`.
pub fn derived_constants(
    hyp: &HypothesisSet,
    map: &IntervalMap,
    big_lambda: f64,
    theta_hat: f64,
) -> Result<DerivedConstants> {
    if !(big_lambda > 0.0) {
        return Err(Error::InvalidParameter("Lambda must be positive".into()));
    }
    let mut theta = 1.0f64;
    let mut theta_c = Vec::with_capacity(map.critical_points().len());
    for (i, s) in map.critical_points().iter().enumerate() {
        if !s.is_critical() {
            theta_c.push(None);
            continue;
        }
        let t = 1.0 - 5.0 * hyp.alpha * s.order / big_lambda;
        if t <= 0.0 {
            return Err(Error::ThetaNonpositive { spec: i, theta: t });
        }
        theta = theta.min(t);
        theta_c.push(Some(t));
    }
    let upper = theta * big_lambda / (2.0 * hyp.ell_hat);
    if !(theta_hat > 0.0 && theta_hat < upper) {
        return Err(Error::ThetaHatOutOfRange { value: theta_hat, upper });
    }
    Ok(DerivedConstants { theta_c, theta, theta_hat, theta_hat_max: upper, sigma: exp(hyp.lambda).min(exp(theta_hat)) })
}
