//! Statistical channel model.
//!
//! The transmitter only knows the distance of each user. The fading gain
//! `|h|^2` on every subcarrier is exponential with rate `1 + d^alpha`, which
//! combined with the outage target gives the QoS-stringency coefficient
//! `beta = -ln(1 - delta) / (sigma^2 (1 + d^alpha))`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Converts a power in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Converts a power in watts to dBm.
pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * (watts * 1000.0).log10()
}

/// System-wide constants: noise power per subcarrier and path-loss exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Noise power per subcarrier in watts.
    pub noise_power: f64,
    pub path_loss_exponent: f64,
}

impl SystemParams {
    pub fn new(noise_power: f64, path_loss_exponent: f64) -> Result<Self> {
        if !(noise_power > 0.0 && noise_power.is_finite()) {
            return Err(domain(format!("noise power must be positive, got {noise_power}")));
        }
        if !(path_loss_exponent > 0.0 && path_loss_exponent.is_finite()) {
            return Err(domain(format!(
                "path-loss exponent must be positive, got {path_loss_exponent}"
            )));
        }
        Ok(Self { noise_power, path_loss_exponent })
    }

    /// Builds parameters from a noise power given in dBm.
    pub fn from_dbm(noise_dbm: f64, path_loss_exponent: f64) -> Result<Self> {
        Self::new(dbm_to_watts(noise_dbm), path_loss_exponent)
    }

    pub fn noise_dbm(&self) -> f64 {
        watts_to_dbm(self.noise_power)
    }

    /// Rate of the exponential fading gain, `1 + d^alpha`.
    pub(crate) fn gain_rate(&self, distance: f64) -> f64 {
        1.0 + distance.powf(self.path_loss_exponent)
    }
}

impl Default for SystemParams {
    /// -128 dBm noise per subcarrier, path-loss exponent 3.6.
    fn default() -> Self {
        Self::from_dbm(-128.0, 3.6).expect("default parameters are valid")
    }
}

fn check_distance(distance: f64) -> Result<()> {
    if distance >= 0.0 && distance.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("distance must be non-negative and finite, got {distance}")))
    }
}

/// Large-scale attenuation `1 / (1 + d^alpha)` of the mean channel gain.
///
/// Distance zero is accepted here (it yields 1); user profiles reject it.
pub fn path_attenuation(distance: f64, params: &SystemParams) -> Result<f64> {
    check_distance(distance)?;
    Ok(1.0 / params.gain_rate(distance))
}

/// CDF of the channel gain `|h|^2` at `x`.
pub fn channel_gain_cdf(x: f64, distance: f64, params: &SystemParams) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(domain(format!("gain value must be non-negative, got {x}")));
    }
    check_distance(distance)?;
    Ok(-(-params.gain_rate(distance) * x).exp_m1())
}

/// QoS-stringency coefficient `beta` in 1/W.
///
/// Larger `beta` means a less demanding user: close to the base station or
/// tolerant of outage.
pub fn compute_beta(distance: f64, outage_req: f64, params: &SystemParams) -> Result<f64> {
    if !(outage_req > 0.0 && outage_req < 1.0) {
        return Err(domain(format!("outage requirement must lie in (0, 1), got {outage_req}")));
    }
    check_distance(distance)?;
    Ok(-(-outage_req).ln_1p() / (params.noise_power * params.gain_rate(distance)))
}

/// Draws one channel gain `|h|^2` by inverting the CDF of a uniform draw.
pub fn sample_channel_gain<R: Rng + ?Sized>(distance: f64, params: &SystemParams, rng: &mut R) -> f64 {
    sample_gain_with_rate(params.gain_rate(distance), rng)
}

#[inline]
pub(crate) fn sample_gain_with_rate<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> f64 {
    // u in [0, 1) so 1 - u is in (0, 1] and the log is finite.
    let u: f64 = rng.random();
    -(-u).ln_1p() / rate
}

/// One downlink user with its QoS requirement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub id: usize,
    /// Distance to the base station in meters.
    pub distance: f64,
    /// Total target rate over all allocated subcarriers, bit/s/Hz.
    pub total_rate: f64,
    /// Required outage probability on each allocated subcarrier.
    pub outage_req: f64,
    /// QoS-stringency coefficient in 1/W.
    pub beta: f64,
}

impl UserProfile {
    pub fn new(
        id: usize,
        distance: f64,
        total_rate: f64,
        outage_req: f64,
        params: &SystemParams,
    ) -> Result<Self> {
        if !(distance > 0.0 && distance.is_finite()) {
            return Err(domain(format!("user {id}: distance must be positive, got {distance}")));
        }
        if !(total_rate > 0.0 && total_rate.is_finite()) {
            return Err(domain(format!("user {id}: target rate must be positive, got {total_rate}")));
        }
        let beta = compute_beta(distance, outage_req, params)?;
        Ok(Self { id, distance, total_rate, outage_req, beta })
    }
}
