use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{NetworkConfig, SpikeRecord};
use crate::error::{Result, SimError};
use crate::rng::stream_rng;

const TAG_RATES: u64 = 0x5241_5445;

/// Wall-plug power of a 4He cryocooler with no device load, W. Reported,
/// not simulated.
pub const CRYOSTAT_BASE_POWER: f64 = 1e3;
/// Additional wall-plug power per watt dissipated at 4.2 K.
pub const CRYOSTAT_POWER_PER_DEVICE_WATT: f64 = 1e3;

/// Samples `n` mean firing rates from p(f) ∝ 1/f on `[f_min, f_max]`.
pub fn one_over_f_rates(n: usize, f_min: f64, f_max: f64, seed: u64) -> Result<Vec<f64>> {
    if !(f_min > 0.0 && f_max >= f_min && f_max.is_finite()) {
        return Err(SimError::Domain(format!(
            "rate range needs 0 < f_min <= f_max (got [{f_min:e}, {f_max:e}])"
        )));
    }
    let mut rng = stream_rng(seed, TAG_RATES);
    let ratio = f_max / f_min;
    Ok((0..n)
        .map(|_| {
            let u: f64 = rng.random();
            if ratio == 1.0 {
                f_min
            } else {
                f_min * ratio.powf(u)
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub duration: f64,
    pub area: f64,
    pub transmitter_power: f64,
    pub receiver_power: f64,
    pub update_power: f64,
    pub static_power: f64,
    pub total: f64,
    pub power_density: f64,
}

impl PowerReport {
    /// Wall-plug cooling power needed to hold this load at 4.2 K, W.
    pub fn cryostat_power(&self) -> f64 {
        CRYOSTAT_BASE_POWER + CRYOSTAT_POWER_PER_DEVICE_WATT * self.total
    }

    /// The same activity repeated `factor` times over a different area.
    pub fn scaled(&self, factor: f64, area: f64) -> PowerReport {
        let transmitter_power = self.transmitter_power * factor;
        let receiver_power = self.receiver_power * factor;
        let update_power = self.update_power * factor;
        let static_power = self.static_power * factor;
        let total = transmitter_power + receiver_power + update_power + static_power;
        PowerReport {
            duration: self.duration,
            area,
            transmitter_power,
            receiver_power,
            update_power,
            static_power,
            total,
            power_density: total / area,
        }
    }
}

/// Average device power of a run over `duration`.
pub fn power_report(record: &SpikeRecord, config: &NetworkConfig, duration: f64) -> Result<PowerReport> {
    if !(duration > 0.0) {
        return Err(SimError::Domain("power report needs a duration > 0".into()));
    }
    let transmitter_power = record.energy.transmitter / duration;
    let receiver_power = record.energy.receiver / duration;
    let update_power = record.energy.update / duration;
    let static_power = config.static_power;
    let total = transmitter_power + receiver_power + update_power + static_power;
    Ok(PowerReport {
        duration,
        area: config.die_area,
        transmitter_power,
        receiver_power,
        update_power,
        static_power,
        total,
        power_density: total / config.die_area,
    })
}
