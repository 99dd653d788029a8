//! US Standard Atmosphere 1976, truncated at 47 km geopotential altitude.
//!
//! Temperature follows piecewise-linear lapse rates; pressure is integrated
//! layer by layer with the barometric formula (exponential in isothermal
//! layers, power law otherwise). Density comes from the ideal gas law so
//! `rho == P * M_a / (R * T)` holds by construction.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::PhysicsConstants;

/// Highest altitude served by the truncated model.
pub const MAX_ALTITUDE: f64 = 47_000.0;

const SEA_LEVEL_TEMPERATURE: f64 = 288.15;
const SEA_LEVEL_PRESSURE: f64 = 101_325.0;

/// `(base geopotential altitude [m], lapse rate [K/m])` for the first four
/// USSA1976 layers.
const USSA1976_LAPSE_TABLE: [(f64, f64); 4] = [(0.0, -0.0065), (11_000.0, 0.0), (20_000.0, 0.001), (32_000.0, 0.0028)];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AtmosphereError {
    #[error("altitude {0} m outside the supported range [0, {max}] m", max = MAX_ALTITUDE)]
    AltitudeOutOfRange(f64),
    #[error("invalid layer table: {0}")]
    InvalidLayers(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtmosphereLayer {
    /// Geopotential altitude of the layer base [m].
    pub base_altitude: f64,
    /// Temperature at the layer base [K].
    pub base_temperature: f64,
    /// Temperature gradient [K/m].
    pub lapse_rate: f64,
    /// Pressure at the layer base [Pa].
    pub base_pressure: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtmosphereSample {
    pub altitude: f64,
    pub temperature: f64,
    pub pressure: f64,
    pub density: f64,
}

/// A layered atmosphere bound to a set of gas constants.
#[derive(Debug, Clone, PartialEq)]
pub struct Atmosphere {
    layers: Vec<AtmosphereLayer>,
    gas_constant: f64,
    molar_mass_air: f64,
    gravity: f64,
}

impl Default for Atmosphere {
    fn default() -> Self {
        Self::standard(&PhysicsConstants::default())
    }
}

impl Atmosphere {
    /// USSA1976 layers with base pressures integrated from sea level using `consts`.
    pub fn standard(consts: &PhysicsConstants) -> Self {
        Self::from_lapse_table(SEA_LEVEL_TEMPERATURE, SEA_LEVEL_PRESSURE, &USSA1976_LAPSE_TABLE, consts)
            .expect("built-in lapse table is valid")
    }

    /// Builds a layer stack from `(base_altitude, lapse_rate)` pairs. Base
    /// temperatures and pressures of every layer above the first are derived
    /// from the layer below so the profile is continuous.
    pub fn from_lapse_table(
        surface_temperature: f64,
        surface_pressure: f64,
        table: &[(f64, f64)],
        consts: &PhysicsConstants,
    ) -> Result<Self, AtmosphereError> {
        if table.is_empty() {
            return Err(AtmosphereError::InvalidLayers("empty table".into()));
        }
        if table[0].0 != 0.0 {
            return Err(AtmosphereError::InvalidLayers("first layer must start at 0 m".into()));
        }
        if table.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(AtmosphereError::InvalidLayers(
                "layer bases must be strictly increasing".into(),
            ));
        }
        if surface_temperature <= 0.0 || surface_pressure <= 0.0 {
            return Err(AtmosphereError::InvalidLayers(
                "surface temperature and pressure must be positive".into(),
            ));
        }

        let mut atm = Self {
            layers: Vec::with_capacity(table.len()),
            gas_constant: consts.gas_constant,
            molar_mass_air: consts.molar_mass_air,
            gravity: consts.gravity,
        };
        let mut base_temperature = surface_temperature;
        let mut base_pressure = surface_pressure;
        for (k, &(base_altitude, lapse_rate)) in table.iter().enumerate() {
            let layer = AtmosphereLayer {
                base_altitude,
                base_temperature,
                lapse_rate,
                base_pressure,
            };
            atm.layers.push(layer);
            if let Some(&(next_base, _)) = table.get(k + 1) {
                let (t, p) = atm.evaluate(&layer, next_base);
                if t <= 0.0 {
                    return Err(AtmosphereError::InvalidLayers(format!(
                        "temperature reaches {t} K at {next_base} m"
                    )));
                }
                base_temperature = t;
                base_pressure = p;
            }
        }
        Ok(atm)
    }

    pub fn layers(&self) -> &[AtmosphereLayer] {
        &self.layers
    }

    fn evaluate(&self, layer: &AtmosphereLayer, altitude: f64) -> (f64, f64) {
        let dh = altitude - layer.base_altitude;
        let temperature = layer.base_temperature + layer.lapse_rate * dh;
        let gm_over_r = self.gravity * self.molar_mass_air / self.gas_constant;
        let pressure = if layer.lapse_rate == 0.0 {
            layer.base_pressure * (-gm_over_r * dh / layer.base_temperature).exp()
        } else {
            layer.base_pressure * (temperature / layer.base_temperature).powf(-gm_over_r / layer.lapse_rate)
        };
        (temperature, pressure)
    }

    fn layer_for(&self, altitude: f64) -> &AtmosphereLayer {
        let idx = self
            .layers
            .partition_point(|l| l.base_altitude <= altitude)
            .saturating_sub(1);
        &self.layers[idx]
    }

    pub fn sample(&self, altitude: f64) -> Result<AtmosphereSample, AtmosphereError> {
        if !(0.0..=MAX_ALTITUDE).contains(&altitude) {
            return Err(AtmosphereError::AltitudeOutOfRange(altitude));
        }
        let (temperature, pressure) = self.evaluate(self.layer_for(altitude), altitude);
        Ok(AtmosphereSample {
            altitude,
            temperature,
            pressure,
            density: pressure * self.molar_mass_air / (self.gas_constant * temperature),
        })
    }

    /// Inverse of [`Atmosphere::sample`]'s pressure profile. Pressures outside
    /// the served range are clamped to the range endpoints.
    pub fn altitude_for_pressure(&self, pressure: f64) -> f64 {
        let gm_over_r = self.gravity * self.molar_mass_air / self.gas_constant;
        let layer = self
            .layers
            .iter()
            .rev()
            .find(|l| l.base_pressure >= pressure)
            .unwrap_or(&self.layers[0]);
        let altitude = if layer.lapse_rate == 0.0 {
            layer.base_altitude - (pressure / layer.base_pressure).ln() * layer.base_temperature / gm_over_r
        } else {
            let ratio = (pressure / layer.base_pressure).powf(-layer.lapse_rate / gm_over_r);
            layer.base_altitude + layer.base_temperature * (ratio - 1.0) / layer.lapse_rate
        };
        altitude.clamp(0.0, MAX_ALTITUDE)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // USSA1976 tabulated values at geopotential altitude (NASA-TM-X-74335).
    const TABLE: [(f64, f64, f64); 7] = [
        (0.0, 288.15, 101_325.0),
        (5_000.0, 255.65, 54_020.0),
        (11_000.0, 216.65, 22_632.0),
        (15_000.0, 216.65, 12_045.0),
        (20_000.0, 216.65, 5_474.9),
        (25_000.0, 221.65, 2_511.0),
        (30_000.0, 226.65, 1_171.9),
    ];

    #[test]
    fn matches_published_table() {
        let atm = Atmosphere::default();
        for (h, t, p) in TABLE {
            let s = atm.sample(h).unwrap();
            assert!((s.temperature - t).abs() < 0.01, "T at {h}: {}", s.temperature);
            assert!(((s.pressure - p) / p).abs() < 1e-3, "P at {h}: {}", s.pressure);
        }
    }

    #[test]
    fn sea_level_density() {
        let s = Atmosphere::default().sample(0.0).unwrap();
        assert!((s.density - 1.2250).abs() < 1e-4);
    }

    #[test]
    fn density_is_ideal_gas_by_construction() {
        let c = PhysicsConstants::default();
        let atm = Atmosphere::default();
        for h in [0.0, 1234.5, 17_000.0, 46_999.0] {
            let s = atm.sample(h).unwrap();
            assert_eq!(
                s.density,
                s.pressure * c.molar_mass_air / (c.gas_constant * s.temperature)
            );
        }
    }

    #[test]
    fn continuous_at_layer_boundaries() {
        let atm = Atmosphere::default();
        for layer in &atm.layers()[1..] {
            let h = layer.base_altitude;
            let below = atm.evaluate(atm.layer_for(h - 1e-6), h);
            let above = atm.sample(h).unwrap();
            assert!((below.0 - above.temperature).abs() < 1e-9);
            assert!(((below.1 - above.pressure) / above.pressure).abs() < 1e-9);
        }
    }

    #[test]
    fn monotone_pressure_and_density() {
        let atm = Atmosphere::default();
        let mut prev = atm.sample(0.0).unwrap();
        let mut h = 50.0;
        while h <= MAX_ALTITUDE {
            let s = atm.sample(h).unwrap();
            assert!(s.pressure < prev.pressure && s.density < prev.density, "at {h}");
            prev = s;
            h += 50.0;
        }
    }

    #[test]
    fn rejects_out_of_range() {
        let atm = Atmosphere::default();
        assert_eq!(atm.sample(-1.0), Err(AtmosphereError::AltitudeOutOfRange(-1.0)));
        assert!(atm.sample(47_000.1).is_err());
        assert!(atm.sample(f64::NAN).is_err());
        assert!(atm.sample(MAX_ALTITUDE).is_ok());
    }

    #[test]
    fn pressure_inverse_round_trips() {
        let atm = Atmosphere::default();
        for h in [500.0, 10_999.0, 14_000.0, 18_500.0, 25_000.0, 40_000.0] {
            let p = atm.sample(h).unwrap().pressure;
            assert!((atm.altitude_for_pressure(p) - h).abs() < 1e-6);
        }
    }

    #[test]
    fn custom_table_validation() {
        let c = PhysicsConstants::default();
        assert!(Atmosphere::from_lapse_table(288.15, 101_325.0, &[], &c).is_err());
        assert!(Atmosphere::from_lapse_table(288.15, 101_325.0, &[(10.0, 0.0)], &c).is_err());
        assert!(Atmosphere::from_lapse_table(288.15, 101_325.0, &[(0.0, 0.0), (0.0, 0.0)], &c).is_err());
        let iso = Atmosphere::from_lapse_table(250.0, 100_000.0, &[(0.0, 0.0)], &c).unwrap();
        assert_eq!(iso.sample(30_000.0).unwrap().temperature, 250.0);
    }
}
