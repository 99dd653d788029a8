//! Gridded horizontal winds over longitude x latitude x pressure x time.

mod io;
mod noise;
mod synth;

pub use io::{convert_csv, load, read_csv, read_grid, save, write_grid, MAGIC, VERSION};
pub use noise::{NoiseConfig, Simplex4, WindNoise};
pub use synth::{synth, Regime, SynthParams};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Winds faster than this are rejected as corrupt data [m/s].
pub const MAX_WIND_SPEED: f64 = 150.0;

#[derive(Debug, Error)]
pub enum WindError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("format error: {0}")]
    Format(String),
    #[error("axis error: {0}")]
    Axis(String),
    #[error("shape error{}: {message}", row.map(|r| format!(" at row {r}")).unwrap_or_default())]
    Shape { message: String, row: Option<usize> },
    #[error("value error: {0}")]
    Value(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl WindError {
    pub(crate) fn shape(message: impl Into<String>) -> Self {
        WindError::Shape {
            message: message.into(),
            row: None,
        }
    }
}

/// Horizontal wind vector [m/s], `v_wx` eastward and `v_wy` northward.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct WindSample {
    pub v_wx: f64,
    pub v_wy: f64,
}

impl WindSample {
    pub fn speed(&self) -> f64 {
        self.v_wx.hypot(self.v_wy)
    }

    /// Direction the wind blows towards, counter-clockwise from east [rad].
    pub fn heading(&self) -> f64 {
        self.v_wy.atan2(self.v_wx)
    }
}

/// Dense 4-D wind grid. Values are stored row-major in
/// `(lon, lat, pressure, time, component)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct WindGrid {
    lon: Vec<f64>,
    lat: Vec<f64>,
    pressure: Vec<f64>,
    time: Vec<f64>,
    values: Vec<f32>,
}

fn check_axis(name: &str, axis: &[f64]) -> Result<(), WindError> {
    if axis.is_empty() {
        return Err(WindError::Axis(format!("{name} axis is empty")));
    }
    if axis.iter().any(|v| !v.is_finite()) {
        return Err(WindError::Axis(format!("{name} axis has non-finite entries")));
    }
    if let Some(i) = axis.windows(2).position(|w| w[1] <= w[0]) {
        return Err(WindError::Axis(format!(
            "{name} axis not strictly increasing at index {}: {} then {}",
            i + 1,
            axis[i],
            axis[i + 1]
        )));
    }
    Ok(())
}

/// Bracketing index and weight of `x` on `axis`, clamped to the axis range.
fn locate(axis: &[f64], x: f64) -> (usize, f64) {
    let n = axis.len();
    if n == 1 || x <= axis[0] {
        return (0, 0.0);
    }
    if x >= axis[n - 1] {
        return (n - 2, 1.0);
    }
    let i = axis.partition_point(|&a| a <= x) - 1;
    (i, (x - axis[i]) / (axis[i + 1] - axis[i]))
}

impl WindGrid {
    pub fn new(
        lon: Vec<f64>,
        lat: Vec<f64>,
        pressure: Vec<f64>,
        time: Vec<f64>,
        values: Vec<f32>,
    ) -> Result<Self, WindError> {
        check_axis("longitude", &lon)?;
        check_axis("latitude", &lat)?;
        check_axis("pressure", &pressure)?;
        check_axis("time", &time)?;
        if pressure[0] <= 0.0 {
            return Err(WindError::Axis("pressure axis must be positive".into()));
        }
        let expected = lon.len() * lat.len() * pressure.len() * time.len() * 2;
        if values.len() != expected {
            return Err(WindError::shape(format!(
                "expected {expected} values, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.chunks_exact(2).position(|uv| {
            let (u, v) = (uv[0] as f64, uv[1] as f64);
            !(u.is_finite() && v.is_finite() && u.hypot(v) < MAX_WIND_SPEED)
        }) {
            return Err(WindError::Value(format!(
                "wind vector {i} is non-finite or faster than {MAX_WIND_SPEED} m/s"
            )));
        }
        Ok(Self {
            lon,
            lat,
            pressure,
            time,
            values,
        })
    }

    pub fn lon_axis(&self) -> &[f64] {
        &self.lon
    }
    pub fn lat_axis(&self) -> &[f64] {
        &self.lat
    }
    pub fn pressure_axis(&self) -> &[f64] {
        &self.pressure
    }
    pub fn time_axis(&self) -> &[f64] {
        &self.time
    }
    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn shape(&self) -> [usize; 4] {
        [self.lon.len(), self.lat.len(), self.pressure.len(), self.time.len()]
    }

    fn offset(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        let [_, nlat, np, nt] = self.shape();
        (((i * nlat + j) * np + k) * nt + l) * 2
    }

    pub fn node(&self, i: usize, j: usize, k: usize, l: usize) -> WindSample {
        let o = self.offset(i, j, k, l);
        WindSample {
            v_wx: self.values[o] as f64,
            v_wy: self.values[o + 1] as f64,
        }
    }

    pub fn contains(&self, lon: f64, lat: f64) -> bool {
        let within = |axis: &[f64], x: f64| x >= axis[0] && x <= axis[axis.len() - 1];
        within(&self.lon, lon) && within(&self.lat, lat)
    }

    /// Multilinear interpolation of both components; queries outside the
    /// grid are clamped to its boundary.
    pub fn sample(&self, lon: f64, lat: f64, pressure: f64, time: f64) -> WindSample {
        let [nlon, nlat, np, nt] = self.shape();
        if !self.contains(lon, lat) {
            log::trace!("wind query ({lon}, {lat}) clamped to grid edge");
        }
        let axes = [
            (locate(&self.lon, lon), nlon),
            (locate(&self.lat, lat), nlat),
            (locate(&self.pressure, pressure), np),
            (locate(&self.time, time), nt),
        ];
        let mut u = 0.0;
        let mut v = 0.0;
        for corner in 0..16usize {
            let mut weight = 1.0;
            let mut idx = [0usize; 4];
            for (d, &((i, f), n)) in axes.iter().enumerate() {
                let upper = corner >> d & 1 == 1;
                idx[d] = if upper { (i + 1).min(n - 1) } else { i };
                weight *= if upper { f } else { 1.0 - f };
            }
            if weight == 0.0 {
                continue;
            }
            let o = self.offset(idx[0], idx[1], idx[2], idx[3]);
            u += weight * self.values[o] as f64;
            v += weight * self.values[o + 1] as f64;
        }
        WindSample { v_wx: u, v_wy: v }
    }
}
