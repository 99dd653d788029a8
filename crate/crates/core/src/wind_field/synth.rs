//! Synthetic wind grids standing in for reanalysis extracts.
//!
//! Each regime is a smooth analytic field sampled on a regular grid. Wind
//! direction is a function of pressure plus slow horizontal and temporal
//! drifts, so every `(lon, lat, time)` column has the regime's angular
//! structure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::str::FromStr;

use super::WindGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// Direction turns through several full rotations across the pressure
    /// axis; speeds 2-15 m/s.
    Diverse,
    /// One direction (within +-10 deg) at every level; speeds 2-15 m/s.
    Uniform,
    /// Diverse directions at 25-40 m/s.
    Strong,
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::Diverse => "diverse",
            Regime::Uniform => "uniform",
            Regime::Strong => "strong",
        }
    }
}

impl FromStr for Regime {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "diverse" => Ok(Regime::Diverse),
            "uniform" => Ok(Regime::Uniform),
            "strong" => Ok(Regime::Strong),
            other => Err(format!("unknown regime {other:?} (diverse, uniform, strong)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    pub regime: Regime,
    pub center_lon: f64,
    pub center_lat: f64,
    /// Half width of the horizontal window [deg].
    pub half_width: f64,
    /// Horizontal resolution [deg].
    pub resolution: f64,
    pub pressure_min: f64,
    pub pressure_max: f64,
    pub pressure_levels: usize,
    /// Spacing of forecast times [s].
    pub time_step: f64,
    pub time_steps: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            regime: Regime::Diverse,
            center_lon: -113.0,
            center_lat: 1.0,
            half_width: 10.0,
            resolution: 0.4,
            pressure_min: 2000.0,
            pressure_max: 17_500.0,
            pressure_levels: 32,
            time_step: 21_600.0,
            time_steps: 17,
        }
    }
}

/// Per-seed random constants of the analytic field.
struct FieldShape {
    base_heading: f64,
    /// Total direction change over the pressure axis [rad].
    turn: f64,
    lon_wave: (f64, f64, f64),
    lat_wave: (f64, f64, f64),
    /// Heading drift [rad/s].
    drift: f64,
    speed_phase: f64,
    speed_cycles: f64,
    speed_time_phase: f64,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Generates a grid for `params.regime`; identical seeds give identical grids.
pub fn synth(seed: u64, params: &SynthParams) -> WindGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = FieldShape {
        base_heading: rng.random_range(-PI..PI),
        turn: rng.random_range(3.5..4.5) * PI * if rng.random_bool(0.5) { 1.0 } else { -1.0 },
        lon_wave: (
            rng.random_range(0.2..0.5),
            rng.random_range(8.0..16.0),
            rng.random_range(0.0..TAU),
        ),
        lat_wave: (
            rng.random_range(0.2..0.5),
            rng.random_range(8.0..16.0),
            rng.random_range(0.0..TAU),
        ),
        drift: rng.random_range(-1.0..1.0) * (PI / 2.0) / 86_400.0,
        speed_phase: rng.random_range(0.0..TAU),
        speed_cycles: rng.random_range(1.0..2.5),
        speed_time_phase: rng.random_range(0.0..TAU),
    };

    let n_h = (2.0 * params.half_width / params.resolution).round() as usize + 1;
    let lon = linspace(
        params.center_lon - params.half_width,
        params.center_lon + params.half_width,
        n_h,
    );
    let lat = linspace(
        params.center_lat - params.half_width,
        params.center_lat + params.half_width,
        n_h,
    );
    let pressure = linspace(params.pressure_min, params.pressure_max, params.pressure_levels);
    let time: Vec<f64> = (0..params.time_steps).map(|i| i as f64 * params.time_step).collect();

    let p_span = (params.pressure_max - params.pressure_min).max(f64::EPSILON);
    let (speed_lo, speed_hi) = match params.regime {
        Regime::Diverse | Regime::Uniform => (2.0, 15.0),
        Regime::Strong => (25.0, 40.0),
    };
    let mut values = Vec::with_capacity(lon.len() * lat.len() * pressure.len() * time.len() * 2);
    for &x in &lon {
        for &y in &lat {
            let dx = x - params.center_lon;
            let dy = y - params.center_lat;
            let spatial = shape.lon_wave.0 * (TAU * dx / shape.lon_wave.1 + shape.lon_wave.2).sin()
                + shape.lat_wave.0 * (TAU * dy / shape.lat_wave.1 + shape.lat_wave.2).sin();
            for &p in &pressure {
                let s = (p - params.pressure_min) / p_span;
                for &t in &time {
                    let column_heading = shape.base_heading + spatial + shape.drift * t;
                    let heading = match params.regime {
                        Regime::Diverse | Regime::Strong => column_heading + shape.turn * s,
                        // Bounded wobble keeps every level within 9.5 deg of the column heading.
                        Regime::Uniform => {
                            column_heading + 9.5f64.to_radians() * (TAU * 1.3 * s + shape.speed_phase).sin()
                        }
                    };
                    let wave = 0.5
                        * (1.0
                            + (TAU * shape.speed_cycles * s
                                + shape.speed_phase
                                + 0.3 * spatial
                                + TAU * t / 259_200.0
                                + shape.speed_time_phase)
                                .sin());
                    let speed = speed_lo + (speed_hi - speed_lo) * wave;
                    values.push((speed * heading.cos()) as f32);
                    values.push((speed * heading.sin()) as f32);
                }
            }
        }
    }
    WindGrid::new(lon, lat, pressure, time, values).expect("synthetic grid is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wind_field::write_grid;

    fn small(regime: Regime) -> SynthParams {
        SynthParams {
            regime,
            half_width: 0.8,
            pressure_levels: 16,
            time_steps: 4,
            ..Default::default()
        }
    }

    fn angle_between(a: f64, b: f64) -> f64 {
        let d = (a - b).rem_euclid(TAU);
        d.min(TAU - d)
    }

    /// Largest pairwise angular separation within each column, minimised
    /// and maximised over all columns.
    fn column_spreads(g: &WindGrid) -> (f64, f64) {
        let [nlon, nlat, np, nt] = g.shape();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..nlon {
            for j in 0..nlat {
                for l in 0..nt {
                    let headings: Vec<f64> = (0..np).map(|k| g.node(i, j, k, l).heading()).collect();
                    let mut spread = 0.0f64;
                    for a in &headings {
                        for b in &headings {
                            spread = spread.max(angle_between(*a, *b));
                        }
                    }
                    lo = lo.min(spread);
                    hi = hi.max(spread);
                }
            }
        }
        (lo, hi)
    }

    #[test]
    fn regimes_hold_angular_constraints_across_seeds() {
        for seed in 0..1000 {
            let (_, uniform_max) = column_spreads(&synth(seed, &small(Regime::Uniform)));
            assert!(uniform_max <= 20f64.to_radians(), "seed {seed}: {uniform_max}");
            let (diverse_min, _) = column_spreads(&synth(seed, &small(Regime::Diverse)));
            assert!(diverse_min > 150f64.to_radians(), "seed {seed}: {diverse_min}");
        }
    }

    #[test]
    fn speed_ranges() {
        for (regime, lo, hi) in [
            (Regime::Diverse, 2.0, 15.0),
            (Regime::Uniform, 2.0, 15.0),
            (Regime::Strong, 25.0, 40.0),
        ] {
            let g = synth(5, &small(regime));
            for uv in g.values().chunks_exact(2) {
                let s = (uv[0] as f64).hypot(uv[1] as f64);
                assert!(s >= lo - 1e-4 && s <= hi + 1e-4, "{regime:?}: {s}");
            }
        }
    }

    #[test]
    fn deterministic_bytes() {
        let p = small(Regime::Diverse);
        let (mut a, mut b) = (Vec::new(), Vec::new());
        write_grid(&synth(99, &p), &mut a).unwrap();
        write_grid(&synth(99, &p), &mut b).unwrap();
        assert_eq!(a, b);
        let mut c = Vec::new();
        write_grid(&synth(100, &p), &mut c).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn default_grid_layout() {
        let g = synth(1, &SynthParams::default());
        assert_eq!(g.shape(), [51, 51, 32, 17]);
        assert_eq!(g.pressure_axis()[0], 2000.0);
        assert_eq!(*g.pressure_axis().last().unwrap(), 17_500.0);
        assert_eq!(g.time_axis()[1], 21_600.0);
    }

    #[test]
    fn regime_names_parse() {
        for r in [Regime::Diverse, Regime::Uniform, Regime::Strong] {
            assert_eq!(r.name().parse::<Regime>().unwrap(), r);
        }
        assert!("calm".parse::<Regime>().is_err());
    }
}
