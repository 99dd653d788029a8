//! Seeded 4-D simplex noise used to perturb forecast winds.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::WindSample;

const F4: f64 = 0.309_016_994_374_947_45; // (sqrt(5) - 1) / 4
const G4: f64 = 0.138_196_601_125_010_5; // (5 - sqrt(5)) / 20

#[rustfmt::skip]
const GRAD4: [[f64; 4]; 32] = [
    [0.,1.,1.,1.], [0.,1.,1.,-1.], [0.,1.,-1.,1.], [0.,1.,-1.,-1.],
    [0.,-1.,1.,1.], [0.,-1.,1.,-1.], [0.,-1.,-1.,1.], [0.,-1.,-1.,-1.],
    [1.,0.,1.,1.], [1.,0.,1.,-1.], [1.,0.,-1.,1.], [1.,0.,-1.,-1.],
    [-1.,0.,1.,1.], [-1.,0.,1.,-1.], [-1.,0.,-1.,1.], [-1.,0.,-1.,-1.],
    [1.,1.,0.,1.], [1.,1.,0.,-1.], [1.,-1.,0.,1.], [1.,-1.,0.,-1.],
    [-1.,1.,0.,1.], [-1.,1.,0.,-1.], [-1.,-1.,0.,1.], [-1.,-1.,0.,-1.],
    [1.,1.,1.,0.], [1.,1.,-1.,0.], [1.,-1.,1.,0.], [1.,-1.,-1.,0.],
    [-1.,1.,1.,0.], [-1.,1.,-1.,0.], [-1.,-1.,1.,0.], [-1.,-1.,-1.,0.],
];

/// Gustavson-style 4-D simplex noise over a seeded permutation table.
/// Output is clamped to `[-1, 1]`.
#[derive(Clone)]
pub struct Simplex4 {
    perm: [u8; 512],
}

impl std::fmt::Debug for Simplex4 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Simplex4").finish_non_exhaustive()
    }
}

impl Simplex4 {
    pub fn new(seed: u64) -> Self {
        let mut base: Vec<u8> = (0..=255).collect();
        base.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut perm = [0u8; 512];
        for (i, p) in perm.iter_mut().enumerate() {
            *p = base[i & 255];
        }
        Self { perm }
    }

    fn hash(&self, i: i64, j: i64, k: i64, l: i64) -> usize {
        let p = |v: usize| self.perm[v] as usize;
        let (i, j, k, l) = (
            (i & 255) as usize,
            (j & 255) as usize,
            (k & 255) as usize,
            (l & 255) as usize,
        );
        p(i + p(j + p(k + p(l)))) % 32
    }

    pub fn eval(&self, x: f64, y: f64, z: f64, w: f64) -> f64 {
        let s = (x + y + z + w) * F4;
        let (i, j, k, l) = ((x + s).floor(), (y + s).floor(), (z + s).floor(), (w + s).floor());
        let t = (i + j + k + l) * G4;
        let d0 = [x - (i - t), y - (j - t), z - (k - t), w - (l - t)];

        // Rank the coordinates to find the simplex traversal order.
        let mut rank = [0u8; 4];
        for a in 0..4 {
            for b in a + 1..4 {
                if d0[a] > d0[b] {
                    rank[a] += 1;
                } else {
                    rank[b] += 1;
                }
            }
        }
        let (i, j, k, l) = (i as i64, j as i64, k as i64, l as i64);
        let mut total = 0.0;
        for corner in 0..5u8 {
            // corner c steps along every axis whose rank is >= 4 - c
            let step = |d: usize| -> i64 {
                if corner == 4 || (corner > 0 && rank[d] >= 4 - corner) {
                    1
                } else {
                    0
                }
            };
            let off = [step(0), step(1), step(2), step(3)];
            let g4 = corner as f64 * G4;
            let d = [
                d0[0] - off[0] as f64 + g4,
                d0[1] - off[1] as f64 + g4,
                d0[2] - off[2] as f64 + g4,
                d0[3] - off[3] as f64 + g4,
            ];
            let mut falloff = 0.6 - d.iter().map(|v| v * v).sum::<f64>();
            if falloff > 0.0 {
                let g = GRAD4[self.hash(i + off[0], j + off[1], k + off[2], l + off[3])];
                falloff *= falloff;
                total += falloff * falloff * (g[0] * d[0] + g[1] * d[1] + g[2] * d[2] + g[3] * d[3]);
            }
        }
        (27.0 * total).clamp(-1.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Peak perturbation per component [m/s].
    pub amplitude: f64,
    /// Horizontal correlation scale [deg].
    pub spatial_scale: f64,
    /// Vertical correlation scale [Pa].
    pub pressure_scale: f64,
    /// Temporal correlation scale [s].
    pub time_scale: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            amplitude: 1.5,
            spatial_scale: 2.0,
            pressure_scale: 3000.0,
            time_scale: 6.0 * 3600.0,
            seed: 0,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(format!("noise amplitude must be >= 0, got {}", self.amplitude));
        }
        if !(self.spatial_scale > 0.0 && self.pressure_scale > 0.0 && self.time_scale > 0.0) {
            return Err("noise scales must be positive".into());
        }
        Ok(())
    }
}

/// Independent noise fields for the two wind components.
#[derive(Debug, Clone)]
pub struct WindNoise {
    config: NoiseConfig,
    east: Simplex4,
    north: Simplex4,
}

impl WindNoise {
    pub fn new(config: NoiseConfig) -> Self {
        Self {
            config,
            east: Simplex4::new(config.seed),
            north: Simplex4::new(config.seed ^ 0x9E37_79B9_7F4A_7C15),
        }
    }

    pub fn config(&self) -> &NoiseConfig {
        &self.config
    }

    /// Adds the perturbation at `(lon, lat, pressure, time)` to `sample`.
    pub fn augment(&self, sample: WindSample, lon: f64, lat: f64, pressure: f64, time: f64) -> WindSample {
        let c = &self.config;
        if c.amplitude == 0.0 {
            return sample;
        }
        let (x, y, z, w) = (
            lon / c.spatial_scale,
            lat / c.spatial_scale,
            pressure / c.pressure_scale,
            time / c.time_scale,
        );
        WindSample {
            v_wx: sample.v_wx + c.amplitude * self.east.eval(x, y, z, w),
            v_wy: sample.v_wy + c.amplitude * self.north.eval(x, y, z, w),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn zero_amplitude_is_identity() {
        let noise = WindNoise::new(NoiseConfig {
            amplitude: 0.0,
            ..Default::default()
        });
        let s = WindSample { v_wx: 3.0, v_wy: -1.0 };
        assert_eq!(noise.augment(s, -113.0, 1.0, 8000.0, 5000.0), s);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = WindNoise::new(NoiseConfig {
            seed: 7,
            ..Default::default()
        });
        let b = WindNoise::new(NoiseConfig {
            seed: 7,
            ..Default::default()
        });
        let c = WindNoise::new(NoiseConfig {
            seed: 8,
            ..Default::default()
        });
        let s = WindSample::default();
        let q = (-112.7, 0.3, 9100.0, 12345.0);
        assert_eq!(a.augment(s, q.0, q.1, q.2, q.3), b.augment(s, q.0, q.1, q.2, q.3));
        assert_ne!(a.augment(s, q.0, q.1, q.2, q.3), c.augment(s, q.0, q.1, q.2, q.3));
    }

    #[test]
    fn components_are_independent_fields() {
        let n = WindNoise::new(NoiseConfig {
            amplitude: 1.0,
            ..Default::default()
        });
        let s = n.augment(WindSample::default(), 0.37, 1.91, 4321.0, 777.0);
        assert_ne!(s.v_wx, s.v_wy);
    }

    #[test]
    fn bounded_and_unbiased() {
        let noise = WindNoise::new(NoiseConfig {
            amplitude: 1.0,
            seed: 3,
            ..Default::default()
        });
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (mut sum_x, mut sum_y) = (0.0, 0.0);
        let n = 100_000;
        for _ in 0..n {
            let s = noise.augment(
                WindSample::default(),
                rng.random_range(-200.0..200.0),
                rng.random_range(-200.0..200.0),
                rng.random_range(0.0..300_000.0),
                rng.random_range(0.0..2.0e6),
            );
            assert!(s.v_wx.abs() <= 1.0 && s.v_wy.abs() <= 1.0);
            sum_x += s.v_wx;
            sum_y += s.v_wy;
        }
        assert!((sum_x / n as f64).abs() < 0.05, "mean {}", sum_x / n as f64);
        assert!((sum_y / n as f64).abs() < 0.05, "mean {}", sum_y / n as f64);
    }

    #[test]
    fn smooth_and_nontrivial() {
        let s = Simplex4::new(1);
        let mut max = 0.0f64;
        for i in 0..2000 {
            let x = i as f64 * 0.013;
            let v = s.eval(x, 0.5 * x, 1.3, -0.7 * x);
            let dv = s.eval(x + 1e-6, 0.5 * x, 1.3, -0.7 * x) - v;
            assert!(dv.abs() < 1e-4);
            max = max.max(v.abs());
        }
        assert!(max > 0.3, "noise too flat: {max}");
    }
}
