//! Synthetic single-path scenes: a distance sweep away from the transmitter
//! crossing randomly spaced walls of random attenuation, with optional
//! log-normal shadowing on top.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::shadowing::{sample_with, ShadowingSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub reference_distance_m: f64,
    pub pl0_db: f64,
    pub exponent: f64,
    /// Per-wall attenuation drawn uniformly from `[lo, hi]` dB.
    pub wall_loss_range_db: (f64, f64),
    /// Gap between consecutive walls drawn uniformly from `[lo, hi]` m.
    pub wall_spacing_range_m: (f64, f64),
    /// Zero disables shadowing.
    pub sigma_db: f64,
    pub max_distance_m: f64,
    pub step_m: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            reference_distance_m: 1.0,
            pl0_db: 40.0,
            exponent: 3.5,
            wall_loss_range_db: (5.0, 12.0),
            wall_spacing_range_m: (4.0, 10.0),
            sigma_db: 9.0,
            max_distance_m: 50.0,
            step_m: 0.1,
        }
    }
}

impl SceneSpec {
    /// Same scene with the steeper indoor exponent `n = 4.0`.
    pub fn steep() -> Self {
        Self { exponent: 4.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidScene(msg.to_string()));
        if !(self.reference_distance_m > 0.0) {
            return bad("reference distance must be positive");
        }
        if !(self.max_distance_m > self.reference_distance_m) {
            return bad("max distance must exceed the reference distance");
        }
        if !(self.step_m > 0.0) {
            return bad("distance step must be positive");
        }
        if !(self.sigma_db >= 0.0 && self.sigma_db.is_finite()) {
            return bad("sigma must be finite and non-negative");
        }
        if !(self.exponent.is_finite() && self.pl0_db.is_finite()) {
            return bad("exponent and PL(d0) must be finite");
        }
        let (lo, hi) = self.wall_loss_range_db;
        if !(lo <= hi && lo.is_finite() && hi.is_finite()) {
            return bad("wall loss range must satisfy lo <= hi");
        }
        let (lo, hi) = self.wall_spacing_range_m;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return bad("wall spacing range must satisfy 0 < lo <= hi");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wall {
    pub position_m: f64,
    pub loss_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneSample {
    pub distance_m: f64,
    pub walls_crossed: u32,
    pub wall_loss_db: f64,
    pub true_pl_db: f64,
    pub noisy_pl_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub walls: Vec<Wall>,
    pub samples: Vec<SceneSample>,
}

fn uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

/// Generates one scene. Identical `(spec, seed)` pairs give identical scenes.
pub fn simulate_scene(spec: &SceneSpec, seed: u64) -> Result<Scene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut walls = Vec::new();
    let mut position = 0.0;
    loop {
        position += uniform(&mut rng, spec.wall_spacing_range_m);
        if position > spec.max_distance_m {
            break;
        }
        walls.push(Wall { position_m: position, loss_db: uniform(&mut rng, spec.wall_loss_range_db) });
    }

    let n_points = ((spec.max_distance_m - spec.reference_distance_m) / spec.step_m + 1e-9).floor() as usize + 1;
    let shadowing = if spec.sigma_db > 0.0 {
        let s = ShadowingSpec { sigma_db: spec.sigma_db, mean_db: 0.0 };
        sample_with(&s, &mut rng, n_points)
    } else {
        vec![0.0; n_points]
    };

    let samples = (0..n_points)
        .map(|i| {
            let d = spec.reference_distance_m + i as f64 * spec.step_m;
            let crossed: Vec<&Wall> = walls.iter().filter(|w| w.position_m < d).collect();
            let wall_loss_db: f64 = crossed.iter().map(|w| w.loss_db).sum();
            let true_pl_db = spec.pl0_db
                + 10.0 * spec.exponent * (d / spec.reference_distance_m).log10()
                + wall_loss_db;
            SceneSample {
                distance_m: d,
                walls_crossed: crossed.len() as u32,
                wall_loss_db,
                true_pl_db,
                noisy_pl_db: true_pl_db + shadowing[i],
            }
        })
        .collect();

    Ok(Scene { walls, samples })
}
