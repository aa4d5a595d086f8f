use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{check_action, EnvConfig, EnvError, StepInfo, StepResult, TactileFrame};
use crate::tactile::{flow_entropy, moments_features, DepthGrid, FlowField, ENTROPY_BINS, ENTROPY_RANGE};

pub(crate) const OBS_DIM: usize = 7;

/// Screw-driving constants. Lengths in millimeters, flow in pixels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScrewParams {
    /// Fixed descent of the end effector per step.
    pub descent_per_step: f64,
    /// Rotation per step at full action, radians.
    pub max_rotation: f64,
    pub pitch_min: f64,
    pub pitch_max: f64,
    /// Gel shear saturates here; further slip is lost.
    pub slip_cap: f64,
    /// Flow pixels per millimeter of shear at the patch center.
    pub flow_gain: f64,
    pub flow_noise: f64,
    /// Flow samples form a `flow_grid x flow_grid` lattice.
    pub flow_grid: usize,
    /// Lattice spacing in pixels.
    pub flow_spacing: f64,
    /// Gaussian falloff (pixels) of shear transfer away from the patch
    /// center.
    pub flow_falloff: f64,
    /// Indentation of the nut contact patch.
    pub patch_depth: f64,
    /// Episode counts as a success when its mean |shear| is at most this.
    pub success_shear: f64,
}

impl Default for ScrewParams {
    fn default() -> Self {
        Self {
            descent_per_step: 0.15,
            max_rotation: 0.9,
            pitch_min: 1.5,
            pitch_max: 2.0,
            slip_cap: 0.8,
            flow_gain: 2.0,
            flow_noise: 0.15,
            flow_grid: 8,
            flow_spacing: 8.0,
            flow_falloff: 16.0,
            patch_depth: 0.5,
            success_shear: 0.25,
        }
    }
}

impl ScrewParams {
    pub fn validate(&self) -> Result<(), EnvError> {
        let checks = [
            ("descent_per_step", self.descent_per_step),
            ("max_rotation", self.max_rotation),
            ("pitch_min", self.pitch_min),
            ("slip_cap", self.slip_cap),
            ("flow_gain", self.flow_gain),
            ("flow_spacing", self.flow_spacing),
            ("flow_falloff", self.flow_falloff),
            ("patch_depth", self.patch_depth),
        ];
        for (name, v) in checks {
            if !(v.is_finite() && v > 0.0) {
                return Err(EnvError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if !(self.pitch_max.is_finite() && self.pitch_max >= self.pitch_min) {
            return Err(EnvError::InvalidConfig("pitch_max below pitch_min".into()));
        }
        if !(self.flow_noise.is_finite() && self.flow_noise >= 0.0) {
            return Err(EnvError::InvalidConfig("flow_noise must be non-negative".into()));
        }
        if self.flow_grid == 0 {
            return Err(EnvError::InvalidConfig("flow_grid must be positive".into()));
        }
        Ok(())
    }

    /// Rotation per step that advances the nut exactly with the descent.
    pub fn matched_rotation(&self, pitch: f64) -> f64 {
        TAU * self.descent_per_step / pitch
    }
}

#[derive(Clone, Debug)]
struct State {
    pitch: f64,
    descent: f64,
    rotation: f64,
    shear: f64,
    steps: usize,
    done: bool,
    rng: ChaCha8Rng,
}

/// Screw tightening with a hidden pitch; reward is the negative y-entropy of
/// the gel flow field.
#[derive(Clone, Debug)]
pub struct ScrewEnv {
    cfg: EnvConfig,
    patch: DepthGrid,
    points: Vec<(f64, f64)>,
    weights: Vec<f64>,
    state: Option<State>,
}

impl ScrewEnv {
    pub fn new(cfg: EnvConfig) -> Result<Self, EnvError> {
        cfg.validate()?;
        let p = &cfg.screw;
        let n = cfg.sensor_resolution;
        let c = (n - 1) as f64 / 2.0;
        let r = n as f64 / 3.0;
        let patch: Vec<f64> = (0..n * n)
            .map(|i| {
                let (x, y) = ((i % n) as f64, (i / n) as f64);
                if (x - c).hypot(y - c) <= r {
                    p.patch_depth
                } else {
                    0.0
                }
            })
            .collect();
        let patch = DepthGrid::new(n, n, patch)?;
        let g = p.flow_grid;
        let mid = (g as f64 - 1.0) / 2.0;
        let mut points = Vec::with_capacity(g * g);
        let mut weights = Vec::with_capacity(g * g);
        for row in 0..g {
            for col in 0..g {
                let (dx, dy) = ((col as f64 - mid) * p.flow_spacing, (row as f64 - mid) * p.flow_spacing);
                points.push((
                    p.flow_spacing * (col as f64 + 0.5),
                    p.flow_spacing * (row as f64 + 0.5),
                ));
                let r2 = dx * dx + dy * dy;
                weights.push((-r2 / (2.0 * p.flow_falloff * p.flow_falloff)).exp());
            }
        }
        Ok(Self {
            cfg,
            patch,
            points,
            weights,
            state: None,
        })
    }

    pub fn params(&self) -> &ScrewParams {
        &self.cfg.screw
    }

    pub fn pitch(&self) -> Option<f64> {
        self.state.as_ref().map(|s| s.pitch)
    }

    pub fn shear(&self) -> Option<f64> {
        self.state.as_ref().map(|s| s.shear)
    }

    /// Synthetic gel flow for a given shear: each vector's y component is
    /// the shear scaled by the local transfer weight, plus noise.
    fn flow(&self, shear: f64, rng: &mut ChaCha8Rng) -> FlowField {
        let p = &self.cfg.screw;
        let vectors = self
            .weights
            .iter()
            .map(|w| {
                let nx: f64 = rng.sample(StandardNormal);
                let ny: f64 = rng.sample(StandardNormal);
                (p.flow_noise * nx, shear * p.flow_gain * w + p.flow_noise * ny)
            })
            .collect();
        FlowField::from_vectors(self.points.clone(), vectors).expect("consistent flow field")
    }

    fn result(&self, flow: FlowField, rewarded: bool, done: bool) -> Result<StepResult, EnvError> {
        let s = self.state.as_ref().expect("reset");
        let ((mx, my), sum) = moments_features(&self.patch);
        let (hx, hy) = flow_entropy(&flow, ENTROPY_BINS, ENTROPY_RANGE)?;
        Ok(StepResult {
            obs: vec![s.descent, s.rotation, mx, my, sum, hx, hy],
            reward: if rewarded { -hy } else { 0.0 },
            done,
            info: StepInfo {
                distance: None,
                shear: Some(s.shear),
                contact: true,
                success: s.shear.abs() <= self.cfg.screw.success_shear,
            },
            tactile: TactileFrame {
                depth: self.patch.clone(),
                flow: Some(flow),
            },
        })
    }

    pub fn reset(&mut self, seed: u64) -> Result<StepResult, EnvError> {
        let p = &self.cfg.screw;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pitch = if p.pitch_max > p.pitch_min {
            rng.gen_range(p.pitch_min..=p.pitch_max)
        } else {
            p.pitch_min
        };
        let flow = self.flow(0.0, &mut rng);
        self.state = Some(State {
            pitch,
            descent: 0.0,
            rotation: 0.0,
            shear: 0.0,
            steps: 0,
            done: false,
            rng,
        });
        self.result(flow, false, false)
    }

    pub fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        check_action(action, 1)?;
        let p = self.cfg.screw.clone();
        let max_steps = self.cfg.max_steps();
        let mut s = self.state.take().ok_or(EnvError::NotReset)?;
        if s.done {
            self.state = Some(s);
            return Err(EnvError::EpisodeDone);
        }
        let dphi = action[0] * p.max_rotation;
        s.descent += p.descent_per_step;
        s.rotation += dphi;
        let advance = dphi * s.pitch / TAU;
        s.shear = (s.shear + p.descent_per_step - advance).clamp(-p.slip_cap, p.slip_cap);
        s.steps += 1;
        s.done = s.steps >= max_steps;
        let flow = self.flow(s.shear, &mut s.rng);
        let done = s.done;
        self.state = Some(s);
        self.result(flow, true, done)
    }

    /// Pitch-matched rotation using the hidden pitch.
    pub fn oracle_action(&self) -> Result<Vec<f64>, EnvError> {
        let s = self.state.as_ref().ok_or(EnvError::NotReset)?;
        let p = &self.cfg.screw;
        Ok(vec![(p.matched_rotation(s.pitch) / p.max_rotation).clamp(-1.0, 1.0)])
    }
}
