use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::render::{box_corners, lower_envelope};
use super::{
    check_action, render_contact_depth, ContactPose, EnvConfig, EnvError, RewardMode,
    SensorGeometry, Shape, StepInfo, StepResult, TactileFrame,
};
use crate::tactile::{moments_features, DepthGrid};

pub(crate) const BALL_OBS_DIM: usize = 13;
pub(crate) const BOX_OBS_DIM: usize = 15;

/// Slope geometry and quasi-static push physics. Lengths in meters, angles
/// in radians, times in seconds. `x` runs across the slope, `y` up it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlopeParams {
    /// The slope spans `x` in `[-half_width, half_width]`.
    pub half_width: f64,
    /// The slope spans `y` in `[0, length]`.
    pub length: f64,
    pub goal: [f64; 2],
    pub goal_radius: f64,
    pub goal_bonus: f64,
    pub ball_radius: f64,
    pub box_half_size: f64,
    /// Half width of the pusher face (and of the square gel pad).
    pub face_half_width: f64,
    pub max_forward: f64,
    pub max_lateral: f64,
    pub max_rotation: f64,
    pub max_heading: f64,
    pub dt: f64,
    /// Down-slope acceleration of a free object.
    pub gravity: f64,
    /// Per-step slide lost to static friction.
    pub friction: f64,
    pub depth_cap_mm: f64,
    /// Nominal object start height; the start is jittered by `jitter` in
    /// both coordinates.
    pub start_y: f64,
    pub jitter: f64,
    /// Gap between pusher face and object at reset.
    pub start_gap: f64,
    /// Box yaw per meter of push per unit of normalized contact offset.
    pub yaw_gain: f64,
}

impl Default for SlopeParams {
    fn default() -> Self {
        Self {
            half_width: 0.25,
            length: 0.7,
            goal: [0.0, 0.5],
            goal_radius: 0.06,
            goal_bonus: 1.0,
            ball_radius: 0.025,
            box_half_size: 0.025,
            face_half_width: 0.03,
            max_forward: 0.02,
            max_lateral: 0.02,
            max_rotation: 0.1,
            max_heading: std::f64::consts::FRAC_PI_2,
            dt: 0.1,
            gravity: 0.8,
            friction: 0.003,
            depth_cap_mm: 1.5,
            start_y: 0.1,
            jitter: 0.02,
            start_gap: 0.003,
            yaw_gain: 10.0,
        }
    }
}

impl SlopeParams {
    pub fn validate(&self) -> Result<(), EnvError> {
        let positive = [
            ("half_width", self.half_width),
            ("length", self.length),
            ("goal_radius", self.goal_radius),
            ("ball_radius", self.ball_radius),
            ("box_half_size", self.box_half_size),
            ("face_half_width", self.face_half_width),
            ("dt", self.dt),
            ("depth_cap_mm", self.depth_cap_mm),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(EnvError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        let non_negative = [
            ("goal_bonus", self.goal_bonus),
            ("max_forward", self.max_forward),
            ("max_lateral", self.max_lateral),
            ("max_rotation", self.max_rotation),
            ("max_heading", self.max_heading),
            ("gravity", self.gravity),
            ("friction", self.friction),
            ("jitter", self.jitter),
            ("start_gap", self.start_gap),
            ("yaw_gain", self.yaw_gain),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(EnvError::InvalidConfig(format!(
                    "{name} must be non-negative"
                )));
            }
        }
        let r = self.ball_radius.max(self.box_half_size * std::f64::consts::SQRT_2);
        if self.start_y - self.jitter - r - self.start_gap < 0.0
            || self.half_width < self.jitter + r
            || self.start_y + self.jitter + r > self.length
        {
            return Err(EnvError::InvalidConfig(
                "start region does not fit on the slope".into(),
            ));
        }
        Ok(())
    }

    /// Down-slope displacement of a free object per step.
    pub fn slide(&self) -> f64 {
        (self.gravity * self.dt * self.dt - self.friction).max(0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Pusher {
    x: f64,
    y: f64,
    heading: f64,
    vx: f64,
    vy: f64,
    omega: f64,
}

impl Pusher {
    /// Face normal (pushing direction).
    fn normal(&self) -> (f64, f64) {
        (-self.heading.sin(), self.heading.cos())
    }

    /// Direction along the face.
    fn tangent(&self) -> (f64, f64) {
        (self.heading.cos(), self.heading.sin())
    }

    fn to_face(&self, x: f64, y: f64) -> (f64, f64) {
        let (dx, dy) = (x - self.x, y - self.y);
        let (t, f) = (self.tangent(), self.normal());
        (dx * t.0 + dy * t.1, dx * f.0 + dy * f.1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Object {
    x: f64,
    y: f64,
    vx: f64,
    vy: f64,
    yaw: f64,
    yaw_rate: f64,
}

#[derive(Clone, Debug, PartialEq)]
struct State {
    pusher: Pusher,
    object: Object,
    steps: usize,
    done: bool,
}

/// Pushing a ball or box up a slope into a goal region.
#[derive(Clone, Debug)]
pub struct SlopeEnv {
    cfg: EnvConfig,
    sensor: SensorGeometry,
    state: Option<State>,
}

fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut r = (a + std::f64::consts::PI) % two_pi;
    if r < 0.0 {
        r += two_pi;
    }
    r - std::f64::consts::PI
}

impl SlopeEnv {
    pub fn new(cfg: EnvConfig) -> Result<Self, EnvError> {
        cfg.validate()?;
        let sensor = SensorGeometry {
            half_width: cfg.slope.face_half_width,
            resolution: cfg.sensor_resolution,
            depth_cap_mm: cfg.slope.depth_cap_mm,
        };
        Ok(Self {
            cfg,
            sensor,
            state: None,
        })
    }

    pub fn obs_dim(&self) -> usize {
        match self.cfg.shape {
            Shape::Ball => BALL_OBS_DIM,
            Shape::Box => BOX_OBS_DIM,
        }
    }

    pub fn params(&self) -> &SlopeParams {
        &self.cfg.slope
    }

    pub fn sensor(&self) -> &SensorGeometry {
        &self.sensor
    }

    fn size(&self) -> f64 {
        match self.cfg.shape {
            Shape::Ball => self.cfg.slope.ball_radius,
            Shape::Box => self.cfg.slope.box_half_size,
        }
    }

    /// Object position, for diagnostics and tests.
    pub fn object_position(&self) -> Option<(f64, f64)> {
        self.state.as_ref().map(|s| (s.object.x, s.object.y))
    }

    /// Pusher pose `(x, y, heading)`.
    pub fn pusher_pose(&self) -> Option<(f64, f64, f64)> {
        self.state
            .as_ref()
            .map(|s| (s.pusher.x, s.pusher.y, s.pusher.heading))
    }

    /// Places the object (and zeroes its velocity). Test hook.
    pub fn place_object(&mut self, x: f64, y: f64) -> Result<(), EnvError> {
        let s = self.state.as_mut().ok_or(EnvError::NotReset)?;
        s.object.x = x;
        s.object.y = y;
        s.object.vx = 0.0;
        s.object.vy = 0.0;
        Ok(())
    }

    /// Places the pusher. Test hook.
    pub fn place_pusher(&mut self, x: f64, y: f64, heading: f64) -> Result<(), EnvError> {
        let s = self.state.as_mut().ok_or(EnvError::NotReset)?;
        s.pusher.x = x;
        s.pusher.y = y;
        s.pusher.heading = heading;
        Ok(())
    }

    pub fn reset(&mut self, seed: u64) -> Result<StepResult, EnvError> {
        let p = &self.cfg.slope;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ox = if p.jitter > 0.0 {
            rng.gen_range(-p.jitter..=p.jitter)
        } else {
            0.0
        };
        let oy = p.start_y
            + if p.jitter > 0.0 {
                rng.gen_range(-p.jitter..=p.jitter)
            } else {
                0.0
            };
        let reach = match self.cfg.shape {
            Shape::Ball => p.ball_radius,
            Shape::Box => p.box_half_size,
        };
        let state = State {
            pusher: Pusher {
                x: ox,
                y: oy - reach - p.start_gap,
                heading: 0.0,
                vx: 0.0,
                vy: 0.0,
                omega: 0.0,
            },
            object: Object {
                x: ox,
                y: oy,
                vx: 0.0,
                vy: 0.0,
                yaw: 0.0,
                yaw_rate: 0.0,
            },
            steps: 0,
            done: false,
        };
        self.state = Some(state);
        let (depth, contact) = self.render();
        let obs = self.observe(&depth);
        let s = self.state.as_ref().unwrap();
        Ok(StepResult {
            obs,
            reward: 0.0,
            done: false,
            info: StepInfo {
                distance: Some(self.goal_distance(&s.object)),
                shear: None,
                contact,
                success: false,
            },
            tactile: TactileFrame { depth, flow: None },
        })
    }

    fn goal_distance(&self, o: &Object) -> f64 {
        let g = self.cfg.slope.goal;
        (o.x - g[0]).hypot(o.y - g[1])
    }

    fn contact_pose(&self) -> ContactPose {
        let s = self.state.as_ref().expect("reset");
        let (u, w) = s.pusher.to_face(s.object.x, s.object.y);
        ContactPose {
            u,
            w,
            yaw: s.object.yaw - s.pusher.heading,
        }
    }

    fn render(&self) -> (DepthGrid, bool) {
        let depth = render_contact_depth(
            &self.contact_pose(),
            self.cfg.shape,
            self.size(),
            &self.sensor,
        );
        let contact = depth.max() > 0.0;
        (depth, contact)
    }

    fn observe(&self, depth: &DepthGrid) -> Vec<f64> {
        let s = self.state.as_ref().expect("reset");
        let ((mx, my), sum) = moments_features(depth);
        let (p, o) = (&s.pusher, &s.object);
        let mut obs = vec![p.x, p.y, p.heading, p.vx, p.vy, p.omega, o.x, o.y, o.vx, o.vy];
        if self.cfg.shape == Shape::Box {
            obs.push(o.yaw);
            obs.push(o.yaw_rate);
        }
        obs.extend([mx, my, sum]);
        obs
    }

    /// Moves the object out of the pusher, leaving at most the gel cap of
    /// overlap on the sensing side. Returns the yaw change (box only).
    fn resolve_contact(&self, pusher: &Pusher, object: &mut Object) -> f64 {
        let p = &self.cfg.slope;
        let cap = p.depth_cap_mm / 1000.0;
        let hw = p.face_half_width;
        let (t, f) = (pusher.tangent(), pusher.normal());
        let (u, w) = pusher.to_face(object.x, object.y);
        match self.cfg.shape {
            Shape::Ball => {
                let r = p.ball_radius;
                let uc = u.clamp(-hw, hw);
                let (du, dw) = (u - uc, w);
                let dist = du.hypot(dw);
                if dist >= r {
                    return 0.0;
                }
                let (nu, nw) = if dist > 1e-12 { (du / dist, dw / dist) } else { (0.0, 1.0) };
                let overlap = r - dist;
                let push = if w > 0.0 { (overlap - cap).max(0.0) } else { overlap };
                object.x += push * (nu * t.0 + nw * f.0);
                object.y += push * (nu * t.1 + nw * f.1);
                0.0
            }
            Shape::Box => {
                let s = p.box_half_size;
                let pose = ContactPose {
                    u,
                    w,
                    yaw: object.yaw - pusher.heading,
                };
                if w <= 0.0 {
                    // behind the face: treat as a disk of the inscribed radius
                    let uc = u.clamp(-hw, hw);
                    let dist = (u - uc).hypot(w);
                    if dist >= s {
                        return 0.0;
                    }
                    let (nu, nw) = if dist > 1e-12 {
                        ((u - uc) / dist, w / dist)
                    } else {
                        (0.0, -1.0)
                    };
                    let push = s - dist;
                    object.x += push * (nu * t.0 + nw * f.0);
                    object.y += push * (nu * t.1 + nw * f.1);
                    return 0.0;
                }
                let corners = box_corners(&pose, s);
                let umin = corners.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
                let umax = corners.iter().map(|c| c.0).fold(f64::NEG_INFINITY, f64::max);
                let (lo, hi) = (umin.max(-hw), umax.min(hw));
                if lo > hi {
                    return 0.0;
                }
                let mut candidates: Vec<(f64, f64)> = corners
                    .iter()
                    .filter(|c| c.0 >= lo && c.0 <= hi)
                    .copied()
                    .collect();
                for edge in [lo, hi] {
                    if let Some(we) = lower_envelope(&corners, edge) {
                        candidates.push((edge, we));
                    }
                }
                let wmin = candidates.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
                let overlap = -wmin;
                if overlap <= 0.0 {
                    return 0.0;
                }
                let touching: Vec<f64> = candidates
                    .iter()
                    .filter(|c| c.1 <= wmin + 1e-9)
                    .map(|c| c.0)
                    .collect();
                let up = touching.iter().sum::<f64>() / touching.len() as f64;
                let push = (overlap - cap).max(0.0);
                object.x += push * f.0;
                object.y += push * f.1;
                let dyaw = p.yaw_gain * push * (up - u) / s;
                object.yaw = wrap_angle(object.yaw + dyaw);
                dyaw
            }
        }
    }

    fn clamp_object(&self, o: &mut Object) {
        let p = &self.cfg.slope;
        let r = match self.cfg.shape {
            Shape::Ball => p.ball_radius,
            Shape::Box => p.box_half_size,
        };
        o.x = o.x.clamp(-p.half_width + r, p.half_width - r);
        o.y = o.y.clamp(r, p.length - r);
    }

    pub fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        check_action(action, 3)?;
        let state = self.state.as_ref().ok_or(EnvError::NotReset)?;
        if state.done {
            return Err(EnvError::EpisodeDone);
        }
        let p = self.cfg.slope.clone();
        let mut pusher = state.pusher;
        let mut object = state.object;
        let (ox, oy, oyaw) = (object.x, object.y, object.yaw);
        let (px, py, ph) = (pusher.x, pusher.y, pusher.heading);

        let (f, t) = (pusher.normal(), pusher.tangent());
        let fwd = action[0] * p.max_forward;
        let lat = action[1] * p.max_lateral;
        pusher.x = (pusher.x + fwd * f.0 + lat * t.0).clamp(-p.half_width, p.half_width);
        pusher.y = (pusher.y + fwd * f.1 + lat * t.1).clamp(0.0, p.length);
        pusher.heading =
            (pusher.heading + action[2] * p.max_rotation).clamp(-p.max_heading, p.max_heading);

        self.resolve_contact(&pusher, &mut object);
        self.clamp_object(&mut object);
        object.y -= p.slide();
        self.resolve_contact(&pusher, &mut object);
        self.clamp_object(&mut object);

        pusher.vx = (pusher.x - px) / p.dt;
        pusher.vy = (pusher.y - py) / p.dt;
        pusher.omega = (pusher.heading - ph) / p.dt;
        object.vx = (object.x - ox) / p.dt;
        object.vy = (object.y - oy) / p.dt;
        if self.cfg.shape == Shape::Box {
            object.yaw_rate = wrap_angle(object.yaw - oyaw) / p.dt;
        }

        let steps = state.steps + 1;
        let distance = self.goal_distance(&object);
        let reached = distance <= p.goal_radius;
        let done = reached || steps >= self.cfg.max_steps();
        self.state = Some(State {
            pusher,
            object,
            steps,
            done,
        });
        let reward = match self.cfg.reward {
            RewardMode::Dense => -distance + if reached { p.goal_bonus } else { 0.0 },
            RewardMode::Sparse => {
                if reached {
                    1.0
                } else {
                    0.0
                }
            }
        };
        let (depth, contact) = self.render();
        let obs = self.observe(&depth);
        Ok(StepResult {
            obs,
            reward,
            done,
            info: StepInfo {
                distance: Some(distance),
                shear: None,
                contact,
                success: reached,
            },
            tactile: TactileFrame { depth, flow: None },
        })
    }

    /// Straight-line push: line the face up behind the object on the
    /// object-goal line, then drive forward.
    pub fn oracle_action(&self) -> Result<Vec<f64>, EnvError> {
        let s = self.state.as_ref().ok_or(EnvError::NotReset)?;
        let p = &self.cfg.slope;
        let (o, pu) = (&s.object, &s.pusher);
        let (gx, gy) = (p.goal[0] - o.x, p.goal[1] - o.y);
        let heading = (-gx).atan2(gy).clamp(-p.max_heading, p.max_heading);
        let f = (-heading.sin(), heading.cos());
        let reach = self.size() + p.start_gap;
        let (tx, ty) = (o.x - reach * f.0, o.y - reach * f.1);
        let (ex, ey) = (tx - pu.x, ty - pu.y);
        let (pf, pt) = (pu.normal(), pu.tangent());
        let along = ex * pf.0 + ey * pf.1;
        let across = ex * pt.0 + ey * pt.1;
        let lateral = if p.max_lateral > 0.0 {
            (across / p.max_lateral).clamp(-1.0, 1.0)
        } else {
            0.0
        };
        let rotation = if p.max_rotation > 0.0 {
            (wrap_angle(heading - pu.heading) / p.max_rotation).clamp(-1.0, 1.0)
        } else {
            0.0
        };
        let forward = if across.abs() <= 0.5 * p.face_half_width {
            1.0
        } else if p.max_forward > 0.0 {
            (along / p.max_forward).clamp(-1.0, 1.0)
        } else {
            0.0
        };
        Ok(vec![forward, lateral, rotation])
    }
}
