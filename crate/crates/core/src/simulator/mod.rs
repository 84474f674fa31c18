//! Synthetic multi-detector RSSI scenes.
//!
//! A single source and several detectors sit in (or near) a rectangular room.
//! Every tick each detector reads the log-distance baseline, minus a fixed
//! absorption when any body disk crosses the source-detector segment, plus a
//! zero-mean scatter term that grows with the number of moving bodies inside
//! the path ellipse, plus Gaussian measurement noise. Geometry is 2-D plan
//! view; heights only enter the baseline distance.

pub mod geometry;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::session::{DetectorId, DetectorSeries, Label, Session};

pub use geometry::{ellipse_excess, segment_distance, Point};

/// Source and detectors may sit this far outside the room walls.
pub const ENCLOSURE_MARGIN: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLoss {
    /// Received power at the reference distance, dBm.
    pub p0_dbm: f64,
    pub d0: f64,
    pub exponent: f64,
}

impl Default for PathLoss {
    fn default() -> Self {
        Self {
            p0_dbm: -30.0,
            d0: 1.0,
            exponent: 2.0,
        }
    }
}

impl PathLoss {
    pub fn at(&self, distance: f64) -> Result<f64> {
        if !(distance > 0.0) || !distance.is_finite() {
            return Err(Error::DegenerateGeometry(format!(
                "source-detector distance {distance} must be positive"
            )));
        }
        Ok(self.p0_dbm - 10.0 * self.exponent * (distance / self.d0).log10())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorSite {
    pub id: DetectorId,
    pub position: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub width: f64,
    pub depth: f64,
    pub source: Point,
    pub detectors: Vec<DetectorSite>,
    pub rate: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    pub path_loss: PathLoss,
}

impl Scene {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn contains(&self, p: Point) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.depth).contains(&p.y)
    }

    fn in_enclosure(&self, p: Point) -> bool {
        let m = ENCLOSURE_MARGIN;
        (-m..=self.width + m).contains(&p.x) && (-m..=self.depth + m).contains(&p.y)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.depth > 0.0) {
            return Err(Error::DegenerateGeometry(format!(
                "room {} x {} m must have positive size",
                self.width, self.depth
            )));
        }
        if !(self.rate > 0.0) {
            return Err(Error::invalid(format!(
                "sample rate must be positive, got {}",
                self.rate
            )));
        }
        if !(self.noise_sigma > 0.0) {
            return Err(Error::invalid(format!(
                "noise sigma must be positive, got {}",
                self.noise_sigma
            )));
        }
        if self.detectors.is_empty() {
            return Err(Error::DegenerateGeometry("scene has no detectors".into()));
        }
        if !self.in_enclosure(self.source) {
            return Err(Error::DegenerateGeometry(
                "source lies outside the enclosure".into(),
            ));
        }
        if let Some(d) = self
            .detectors
            .iter()
            .find(|d| !self.in_enclosure(d.position))
        {
            return Err(Error::DegenerateGeometry(format!(
                "detector {} lies outside the enclosure",
                d.id
            )));
        }
        Ok(())
    }

    pub fn detector(&self, id: DetectorId) -> Option<&DetectorSite> {
        self.detectors.iter().find(|d| d.id == id)
    }
}

/// Log-distance baseline for one detector of the scene.
pub fn baseline_rssi(scene: &Scene, detector: &DetectorSite) -> Result<f64> {
    scene
        .path_loss
        .at(scene.source.distance(&detector.position))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Motion {
    Still,
    RandomWalk { speed: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Body {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
    pub motion: Motion,
}

impl Body {
    pub const DEFAULT_RADIUS: f64 = 0.25;

    pub fn still(x: f64, y: f64) -> Self {
        Self {
            x,
            y,
            radius: Self::DEFAULT_RADIUS,
            motion: Motion::Still,
        }
    }

    pub fn walking(x: f64, y: f64, speed: f64) -> Self {
        Self {
            x,
            y,
            radius: Self::DEFAULT_RADIUS,
            motion: Motion::RandomWalk { speed },
        }
    }

    pub fn is_moving(&self) -> bool {
        matches!(self.motion, Motion::RandomWalk { speed } if speed > 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub duration: f64,
    pub people: u32,
    pub fraction_moving: f64,
    /// Mean walking speed of moving bodies, m/s.
    pub walk_speed: f64,
    /// Line-of-sight absorption, dB.
    pub los_attenuation: f64,
    /// Scatter std per moving body near the path, dB.
    pub scatter_gain: f64,
    /// Path-length excess defining the scatter ellipse, m.
    pub ellipse_margin: f64,
    /// Explicit bodies; when set, `people` and `fraction_moving` are ignored.
    pub bodies: Option<Vec<Body>>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            duration: 1200.0,
            people: 0,
            fraction_moving: 1.0,
            walk_speed: 1.0,
            los_attenuation: 6.0,
            scatter_gain: 1.2,
            ellipse_margin: 0.5,
            bodies: None,
        }
    }
}

impl SimConfig {
    pub fn new(duration: f64, people: u32) -> Self {
        Self {
            duration,
            people,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) {
            return Err(Error::invalid(format!(
                "duration must be positive, got {}",
                self.duration
            )));
        }
        if !(self.los_attenuation >= 0.0 && self.scatter_gain >= 0.0 && self.ellipse_margin >= 0.0)
        {
            return Err(Error::invalid(
                "attenuation, scatter gain and margin must be non-negative",
            ));
        }
        if !(0.0..=1.0).contains(&self.fraction_moving) {
            return Err(Error::invalid(format!(
                "fraction_moving must lie in [0, 1], got {}",
                self.fraction_moving
            )));
        }
        if !(self.walk_speed >= 0.0) {
            return Err(Error::invalid("walk speed must be non-negative"));
        }
        Ok(())
    }
}

/// Heading diffusion of walkers, rad per sqrt(s).
const TURN_RATE: f64 = 1.2;

struct Walker {
    body: Body,
    heading: f64,
}

impl Walker {
    fn step(&mut self, dt: f64, width: f64, depth: f64, rng: &mut ChaCha8Rng) {
        let Motion::RandomWalk { speed } = self.body.motion else {
            return;
        };
        let turn: f64 = rng.sample(StandardNormal);
        self.heading += TURN_RATE * dt.sqrt() * turn;
        // Pace varies between 0.5x and 1.5x of the nominal speed.
        let pace = speed * (0.5 + rng.random::<f64>());
        let r = self.body.radius;
        let (mut x, mut y) = (
            self.body.x + pace * dt * self.heading.cos(),
            self.body.y + pace * dt * self.heading.sin(),
        );
        if x < r || x > width - r {
            x = if x < r {
                2.0 * r - x
            } else {
                2.0 * (width - r) - x
            };
            self.heading = std::f64::consts::PI - self.heading;
        }
        if y < r || y > depth - r {
            y = if y < r {
                2.0 * r - y
            } else {
                2.0 * (depth - r) - y
            };
            self.heading = -self.heading;
        }
        self.body.x = x.clamp(r, width - r);
        self.body.y = y.clamp(r, depth - r);
    }
}

fn place_bodies(scene: &Scene, config: &SimConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Body>> {
    if let Some(bodies) = &config.bodies {
        for b in bodies {
            if !(b.radius >= 0.0) || !scene.contains(Point::new(b.x, b.y, 0.0)) {
                return Err(Error::DegenerateGeometry(format!(
                    "body at ({}, {}) is outside the room",
                    b.x, b.y
                )));
            }
            if let Motion::RandomWalk { speed } = b.motion {
                if !(speed >= 0.0) {
                    return Err(Error::invalid("body speed must be non-negative"));
                }
            }
        }
        return Ok(bodies.clone());
    }
    let r = Body::DEFAULT_RADIUS;
    if scene.width < 2.0 * r || scene.depth < 2.0 * r {
        return Err(Error::DegenerateGeometry(
            "room is smaller than a body".into(),
        ));
    }
    let moving = (config.people as f64 * config.fraction_moving).round() as u32;
    Ok((0..config.people)
        .map(|i| {
            let x = rng.random_range(r..=scene.width - r);
            let y = rng.random_range(r..=scene.depth - r);
            if i < moving {
                Body::walking(x, y, config.walk_speed)
            } else {
                Body::still(x, y)
            }
        })
        .collect())
}

/// Generates one labeled session. All randomness derives from `scene.seed`.
pub fn simulate(scene: &Scene, config: &SimConfig) -> Result<Session> {
    scene.validate()?;
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scene.seed);
    let bodies = place_bodies(scene, config, &mut rng)?;
    let label = Label::from_count(bodies.len() as u32);

    let baselines = scene
        .detectors
        .iter()
        .map(|d| baseline_rssi(scene, d))
        .collect::<Result<Vec<_>>>()?;
    let noise = Normal::new(0.0, scene.noise_sigma).map_err(|e| Error::invalid(e.to_string()))?;

    let mut walkers: Vec<Walker> = bodies
        .iter()
        .map(|&body| Walker {
            body,
            heading: rng.random_range(0.0..std::f64::consts::TAU),
        })
        .collect();

    let ticks = (config.duration * scene.rate + 1e-9).floor() as usize;
    let dt = 1.0 / scene.rate;
    let timestamps: Vec<f64> = (0..ticks).map(|i| i as f64 / scene.rate).collect();
    let mut values: Vec<Vec<f64>> = vec![Vec::with_capacity(ticks); scene.detectors.len()];

    for _ in 0..ticks {
        for ((det, base), out) in scene
            .detectors
            .iter()
            .zip(&baselines)
            .zip(values.iter_mut())
        {
            let src = scene.source;
            let dst = det.position;
            let mut blocked = false;
            let mut near = 0usize;
            for w in &walkers {
                let b = &w.body;
                if !blocked && segment_distance(b.x, b.y, &src, &dst) <= b.radius {
                    blocked = true;
                }
                if b.is_moving() && ellipse_excess(b.x, b.y, &src, &dst) <= config.ellipse_margin {
                    near += 1;
                }
            }
            let mut rssi = *base;
            if blocked {
                rssi -= config.los_attenuation;
            }
            if near > 0 {
                let z: f64 = rng.sample(StandardNormal);
                rssi += config.scatter_gain * near as f64 * z;
            }
            rssi += noise.sample(&mut rng);
            out.push(rssi);
        }
        for w in &mut walkers {
            w.step(dt, scene.width, scene.depth, &mut rng);
        }
    }

    let series = scene
        .detectors
        .iter()
        .zip(values)
        .map(|(d, values)| DetectorSeries {
            detector_id: d.id,
            timestamps: timestamps.clone(),
            values,
            nominal_rate: scene.rate,
        })
        .collect::<Vec<_>>();
    let mut series = series;
    series.sort_by_key(|s| s.detector_id);

    let moving = bodies.iter().filter(|b| b.is_moving()).count();
    Ok(Session {
        series,
        label,
        duration: config.duration,
        metadata: format!(
            "simulated seed={} people={} moving={}",
            scene.seed,
            bodies.len(),
            moving
        ),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SceneVariant {
    M1,
    M2,
    Counting,
}

impl fmt::Display for SceneVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SceneVariant::M1 => "m1",
            SceneVariant::M2 => "m2",
            SceneVariant::Counting => "counting",
        })
    }
}

impl FromStr for SceneVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "m1" => Ok(SceneVariant::M1),
            "m2" => Ok(SceneVariant::M2),
            "counting" => Ok(SceneVariant::Counting),
            _ => Err(Error::invalid(format!("unknown scene variant `{s}`"))),
        }
    }
}

pub const REFERENCE_NOISE_SIGMA: f64 = 0.43;
pub const DEFAULT_RATE: f64 = 20.0;

fn sites(positions: &[(f64, f64, f64)]) -> Vec<DetectorSite> {
    positions
        .iter()
        .enumerate()
        .map(|(i, &(x, y, z))| DetectorSite {
            id: i as DetectorId + 1,
            position: Point::new(x, y, z),
        })
        .collect()
}

/// Reference layouts: M1 and M2 share a 3.5 x 4.5 m room with three
/// detectors, M2 with the source behind the west wall and the detectors close
/// to it; Counting is a 4 x 4.5 m room with nine detectors.
pub fn make_reference_scene(variant: SceneVariant) -> Scene {
    let (width, depth, source, detectors) = match variant {
        SceneVariant::M1 => (
            3.5,
            4.5,
            Point::new(0.4, 2.25, 1.0),
            sites(&[(3.1, 0.7, 1.0), (3.1, 2.25, 1.0), (3.1, 3.8, 1.0)]),
        ),
        SceneVariant::M2 => (
            3.5,
            4.5,
            Point::new(-1.0, 2.25, 1.0),
            sites(&[(0.6, 0.8, 1.0), (0.6, 2.25, 1.0), (0.6, 3.7, 1.0)]),
        ),
        SceneVariant::Counting => (
            4.0,
            4.5,
            Point::new(2.0, 0.3, 0.5),
            sites(&[
                (0.3, 1.2, 1.0),
                (3.7, 1.2, 1.0),
                (1.0, 4.2, 1.0),
                (3.0, 4.2, 1.0),
                (0.3, 2.8, 1.0),
                (3.7, 2.8, 1.0),
                (2.0, 4.2, 1.0),
                (2.0, 2.6, 1.0),
                (1.2, 2.0, 1.0),
            ]),
        ),
    };
    Scene {
        width,
        depth,
        source,
        detectors,
        rate: DEFAULT_RATE,
        noise_sigma: REFERENCE_NOISE_SIGMA,
        seed: 0,
        path_loss: PathLoss::default(),
    }
}
