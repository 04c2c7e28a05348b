//! Exact event-driven simulation of the random evolution.
//!
//! Holding times are exponential with mean `ε²`; at every epoch a fresh
//! direction is drawn from the switching law (self-transitions included) and
//! the particle moves in a straight line with speed `c(θ)/ε + c1(θ)`. The
//! path is piecewise linear, so positions are integrated in closed form.
//!
//! Each path owns a ChaCha stream selected by `(seed, path_index)`, which
//! makes ensembles independent of how paths are scheduled across threads.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RevolveError};
use crate::profiles::VelocityProfile;
use crate::sphere::{direction_from_angles, fill_angles, fill_uniform_direction, AngleVector, UnitDirection};

/// Full trajectories stop being recorded beyond this many segments in total.
pub const DEFAULT_SEGMENT_BUDGET: usize = 50_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteDirection {
    pub angles: AngleVector,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum Switching {
    /// Uniform law on the sphere.
    #[default]
    UniformSphere,
    /// Finitely many directions with probabilities summing to one.
    Discrete(Vec<DiscreteDirection>),
}

#[derive(Debug, Clone)]
pub struct EvolutionConfig {
    pub dimension: usize,
    pub epsilon: f64,
    pub profile: VelocityProfile,
    pub horizon: f64,
    pub x0: Vec<f64>,
    pub n_paths: usize,
    pub seed: u64,
    pub switching: Switching,
    /// Fixed first direction; `None` draws it from the switching law.
    pub initial_direction: Option<AngleVector>,
}

impl EvolutionConfig {
    pub fn new(profile: VelocityProfile, epsilon: f64, horizon: f64, n_paths: usize, seed: u64) -> Self {
        let n = profile.dimension();
        EvolutionConfig {
            dimension: n,
            epsilon,
            profile,
            horizon,
            x0: vec![0.0; n],
            n_paths,
            seed,
            switching: Switching::UniformSphere,
            initial_direction: None,
        }
    }

    /// Checks every numeric constraint; errors name the offending field.
    pub fn validate(&self) -> Result<()> {
        let n = self.dimension;
        if n < 2 {
            return Err(RevolveError::config("dimension", format!("must be at least 2, got {n}")));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(RevolveError::config(
                "epsilon",
                format!("must lie in (0, 1], got {}", self.epsilon),
            ));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(RevolveError::config(
                "horizon",
                format!("must be positive, got {}", self.horizon),
            ));
        }
        if self.x0.len() != n || self.x0.iter().any(|x| !x.is_finite()) {
            return Err(RevolveError::config("x0", format!("must be {n} finite numbers")));
        }
        if self.n_paths == 0 {
            return Err(RevolveError::config("n_paths", "must be at least 1"));
        }
        if self.profile.dimension() != n {
            return Err(RevolveError::config(
                "profile",
                format!("profile dimension {} differs from {n}", self.profile.dimension()),
            ));
        }
        if let Switching::Discrete(law) = &self.switching {
            if law.is_empty() {
                return Err(RevolveError::config("switching", "discrete law needs at least one direction"));
            }
            let mut total = 0.0;
            for (i, choice) in law.iter().enumerate() {
                if choice.angles.dimension() != n {
                    return Err(RevolveError::config(
                        format!("switching.discrete[{i}].angles"),
                        format!("expected {} angles", n - 1),
                    ));
                }
                if !(choice.probability >= 0.0) {
                    return Err(RevolveError::config(
                        format!("switching.discrete[{i}].probability"),
                        "must be non-negative",
                    ));
                }
                total += choice.probability;
            }
            if (total - 1.0).abs() > 1e-12 {
                return Err(RevolveError::config(
                    "switching",
                    format!("probabilities sum to {total}, not 1"),
                ));
            }
        }
        if let Some(angles) = &self.initial_direction {
            if angles.dimension() != n {
                return Err(RevolveError::config("initial_direction", format!("expected {} angles", n - 1)));
            }
        }
        Ok(())
    }

    /// FNV-1a digest of everything that determines the ensemble.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv::default();
        h.u64(self.dimension as u64);
        h.f64(self.epsilon);
        h.f64(self.horizon);
        self.x0.iter().for_each(|&x| h.f64(x));
        h.u64(self.n_paths as u64);
        h.u64(self.seed);
        h.bytes(self.profile.name().as_bytes());
        for atom in self.profile.atoms() {
            atom.angles.as_slice().iter().for_each(|&a| h.f64(a));
            h.f64(atom.weight);
            h.f64(atom.c);
            h.f64(atom.c1);
        }
        if let Switching::Discrete(law) = &self.switching {
            for choice in law {
                choice.angles.as_slice().iter().for_each(|&a| h.f64(a));
                h.f64(choice.probability);
            }
        }
        if let Some(angles) = &self.initial_direction {
            angles.as_slice().iter().for_each(|&a| h.f64(a));
        }
        h.0
    }
}

struct Fnv(u64);

impl Default for Fnv {
    fn default() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }
}

impl Fnv {
    fn bytes(&mut self, data: &[u8]) {
        for &b in data {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }

    fn u64(&mut self, v: u64) {
        self.bytes(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.u64(v.to_bits());
    }
}

/// One simulated path: segment boundaries `0 = t_0 < t_1 < ... < t_m = T`,
/// the direction on each segment and the exact positions at the boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub switch_times: Vec<f64>,
    pub directions: Vec<UnitDirection>,
    pub positions: Vec<Vec<f64>>,
    pub speeds: Vec<f64>,
}

impl Trajectory {
    /// Number of direction switches strictly inside `(0, T)`.
    pub fn switch_count(&self) -> usize {
        self.switch_times.len().saturating_sub(2)
    }

    pub fn endpoint(&self) -> &[f64] {
        self.positions.last().expect("a trajectory has at least its start point")
    }
}

/// Path endpoints at time `t` for every path of a config.
#[derive(Debug, Clone, PartialEq)]
pub struct EndpointEnsemble {
    pub dimension: usize,
    pub t: f64,
    /// Row-major `n_paths × dimension`.
    pub points: Vec<f64>,
    pub switch_counts: Vec<u64>,
    pub fingerprint: u64,
}

impl EndpointEnsemble {
    pub fn n_paths(&self) -> usize {
        self.points.len() / self.dimension
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dimension..(i + 1) * self.dimension]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dimension)
    }

    /// Values of coordinate `i` across paths.
    pub fn coordinate(&self, i: usize) -> Vec<f64> {
        self.rows().map(|r| r[i]).collect()
    }
}

/// Precomputed switching law.
enum Law {
    Uniform { needs_angles: bool, c: f64, c1: f64 },
    Discrete { cumulative: Vec<f64>, choices: Vec<(Vec<f64>, f64, f64)> },
}

struct Engine<'a> {
    config: &'a EvolutionConfig,
    law: Law,
    initial: Option<(Vec<f64>, f64, f64)>,
}

impl<'a> Engine<'a> {
    fn new(config: &'a EvolutionConfig) -> Result<Self> {
        config.validate()?;
        let profile = &config.profile;
        let law = match &config.switching {
            Switching::UniformSphere => {
                let needs_angles = !(profile.c().is_constant() && profile.c1().is_constant());
                let probe = AngleVector::new_unchecked(vec![0.5; config.dimension - 1]);
                Law::Uniform {
                    needs_angles,
                    c: profile.c().eval(&probe),
                    c1: profile.c1().eval(&probe),
                }
            }
            Switching::Discrete(law) => {
                let mut cumulative = Vec::with_capacity(law.len());
                let mut acc = 0.0;
                let mut choices = Vec::with_capacity(law.len());
                for choice in law {
                    acc += choice.probability;
                    cumulative.push(acc);
                    let s = direction_from_angles(&choice.angles)?.into_components();
                    let (c, c1) = profile.speeds_at(&choice.angles);
                    choices.push((s, c, c1));
                }
                Law::Discrete { cumulative, choices }
            }
        };
        let initial = match &config.initial_direction {
            Some(angles) => {
                let (c, c1) = profile.speeds_at(angles);
                Some((direction_from_angles(angles)?.into_components(), c, c1))
            }
            None => None,
        };
        Ok(Engine { config, law, initial })
    }

    fn rng(&self, path_index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(path_index);
        rng
    }

    /// Draws a direction into `s` and returns its speed `c/ε + c1`;
    /// `scratch` holds the angles when the profile needs them.
    fn draw(&self, rng: &mut ChaCha8Rng, s: &mut [f64], scratch: &mut AngleVector) -> f64 {
        let inv_eps = 1.0 / self.config.epsilon;
        match &self.law {
            Law::Uniform { needs_angles, c, c1 } => {
                fill_uniform_direction(rng, s);
                if *needs_angles {
                    fill_angles(s, scratch.as_mut_slice());
                    let (c, c1) = self.config.profile.speeds_at(scratch);
                    c * inv_eps + c1
                } else {
                    c * inv_eps + c1
                }
            }
            Law::Discrete { cumulative, choices } => {
                let u: f64 = rng.gen();
                let k = cumulative.partition_point(|&p| p <= u).min(choices.len() - 1);
                let (dir, c, c1) = &choices[k];
                s.copy_from_slice(dir);
                c * inv_eps + c1
            }
        }
    }

    /// Runs one path, reporting each segment `(t_start, t_end, s, speed, x_end)`.
    fn run<F>(&self, path_index: u64, x: &mut [f64], mut on_segment: F) -> u64
    where
        F: FnMut(f64, f64, &[f64], f64, &[f64]),
    {
        let config = self.config;
        let eps2 = config.epsilon * config.epsilon;
        let horizon = config.horizon;
        let mut rng = self.rng(path_index);
        let mut s = vec![0.0; config.dimension];
        let mut scratch = AngleVector::new_unchecked(vec![0.0; config.dimension - 1]);
        x.copy_from_slice(&config.x0);

        let mut speed = match &self.initial {
            Some((dir, c, c1)) => {
                s.copy_from_slice(dir);
                c / config.epsilon + c1
            }
            None => self.draw(&mut rng, &mut s, &mut scratch),
        };
        let mut t = 0.0;
        let mut switches = 0u64;
        loop {
            let hold: f64 = rng.sample::<f64, _>(Exp1) * eps2;
            let t_next = t + hold;
            let end = if t_next >= horizon { horizon } else { t_next };
            let step = speed * (end - t);
            x.iter_mut().zip(&s).for_each(|(x, s)| *x += step * s);
            on_segment(t, end, &s, speed, x);
            if t_next >= horizon {
                return switches;
            }
            t = t_next;
            switches += 1;
            speed = self.draw(&mut rng, &mut s, &mut scratch);
        }
    }
}

/// Simulates path `path_index` and records every segment.
pub fn simulate_path(config: &EvolutionConfig, path_index: u64) -> Result<Trajectory> {
    let engine = Engine::new(config)?;
    let mut trajectory = Trajectory {
        switch_times: vec![0.0],
        directions: Vec::new(),
        positions: vec![config.x0.clone()],
        speeds: Vec::new(),
    };
    let mut x = vec![0.0; config.dimension];
    engine.run(path_index, &mut x, |_, end, s, speed, x| {
        trajectory.switch_times.push(end);
        trajectory.directions.push(UnitDirection::new_unchecked(s.to_vec()));
        trajectory.speeds.push(speed);
        trajectory.positions.push(x.to_vec());
    });
    Ok(trajectory)
}

/// Options for [`simulate_ensemble_with`].
#[derive(Debug, Clone, Copy)]
pub struct EnsembleOptions {
    /// Worker threads; `None` uses the global rayon pool. Never affects results.
    pub workers: Option<usize>,
    pub full_trajectories: bool,
    pub segment_budget: usize,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        EnsembleOptions {
            workers: None,
            full_trajectories: false,
            segment_budget: DEFAULT_SEGMENT_BUDGET,
        }
    }
}

pub fn simulate_ensemble(config: &EvolutionConfig) -> Result<EndpointEnsemble> {
    simulate_ensemble_with(config, EnsembleOptions::default()).map(|(e, _)| e)
}

/// Simulates all paths, optionally keeping their trajectories.
pub fn simulate_ensemble_with(
    config: &EvolutionConfig,
    options: EnsembleOptions,
) -> Result<(EndpointEnsemble, Option<Vec<Trajectory>>)> {
    let engine = Engine::new(config)?;
    let job = || {
        if options.full_trajectories {
            run_with_trajectories(config, options.segment_budget)
        } else {
            Ok((run_endpoints(&engine), None))
        }
    };
    match options.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| RevolveError::Domain(format!("cannot build worker pool: {e}")))?
            .install(job),
        None => job(),
    }
}

fn run_endpoints(engine: &Engine<'_>) -> EndpointEnsemble {
    let config = engine.config;
    let n = config.dimension;
    let results: Vec<(Vec<f64>, u64)> = (0..config.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut x = vec![0.0; n];
            let count = engine.run(i, &mut x, |_, _, _, _, _| {});
            (x, count)
        })
        .collect();
    let mut points = Vec::with_capacity(config.n_paths * n);
    let mut switch_counts = Vec::with_capacity(config.n_paths);
    for (x, count) in results {
        points.extend_from_slice(&x);
        switch_counts.push(count);
    }
    EndpointEnsemble {
        dimension: n,
        t: config.horizon,
        points,
        switch_counts,
        fingerprint: config.fingerprint(),
    }
}

fn run_with_trajectories(
    config: &EvolutionConfig,
    budget: usize,
) -> Result<(EndpointEnsemble, Option<Vec<Trajectory>>)> {
    const CHUNK: usize = 256;
    let n = config.dimension;
    let mut trajectories: Vec<Trajectory> = Vec::with_capacity(config.n_paths);
    let mut segments = 0usize;
    let mut start = 0usize;
    while start < config.n_paths {
        let end = (start + CHUNK).min(config.n_paths);
        let chunk: Vec<Trajectory> = (start as u64..end as u64)
            .into_par_iter()
            .map(|i| simulate_path(config, i))
            .collect::<Result<_>>()?;
        for trajectory in chunk {
            segments += trajectory.directions.len();
            if segments > budget {
                return Err(RevolveError::ResourceExhausted {
                    completed: trajectories.len(),
                    requested: config.n_paths,
                    message: format!("trajectory storage exceeds {budget} segments"),
                });
            }
            trajectories.push(trajectory);
        }
        start = end;
    }
    let mut points = Vec::with_capacity(config.n_paths * n);
    let mut switch_counts = Vec::with_capacity(config.n_paths);
    for t in &trajectories {
        points.extend_from_slice(t.endpoint());
        switch_counts.push(t.switch_count() as u64);
    }
    let ensemble = EndpointEnsemble {
        dimension: n,
        t: config.horizon,
        points,
        switch_counts,
        fingerprint: config.fingerprint(),
    };
    Ok((ensemble, Some(trajectories)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{builtin_profile, BuiltinProfile, SpeedField};
    use crate::sphere::norm;
    use std::f64::consts::PI;

    fn msre(n: usize, eps: f64, paths: usize) -> EvolutionConfig {
        let p = builtin_profile(BuiltinProfile::MsreConst { c: 1.0 }, n).unwrap();
        EvolutionConfig::new(p, eps, 1.0, paths, 42)
    }

    #[test]
    fn switch_counts_are_near_the_poisson_mean() {
        let ensemble = simulate_ensemble(&msre(2, 0.1, 2000)).unwrap();
        let inside = ensemble
            .switch_counts
            .iter()
            .filter(|&&k| (70..=130).contains(&k))
            .count();
        // 99.7% nominal; allow binomial slack on 2000 paths
        assert!(inside as f64 >= 0.99 * 2000.0, "{inside}");
    }

    #[test]
    fn speed_bound_holds() {
        let config = msre(3, 0.1, 500);
        let ensemble = simulate_ensemble(&config).unwrap();
        for row in ensemble.rows() {
            assert!(norm(row) <= 10.0 * 1.0 + 1e-12);
        }
        let path = simulate_path(&config, 7).unwrap();
        for k in 0..path.directions.len() {
            let dt = path.switch_times[k + 1] - path.switch_times[k];
            let dx: Vec<f64> = path.positions[k + 1].iter().zip(&path.positions[k]).map(|(a, b)| a - b).collect();
            assert!(norm(&dx) <= 10.0 * dt * (1.0 + 1e-12));
        }
    }

    #[test]
    fn zero_profile_stays_put() {
        let p = VelocityProfile::continuous(2, "zero", SpeedField::Zero, SpeedField::Zero);
        let mut config = EvolutionConfig::new(p, 0.2, 1.0, 50, 1);
        config.x0 = vec![1.5, -2.0];
        let ensemble = simulate_ensemble(&config).unwrap();
        for row in ensemble.rows() {
            assert_eq!(row, &[1.5, -2.0]);
        }
    }

    #[test]
    fn paths_are_deterministic() {
        let config = msre(3, 0.2, 10);
        let a = simulate_path(&config, 3).unwrap();
        let b = simulate_path(&config, 3).unwrap();
        assert_eq!(a, b);
        let c = simulate_path(&config, 4).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn trajectory_is_consistent_with_endpoint() {
        let config = msre(3, 0.1, 20);
        let ensemble = simulate_ensemble(&config).unwrap();
        for i in 0..20 {
            let path = simulate_path(&config, i as u64).unwrap();
            assert_eq!(path.endpoint(), ensemble.point(i));
            assert_eq!(path.switch_count() as u64, ensemble.switch_counts[i]);
            assert_eq!(*path.switch_times.last().unwrap(), 1.0);
            assert!(path.switch_times.windows(2).all(|w| w[0] < w[1]));
            // ∫ v s dτ reassembled from the segments
            let mut x = config.x0.clone();
            for k in 0..path.directions.len() {
                let dt = path.switch_times[k + 1] - path.switch_times[k];
                for (xi, si) in x.iter_mut().zip(path.directions[k].components()) {
                    *xi += path.speeds[k] * dt * si;
                }
            }
            for (a, b) in x.iter().zip(path.endpoint()) {
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let config = msre(2, 0.1, 300);
        let one = simulate_ensemble_with(&config, EnsembleOptions { workers: Some(1), ..Default::default() }).unwrap();
        let four = simulate_ensemble_with(&config, EnsembleOptions { workers: Some(4), ..Default::default() }).unwrap();
        assert_eq!(one.0, four.0);
    }

    #[test]
    fn full_trajectories_match_endpoints_and_respect_budget() {
        let config = msre(2, 0.1, 40);
        let (plain, none) = simulate_ensemble_with(&config, EnsembleOptions::default()).unwrap();
        assert!(none.is_none());
        let options = EnsembleOptions { full_trajectories: true, ..Default::default() };
        let (full, trajectories) = simulate_ensemble_with(&config, options).unwrap();
        assert_eq!(plain, full);
        assert_eq!(trajectories.unwrap().len(), 40);

        let tight = EnsembleOptions { full_trajectories: true, segment_budget: 1000, ..Default::default() };
        match simulate_ensemble_with(&config, tight) {
            Err(RevolveError::ResourceExhausted { completed, requested, .. }) => {
                assert!(completed < 40 && completed > 0);
                assert_eq!(requested, 40);
            }
            other => panic!("expected exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn discrete_switching_uses_listed_directions() {
        let p = builtin_profile(BuiltinProfile::MsreConst { c: 1.0 }, 2).unwrap();
        let mut config = EvolutionConfig::new(p, 0.5, 1.0, 1, 9);
        config.switching = Switching::Discrete(
            (0..4)
                .map(|k| DiscreteDirection {
                    angles: AngleVector::new(vec![k as f64 * PI / 2.0]).unwrap(),
                    probability: 0.25,
                })
                .collect(),
        );
        let path = simulate_path(&config, 0).unwrap();
        for d in &path.directions {
            let s = d.components();
            assert!((s[0].abs() - 1.0).abs() < 1e-15 || (s[1].abs() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn fixed_initial_direction() {
        let mut config = msre(2, 0.5, 1);
        config.initial_direction = Some(AngleVector::new(vec![PI / 2.0]).unwrap());
        let path = simulate_path(&config, 0).unwrap();
        let s = path.directions[0].components();
        assert!(s[0].abs() < 1e-15 && (s[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn validation_names_fields() {
        let mut config = msre(2, 0.1, 10);
        config.epsilon = -0.1;
        assert!(matches!(config.validate(), Err(RevolveError::InvalidConfig { field, .. }) if field == "epsilon"));
        let mut config = msre(2, 0.1, 10);
        config.horizon = 0.0;
        assert!(matches!(config.validate(), Err(RevolveError::InvalidConfig { field, .. }) if field == "horizon"));
        let mut config = msre(2, 0.1, 10);
        config.switching = Switching::Discrete(vec![DiscreteDirection {
            angles: AngleVector::new(vec![0.0]).unwrap(),
            probability: 0.5,
        }]);
        assert!(matches!(config.validate(), Err(RevolveError::InvalidConfig { field, .. }) if field == "switching"));
        let mut config = msre(2, 0.1, 10);
        config.n_paths = 0;
        assert!(config.validate().is_err());
    }

    #[test]
    fn fingerprint_tracks_config() {
        let a = msre(2, 0.1, 10);
        let mut b = a.clone();
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.seed += 1;
        assert_ne!(a.fingerprint(), b.fingerprint());
    }
}
