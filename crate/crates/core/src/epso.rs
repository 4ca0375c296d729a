//! Particle swarm search over integer hyperparameter boxes.
//!
//! Positions and velocities are real vectors; a particle is scored at its
//! position rounded to the nearest lattice point. The swarm maximizes.
//! Beyond canonical PSO it can memoize lattice evaluations, decay inertia
//! linearly, clamp velocities and seed one particle at a given point; each
//! of these can be switched off.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::dataset::ColumnarTable;
use crate::error::{Error, Result};
use crate::ingest::{stratified_split, SplitPair};
use crate::models::{fit_tree, Classifier, TreeHyperparams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Dim {
    pub name: String,
    pub lower: i64,
    pub upper: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SearchSpace {
    pub dims: Vec<Dim>,
}

impl SearchSpace {
    pub fn new(dims: Vec<(&str, i64, i64)>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidParameter("search space has no dimensions".into()));
        }
        let dims = dims
            .into_iter()
            .map(|(name, lower, upper)| {
                if lower > upper {
                    Err(Error::InvalidParameter(format!(
                        "dimension `{name}`: lower {lower} > upper {upper}"
                    )))
                } else {
                    Ok(Dim {
                        name: name.to_string(),
                        lower,
                        upper,
                    })
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self { dims })
    }

    /// max_depth, min_samples_split, min_samples_leaf.
    pub fn decision_tree() -> Self {
        Self::new(vec![
            ("max_depth", 1, 64),
            ("min_samples_split", 2, 50),
            ("min_samples_leaf", 1, 50),
        ])
        .expect("static bounds are valid")
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn names(&self) -> Vec<&str> {
        self.dims.iter().map(|d| d.name.as_str()).collect()
    }

    /// Number of lattice points in the box.
    pub fn n_points(&self) -> u128 {
        self.dims.iter().map(|d| (d.upper - d.lower) as u128 + 1).product()
    }

    pub fn contains(&self, point: &[i64]) -> bool {
        point.len() == self.dims.len() && point.iter().zip(&self.dims).all(|(&x, d)| d.lower <= x && x <= d.upper)
    }

    /// Nearest lattice point inside the box.
    pub fn lattice(&self, position: &[f64]) -> Vec<i64> {
        position
            .iter()
            .zip(&self.dims)
            .map(|(&x, d)| (x.round() as i64).clamp(d.lower, d.upper))
            .collect()
    }

    fn clamp(&self, position: &mut [f64]) {
        for (x, d) in position.iter_mut().zip(&self.dims) {
            *x = x.clamp(d.lower as f64, d.upper as f64);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct Enhancements {
    pub memoize: bool,
    pub inertia_decay: bool,
    pub velocity_clamp: bool,
}

impl Default for Enhancements {
    fn default() -> Self {
        Self {
            memoize: true,
            inertia_decay: true,
            velocity_clamp: true,
        }
    }
}

impl Enhancements {
    pub fn none() -> Self {
        Self {
            memoize: false,
            inertia_decay: false,
            velocity_clamp: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct EpsoConfig {
    pub n_particles: usize,
    pub n_iterations: usize,
    pub w_start: f64,
    pub w_end: f64,
    pub c1: f64,
    pub c2: f64,
    /// Per-dimension velocity limit as a fraction of `upper - lower`.
    pub v_max_fraction: f64,
    pub seed: u64,
    pub enhancements: Enhancements,
    /// Lattice point given to particle 0 instead of a random start.
    pub seed_point: Option<Vec<i64>>,
}

impl Default for EpsoConfig {
    fn default() -> Self {
        Self {
            n_particles: 20,
            n_iterations: 30,
            w_start: 0.9,
            w_end: 0.4,
            c1: 2.0,
            c2: 2.0,
            v_max_fraction: 0.2,
            seed: 42,
            enhancements: Enhancements::default(),
            seed_point: None,
        }
    }
}

impl EpsoConfig {
    pub fn validate(&self, space: &SearchSpace) -> Result<()> {
        if self.n_particles < 2 {
            return Err(Error::InvalidParameter("n_particles must be at least 2".into()));
        }
        let coefficients = [
            ("w_start", self.w_start),
            ("w_end", self.w_end),
            ("c1", self.c1),
            ("c2", self.c2),
            ("v_max_fraction", self.v_max_fraction),
        ];
        for (name, v) in coefficients {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(p) = &self.seed_point {
            if !space.contains(p) {
                return Err(Error::InvalidParameter(format!(
                    "seed point {p:?} lies outside the search box"
                )));
            }
        }
        Ok(())
    }

    /// Inertia for step `t` of `n_iterations` (0-based).
    pub fn inertia(&self, t: usize) -> f64 {
        if !self.enhancements.inertia_decay || self.n_iterations <= 1 {
            return self.w_start;
        }
        let frac = t as f64 / (self.n_iterations - 1) as f64;
        self.w_start - (self.w_start - self.w_end) * frac
    }
}

/// Fitness function over lattice points. Errors score as negative infinity.
pub trait Objective: Sync {
    fn evaluate(&self, point: &[i64]) -> Result<f64>;
}

impl<F> Objective for F
where
    F: Fn(&[i64]) -> Result<f64> + Sync,
{
    fn evaluate(&self, point: &[i64]) -> Result<f64> {
        self(point)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub pbest_position: Vec<i64>,
    pub pbest_fitness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub gbest_fitness: f64,
    pub gbest_position: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalFailure {
    pub point: Vec<i64>,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct SwarmState {
    pub space: SearchSpace,
    pub config: EpsoConfig,
    pub particles: Vec<Particle>,
    pub gbest_position: Vec<i64>,
    pub gbest_fitness: f64,
    pub iteration: usize,
    pub trace: Vec<TraceRow>,
    /// Objective invocations actually made.
    pub evaluations: usize,
    pub cache_hits: usize,
    pub failures: Vec<EvalFailure>,
    cache: HashMap<Vec<i64>, f64>,
    rng: ChaCha8Rng,
}

impl SwarmState {
    /// Assembles a state by hand, e.g. to study a single particle. The
    /// gbest is taken from the particles' pbests.
    pub fn from_particles(space: SearchSpace, config: EpsoConfig, particles: Vec<Particle>) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut s = SwarmState {
            gbest_position: particles.first().map(|p| p.pbest_position.clone()).unwrap_or_default(),
            gbest_fitness: f64::NEG_INFINITY,
            space,
            config,
            particles,
            iteration: 0,
            trace: Vec::new(),
            evaluations: 0,
            cache_hits: 0,
            failures: Vec::new(),
            cache: HashMap::new(),
            rng,
        };
        s.refresh_gbest();
        s
    }

    pub fn cached(&self, point: &[i64]) -> Option<f64> {
        self.cache.get(point).copied()
    }

    fn refresh_gbest(&mut self) {
        for p in &self.particles {
            if p.pbest_fitness > self.gbest_fitness {
                self.gbest_fitness = p.pbest_fitness;
                self.gbest_position = p.pbest_position.clone();
            }
        }
    }

    fn v_max(&self) -> Vec<f64> {
        self.space
            .dims
            .iter()
            .map(|d| self.config.v_max_fraction * (d.upper - d.lower) as f64)
            .collect()
    }

    /// Scores every particle's lattice point. Unique uncached points are
    /// evaluated in parallel; results are applied in particle order.
    fn evaluate_all<O: Objective + ?Sized>(&mut self, objective: &O) -> Vec<(Vec<i64>, f64)> {
        let points: Vec<Vec<i64>> = self.particles.iter().map(|p| self.space.lattice(&p.position)).collect();

        let memoize = self.config.enhancements.memoize;
        let mut pending: Vec<Vec<i64>> = Vec::new();
        if memoize {
            for pt in &points {
                if !self.cache.contains_key(pt) && !pending.contains(pt) {
                    pending.push(pt.clone());
                }
            }
        } else {
            pending = points.clone();
        }

        let results: Vec<Result<f64>> = pending.par_iter().map(|pt| objective.evaluate(pt)).collect();
        self.evaluations += pending.len();
        let mut fresh = Vec::with_capacity(pending.len());
        for (pt, r) in pending.into_iter().zip(results) {
            let f = match r {
                Ok(f) if !f.is_nan() => f,
                Ok(_) => {
                    self.failures.push(EvalFailure {
                        point: pt.clone(),
                        message: "objective returned NaN".into(),
                    });
                    f64::NEG_INFINITY
                }
                Err(e) => {
                    self.failures.push(EvalFailure {
                        point: pt.clone(),
                        message: e.to_string(),
                    });
                    f64::NEG_INFINITY
                }
            };
            fresh.push(f);
            if memoize {
                self.cache.insert(pt, f);
            }
        }

        if memoize {
            let hits = points.len() - fresh.len();
            self.cache_hits += hits;
            points
                .into_iter()
                .map(|pt| {
                    let f = self.cache[&pt];
                    (pt, f)
                })
                .collect()
        } else {
            points.into_iter().zip(fresh).collect()
        }
    }

    fn absorb(&mut self, scored: Vec<(Vec<i64>, f64)>) {
        for (p, (pt, f)) in self.particles.iter_mut().zip(scored) {
            if f > p.pbest_fitness {
                p.pbest_fitness = f;
                p.pbest_position = pt;
            }
        }
        self.refresh_gbest();
    }
}

/// Places the swarm and scores every particle once.
pub fn init_swarm<O: Objective + ?Sized>(
    space: &SearchSpace,
    config: &EpsoConfig,
    objective: &O,
) -> Result<SwarmState> {
    config.validate(space)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let v_max: Vec<f64> = space
        .dims
        .iter()
        .map(|d| config.v_max_fraction * (d.upper - d.lower) as f64)
        .collect();
    let particles = (0..config.n_particles)
        .map(|i| {
            let mut position: Vec<f64> = space
                .dims
                .iter()
                .map(|d| {
                    if d.lower == d.upper {
                        d.lower as f64
                    } else {
                        rng.random_range(d.lower as f64..=d.upper as f64)
                    }
                })
                .collect();
            let velocity: Vec<f64> = v_max
                .iter()
                .map(|&v| if v > 0.0 { rng.random_range(-v..=v) } else { 0.0 })
                .collect();
            if i == 0 {
                if let Some(seed) = &config.seed_point {
                    position = seed.iter().map(|&x| x as f64).collect();
                }
            }
            Particle {
                pbest_position: space.lattice(&position),
                position,
                velocity,
                pbest_fitness: f64::NEG_INFINITY,
            }
        })
        .collect();

    let mut state = SwarmState::from_particles(space.clone(), config.clone(), particles);
    state.rng = rng;
    let scored = state.evaluate_all(objective);
    state.absorb(scored);
    Ok(state)
}

/// One synchronous velocity/position update of every particle, followed by
/// scoring and pbest/gbest refresh.
pub fn step<O: Objective + ?Sized>(mut swarm: SwarmState, objective: &O) -> SwarmState {
    let w = swarm.config.inertia(swarm.iteration);
    let (c1, c2) = (swarm.config.c1, swarm.config.c2);
    let clamp_velocity = swarm.config.enhancements.velocity_clamp;
    let v_max = swarm.v_max();
    let gbest: Vec<f64> = swarm.gbest_position.iter().map(|&x| x as f64).collect();

    for i in 0..swarm.particles.len() {
        for j in 0..swarm.space.len() {
            let (r1, r2): (f64, f64) = (swarm.rng.random(), swarm.rng.random());
            let p = &mut swarm.particles[i];
            let x = p.position[j];
            let mut v = w * p.velocity[j] + c1 * r1 * (p.pbest_position[j] as f64 - x) + c2 * r2 * (gbest[j] - x);
            if clamp_velocity {
                v = v.clamp(-v_max[j], v_max[j]);
            }
            p.velocity[j] = v;
            p.position[j] = x + v;
        }
        let p = &mut swarm.particles[i];
        swarm.space.clamp(&mut p.position);
    }

    let scored = swarm.evaluate_all(objective);
    swarm.absorb(scored);
    swarm.iteration += 1;
    swarm.trace.push(TraceRow {
        iteration: swarm.iteration,
        gbest_fitness: swarm.gbest_fitness,
        gbest_position: swarm.gbest_position.clone(),
    });
    swarm
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsoResult {
    pub best_position: Vec<i64>,
    pub best_fitness: f64,
    /// One row per iteration, iterations numbered from 1.
    pub trace: Vec<TraceRow>,
    pub evaluations: usize,
    pub cache_hits: usize,
    pub failures: Vec<EvalFailure>,
}

pub fn optimize<O: Objective + ?Sized>(space: &SearchSpace, config: &EpsoConfig, objective: &O) -> Result<EpsoResult> {
    let mut swarm = init_swarm(space, config, objective)?;
    for _ in 0..config.n_iterations {
        swarm = step(swarm, objective);
    }
    Ok(EpsoResult {
        best_position: swarm.gbest_position,
        best_fitness: swarm.gbest_fitness,
        trace: swarm.trace,
        evaluations: swarm.evaluations,
        cache_hits: swarm.cache_hits,
        failures: swarm.failures,
    })
}

/// Trace as CSV: `iteration,gbest_fitness,<dim names...>`.
pub fn trace_csv(space: &SearchSpace, trace: &[TraceRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["iteration".to_string(), "gbest_fitness".to_string()];
    header.extend(space.dims.iter().map(|d| d.name.clone()));
    w.write_record(&header)?;
    for row in trace {
        let mut rec = vec![row.iteration.to_string(), format!("{:.9}", row.gbest_fitness)];
        rec.extend(row.gbest_position.iter().map(|x| x.to_string()));
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io("<trace csv>", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Point in the decision-tree box equivalent to default tree parameters
/// for any tree no deeper than 64.
pub const DT_DEFAULT_POINT: [i64; 3] = [64, 2, 1];

/// Tree parameters for a lattice point of [`SearchSpace::decision_tree`].
pub fn dt_params(point: &[i64], seed: u64) -> Result<TreeHyperparams> {
    let [depth, split, leaf] = point else {
        return Err(Error::InvalidParameter(format!(
            "decision-tree point needs 3 coordinates, got {}",
            point.len()
        )));
    };
    let params = TreeHyperparams {
        max_depth: Some(usize::try_from(*depth).unwrap_or(0)),
        min_samples_split: usize::try_from(*split).unwrap_or(0),
        min_samples_leaf: usize::try_from(*leaf).unwrap_or(0),
        seed,
        ..TreeHyperparams::default()
    };
    params.validate()?;
    Ok(params)
}

/// Holdout accuracy of a decision tree, the tuning fitness.
#[derive(Debug, Clone)]
pub struct DtObjective {
    pub fit: ColumnarTable,
    pub holdout: ColumnarTable,
    pub seed: u64,
}

impl DtObjective {
    pub fn fitness(&self, params: &TreeHyperparams) -> Result<f64> {
        let model = fit_tree(&self.fit, params)?;
        let pred = model.predict(&self.holdout)?;
        let correct = pred.iter().zip(self.holdout.labels()).filter(|(p, y)| p == y).count();
        Ok(correct as f64 / self.holdout.n_rows() as f64)
    }
}

impl Objective for DtObjective {
    fn evaluate(&self, point: &[i64]) -> Result<f64> {
        self.fitness(&dt_params(point, self.seed)?)
    }
}

/// Carves a seeded stratified holdout out of the training split. The test
/// split is not used.
pub fn dt_objective(split: &SplitPair, holdout_fraction: f64, seed: u64) -> Result<DtObjective> {
    if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "holdout_fraction must be in (0, 1), got {holdout_fraction}"
        )));
    }
    let inner = stratified_split(&split.train, 1.0 - holdout_fraction, seed)?;
    let mut held = vec![0u64; inner.test.n_classes()];
    for &y in inner.test.labels() {
        held[y as usize] += 1;
    }
    let mut present = vec![false; held.len()];
    for &y in split.train.labels() {
        present[y as usize] = true;
    }
    for (c, (&n, &p)) in held.iter().zip(&present).enumerate() {
        if p && n == 0 {
            return Err(Error::EmptyHoldoutClass(split.train.class_names()[c].clone()));
        }
    }
    Ok(DtObjective {
        fit: inner.train,
        holdout: inner.test,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(p: &[i64]) -> Result<f64> {
        Ok(-p.iter().map(|&x| (x * x) as f64).sum::<f64>())
    }

    fn cube() -> SearchSpace {
        SearchSpace::new(vec![("a", -10, 10), ("b", -10, 10), ("c", -10, 10)]).unwrap()
    }

    #[test]
    fn sphere_reaches_origin() {
        let config = EpsoConfig {
            n_iterations: 50,
            seed: 3,
            ..Default::default()
        };
        let r = optimize(&cube(), &config, &sphere).unwrap();
        assert_eq!(r.best_position, vec![0, 0, 0]);
        assert_eq!(r.best_fitness, 0.0);
        assert_eq!(r.trace.len(), 50);
        assert!(r.trace.windows(2).all(|w| w[0].gbest_fitness <= w[1].gbest_fitness));
    }

    #[test]
    fn init_is_deterministic_and_in_bounds() {
        let space = SearchSpace::new(vec![("a", 0, 10), ("b", 0, 10), ("c", 0, 10)]).unwrap();
        let config = EpsoConfig::default();
        let a = init_swarm(&space, &config, &sphere).unwrap();
        let b = init_swarm(&space, &config, &sphere).unwrap();
        assert_eq!(a.particles, b.particles);
        for p in &a.particles {
            assert!(p.position.iter().all(|&x| (0.0..=10.0).contains(&x)));
            assert!(space.contains(&p.pbest_position));
        }
    }

    #[test]
    fn degenerate_box_is_constant() {
        let space = SearchSpace::new(vec![("a", 4, 4), ("b", -2, -2)]).unwrap();
        let r = optimize(&space, &EpsoConfig::default(), &sphere).unwrap();
        assert_eq!(r.best_position, vec![4, -2]);
        assert_eq!(r.best_fitness, -20.0);
        assert_eq!(r.evaluations, 1);
    }

    #[test]
    fn single_particle_at_optimum_stays() {
        let space = cube();
        let config = EpsoConfig {
            n_particles: 1,
            ..Default::default()
        };
        let p = Particle {
            position: vec![0.0; 3],
            velocity: vec![0.0; 3],
            pbest_position: vec![0; 3],
            pbest_fitness: 0.0,
        };
        let mut s = SwarmState::from_particles(space, config, vec![p]);
        assert_eq!(s.gbest_position, vec![0, 0, 0]);
        for _ in 0..5 {
            s = step(s, &sphere);
            assert_eq!(s.particles[0].position, vec![0.0; 3]);
        }
        assert_eq!(s.gbest_fitness, 0.0);
    }

    #[test]
    fn constant_objective_gives_flat_trace() {
        let r = optimize(&cube(), &EpsoConfig::default(), &|_: &[i64]| Ok(0.25)).unwrap();
        assert_eq!(r.best_fitness, 0.25);
        assert!(r.trace.iter().all(|t| t.gbest_fitness == 0.25));
    }

    #[test]
    fn failures_score_negative_infinity() {
        let obj = |p: &[i64]| {
            if p[0] > 0 {
                Err(Error::InvalidParameter("boom".into()))
            } else {
                Ok(1.0)
            }
        };
        let r = optimize(&cube(), &EpsoConfig::default(), &obj).unwrap();
        assert_eq!(r.best_fitness, 1.0);
        assert!(r.best_position[0] <= 0);
        assert!(!r.failures.is_empty());
    }

    #[test]
    fn memo_cache_avoids_repeat_calls() {
        use std::sync::atomic::{AtomicUsize, Ordering};
        let calls = AtomicUsize::new(0);
        let obj = |p: &[i64]| {
            calls.fetch_add(1, Ordering::SeqCst);
            sphere(p)
        };
        let space = SearchSpace::new(vec![("a", 0, 3)]).unwrap();
        let r = optimize(&space, &EpsoConfig::default(), &obj).unwrap();
        assert!(r.evaluations <= 4);
        assert_eq!(calls.load(Ordering::SeqCst), r.evaluations);
        assert!(r.cache_hits > 0);
    }

    #[test]
    fn seed_point_is_evaluated_first() {
        let config = EpsoConfig {
            seed_point: Some(vec![0, 0, 0]),
            n_iterations: 1,
            ..Default::default()
        };
        let s = init_swarm(&cube(), &config, &sphere).unwrap();
        assert_eq!(s.particles[0].pbest_position, vec![0, 0, 0]);
        assert_eq!(s.gbest_fitness, 0.0);
    }

    #[test]
    fn config_validation() {
        let space = cube();
        for c in [
            EpsoConfig {
                n_particles: 1,
                ..Default::default()
            },
            EpsoConfig {
                c1: 0.0,
                ..Default::default()
            },
            EpsoConfig {
                seed_point: Some(vec![11, 0, 0]),
                ..Default::default()
            },
        ] {
            assert!(c.validate(&space).is_err());
        }
        assert!(SearchSpace::new(vec![("a", 2, 1)]).is_err());
    }

    #[test]
    fn inertia_decays_linearly() {
        let c = EpsoConfig {
            n_iterations: 11,
            ..Default::default()
        };
        assert_eq!(c.inertia(0), 0.9);
        assert!((c.inertia(10) - 0.4).abs() < 1e-15);
        assert!((c.inertia(5) - 0.65).abs() < 1e-15);
        let flat = EpsoConfig {
            enhancements: Enhancements::none(),
            ..c
        };
        assert_eq!(flat.inertia(10), 0.9);
    }

    #[test]
    fn trace_csv_layout() {
        let space = SearchSpace::decision_tree();
        let csv = trace_csv(
            &space,
            &[TraceRow {
                iteration: 1,
                gbest_fitness: 0.5,
                gbest_position: vec![31, 7, 1],
            }],
        )
        .unwrap();
        assert_eq!(
            csv,
            "iteration,gbest_fitness,max_depth,min_samples_split,min_samples_leaf\n1,0.500000000,31,7,1\n"
        );
    }

    #[test]
    fn dt_params_mapping() {
        let p = dt_params(&DT_DEFAULT_POINT, 1).unwrap();
        assert_eq!(p.max_depth, Some(64));
        assert_eq!((p.min_samples_split, p.min_samples_leaf), (2, 1));
        assert!(dt_params(&[0, 2, 1], 1).is_err());
        assert!(dt_params(&[1, 2], 1).is_err());
    }
}
