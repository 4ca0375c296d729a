mod common;

use std::collections::HashSet;
use std::sync::Mutex;

use common::*;
use flowgate_core::epso::{optimize, trace_csv, Enhancements, EpsoConfig, SearchSpace};
use proptest::prelude::*;

fn space(half: i64) -> SearchSpace {
    SearchSpace::new(vec![("a", -half, half), ("b", 0, 2 * half), ("c", -half, 0)]).unwrap()
}

fn bowl(center: [i64; 3]) -> impl Fn(&[i64]) -> flowgate_core::Result<f64> + Sync {
    move |p: &[i64]| {
        Ok(-p
            .iter()
            .zip(center)
            .map(|(x, c)| ((x - c) * (x - c)) as f64)
            .sum::<f64>())
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn trace_is_monotone_and_in_bounds(
        seed in any::<u64>(),
        particles in 2usize..12,
        iterations in 1usize..25,
        memoize in any::<bool>(),
        inertia_decay in any::<bool>(),
        velocity_clamp in any::<bool>(),
    ) {
        let s = space(6);
        let config = EpsoConfig {
            n_particles: particles,
            n_iterations: iterations,
            seed,
            enhancements: Enhancements { memoize, inertia_decay, velocity_clamp },
            ..EpsoConfig::default()
        };
        let out = optimize(&s, &config, &bowl([2, 9, -4])).unwrap();
        prop_assert_eq!(out.trace.len(), iterations);
        for (i, row) in out.trace.iter().enumerate() {
            prop_assert_eq!(row.iteration, i + 1);
            prop_assert!(s.contains(&row.gbest_position));
        }
        prop_assert!(out.trace.windows(2).all(|w| w[1].gbest_fitness >= w[0].gbest_fitness));
        prop_assert_eq!(out.best_fitness, out.trace.last().unwrap().gbest_fitness);
        let csv = trace_csv(&s, &out.trace).unwrap();
        prop_assert_eq!(csv.lines().count(), iterations + 1);
    }

    #[test]
    fn memoization_never_repeats_a_point(seed in any::<u64>()) {
        let seen = Mutex::new(HashSet::new());
        let calls = Mutex::new(0usize);
        let f = bowl([0, 3, -1]);
        let objective = |p: &[i64]| {
            *calls.lock().unwrap() += 1;
            assert!(seen.lock().unwrap().insert(p.to_vec()), "point {p:?} evaluated twice");
            f(p)
        };
        let config = EpsoConfig { n_particles: 10, n_iterations: 30, seed, ..EpsoConfig::default() };
        let out = optimize(&space(4), &config, &objective).unwrap();
        prop_assert_eq!(out.evaluations, *calls.lock().unwrap());
        prop_assert_eq!(out.evaluations + out.cache_hits, 10 * 31);
    }

    #[test]
    fn seed_point_is_a_floor(seed in any::<u64>(), a in -6i64..=6, b in 0i64..=12, c in -6i64..=0) {
        let f = bowl([5, 1, -6]);
        let config = EpsoConfig {
            n_particles: 4,
            n_iterations: 2,
            seed,
            seed_point: Some(vec![a, b, c]),
            ..EpsoConfig::default()
        };
        let out = optimize(&space(6), &config, &f).unwrap();
        prop_assert!(out.best_fitness >= f(&[a, b, c]).unwrap());
    }

    #[test]
    fn failures_score_negative_infinity_and_are_recorded(seed in any::<u64>()) {
        let objective = |p: &[i64]| {
            if p[0] < 0 {
                Err(flowgate_core::Error::InvalidParameter("left half is infeasible".into()))
            } else {
                Ok(-(p[0] as f64))
            }
        };
        let config = EpsoConfig { n_particles: 8, n_iterations: 10, seed, ..EpsoConfig::default() };
        let out = optimize(&space(5), &config, &objective).unwrap();
        prop_assert!(out.failures.iter().all(|f| f.point[0] < 0));
        if out.best_fitness.is_finite() {
            prop_assert!(out.best_position[0] >= 0);
        }
    }
}

#[test]
fn finds_the_brute_force_optimum_of_a_small_box() {
    let s = space(5);
    let mut r = rng(77);
    let mut misses = 0;
    for seed in 0..10u64 {
        use rand::Rng;
        let center = [r.random_range(-5..=5), r.random_range(0..=10), r.random_range(-5..=0)];
        let f = bowl(center);
        let mut best = (f64::NEG_INFINITY, vec![]);
        for a in -5..=5 {
            for b in 0..=10 {
                for c in -5..=0 {
                    let v = f(&[a, b, c]).unwrap();
                    if v > best.0 {
                        best = (v, vec![a, b, c]);
                    }
                }
            }
        }
        let config = EpsoConfig {
            n_iterations: 40,
            seed,
            ..EpsoConfig::default()
        };
        let out = optimize(&s, &config, &f).unwrap();
        if out.best_position != best.1 {
            misses += 1;
        }
    }
    assert!(misses <= 1, "{misses} of 10 seeds missed the optimum");
}

#[test]
fn same_seed_same_search() {
    let config = EpsoConfig {
        seed: 5,
        ..EpsoConfig::default()
    };
    let a = optimize(&space(8), &config, &sphere).unwrap();
    let b = optimize(&space(8), &config, &sphere).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.evaluations, b.evaluations);
}
