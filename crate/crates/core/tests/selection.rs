use rayon::prelude::*;
use shapereg::additive::{select_alpha_additive, BackfitOptions};
use shapereg::decomp::{select_alpha, Shape};
use shapereg::rng::derive_seed;
use shapereg::simgen::{generate, ScenarioId, ScenarioSpec};
use shapereg::AlphaGrid;

#[test]
fn scenario1_prefers_penalties_above_the_lipschitz_constant() {
    let grid = AlphaGrid::scalar(&[0.1, 3.0, 6.0]).unwrap();
    let hits: usize = (0..200u64)
        .into_par_iter()
        .map(|rep| {
            let seed = derive_seed(17, &[rep]);
            let data = generate(&ScenarioSpec::new(ScenarioId::S1, 1000, seed)).unwrap();
            let m = select_alpha(&data, &grid, Shape::Monotone, seed, None).unwrap();
            usize::from(m.alpha()[0] >= 3.0)
        })
        .sum();
    assert!(hits >= 180, "alpha in {{3, 6}} in only {hits} of 200 runs");
}

#[test]
fn additive_scenario1_selects_componentwise_large_penalties() {
    let grid = AlphaGrid::default_grid();
    let hits: usize = (0..100u64)
        .into_par_iter()
        .map(|rep| {
            let seed = derive_seed(29, &[rep]);
            let data = generate(&ScenarioSpec::new(ScenarioId::A1_2d, 2000, seed)).unwrap();
            let m = select_alpha_additive(&data, &grid, seed, None, BackfitOptions::default()).unwrap();
            usize::from(m.alpha().iter().all(|a| *a >= 3.0))
        })
        .sum();
    assert!(hits > 50, "componentwise alpha >= 3 in only {hits} of 100 runs");
}

#[test]
fn default_validation_size_is_root_n() {
    let data = generate(&ScenarioSpec::new(ScenarioId::S1, 10_000, 3)).unwrap();
    let m = select_alpha(&data, &AlphaGrid::scalar(&[3.0]).unwrap(), Shape::Monotone, 3, None).unwrap();
    assert_eq!(m.split.validate.len(), 100);
    assert_eq!(m.split.train.len(), 9900);
}
