use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};
use std::f64::consts::PI;
use tps_reliab::heatsim::{explicit_back_temperature, MaterialSample, ThermalScenario};
use tps_reliab::reliability::{
    make_target, reliability_fraction, standard_normal_quantile, verify_reliability, FdmPredictor, ParamPrior,
    PosteriorModel, PriorSpec, ReliabilityError,
};

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).unwrap()
}

#[test]
fn targets_for_the_design_levels() {
    assert_eq!(make_target(250.0, 0.5, 5.0).unwrap().mu_target, 250.0);
    assert!((make_target(250.0, 0.95, 5.0).unwrap().mu_target - 241.776).abs() < 1e-3);
    assert!((make_target(250.0, 0.99999, 5.0).unwrap().mu_target - 228.676).abs() < 1e-3);
    // against an independent inverse CDF
    for r in [0.95, 0.99, 0.99999] {
        let z = std_normal().inverse_cdf(r);
        assert!((standard_normal_quantile(r) - z).abs() < 1e-8, "{r}");
    }
}

#[test]
fn uniform_prior_inside_and_outside() {
    let prior = PriorSpec::default();
    let inside = prior.log_prior(&MaterialSample::new(0.6, 1.5e6));
    let volume = (1.3 - 0.1) * (2.4e6 - 0.8e6);
    assert!((inside + f64::ln(volume)).abs() < 1e-12);
    assert_eq!(prior.log_prior(&MaterialSample::new(0.5, 1.0e6)), inside);
    assert_eq!(prior.log_prior(&MaterialSample::new(1.2, 1.5e6)), f64::NEG_INFINITY);
    assert_eq!(prior.log_prior(&MaterialSample::new(0.6, 3.0e6)), f64::NEG_INFINITY);
    let uncapped = PriorSpec { k_max: None, ..prior };
    assert_eq!(uncapped.log_prior(&MaterialSample::new(1.2, 1.5e6)), inside);
}

#[test]
fn normal_prior_at_its_mean() {
    let prior = PriorSpec {
        k: ParamPrior::Normal { mean: 0.65, std: 0.1 },
        rho_cp: ParamPrior::Normal { mean: 1.6e6, std: 2e5 },
        k_max: None,
    };
    let expected = -(0.1 * (2.0 * PI).sqrt()).ln() - (2e5 * (2.0 * PI).sqrt()).ln();
    assert!((prior.log_prior(&MaterialSample::new(0.65, 1.6e6)) - expected).abs() < 1e-12);
}

#[test]
fn doubling_uniform_bounds_costs_log_two() {
    let narrow = PriorSpec {
        k: ParamPrior::Uniform { min: 0.2, max: 0.8 },
        rho_cp: ParamPrior::Uniform { min: 1e6, max: 2e6 },
        k_max: None,
    };
    let wide_k = PriorSpec { k: ParamPrior::Uniform { min: 0.2, max: 1.4 }, ..narrow };
    let wide_both = PriorSpec { rho_cp: ParamPrior::Uniform { min: 1e6, max: 3e6 }, ..wide_k };
    let m = MaterialSample::new(0.5, 1.5e6);
    let l2 = 2f64.ln();
    assert!((narrow.log_prior(&m) - wide_k.log_prior(&m) - l2).abs() < 1e-12);
    assert!((narrow.log_prior(&m) - wide_both.log_prior(&m) - 2.0 * l2).abs() < 1e-12);
}

#[test]
fn prior_draws_respect_the_cap() {
    let prior = PriorSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10_000 {
        let m = prior.sample(&mut rng);
        assert!(m.k <= 1.0 && m.k >= 0.1);
        assert!((0.8e6..=2.4e6).contains(&m.rho_cp));
    }
}

fn fdm_posterior(mu: f64) -> PosteriorModel<FdmPredictor> {
    let mut target = make_target(250.0, 0.95, 5.0).unwrap();
    target.mu_target = mu;
    PosteriorModel::new(target, PriorSpec::default(), FdmPredictor { scenario: ThermalScenario::default() })
}

#[test]
fn likelihood_examples() {
    let post = fdm_posterior(240.0);
    let peak = post.log_likelihood_of_temperature(240.0);
    assert!((peak + (5.0 * (2.0 * PI).sqrt()).ln()).abs() < 1e-12);
    let one = post.log_likelihood_of_temperature(245.0);
    let two = post.log_likelihood_of_temperature(230.0);
    assert!((one - two - 1.5).abs() < 1e-12);
}

#[test]
fn likelihood_peaks_at_the_validation_material() {
    let sc = ThermalScenario::default();
    let mat = MaterialSample::validation();
    let post = fdm_posterior(explicit_back_temperature(&sc, &mat).unwrap());
    let centre = post.log_likelihood(&mat).unwrap();
    assert!((centre + (5.0 * (2.0 * PI).sqrt()).ln()).abs() < 1e-9);
    for (dk, dc) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
        let n = MaterialSample::new(mat.k * (1.0 + 0.02 * dk), mat.rho_cp * (1.0 + 0.02 * dc));
        assert!(post.log_likelihood(&n).unwrap() < centre);
    }
}

#[test]
fn batch_likelihood_matches_single() {
    let post = fdm_posterior(230.0);
    let prior = PriorSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mats: Vec<MaterialSample> = (0..16).map(|_| prior.sample(&mut rng)).collect();
    let batch = post.log_likelihood_batch(&mats);
    for (m, b) in mats.iter().zip(batch) {
        let (a, b) = (post.log_likelihood(m).unwrap(), b.unwrap());
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }
}

#[test]
fn verify_reliability_examples() {
    let sc = ThermalScenario::default();
    let mat = MaterialSample::validation();
    let tb = explicit_back_temperature(&sc, &mat).unwrap();
    assert_eq!(verify_reliability(&[mat; 5], tb + 1.0, &sc).unwrap(), 1.0);
    assert_eq!(verify_reliability(&[mat; 5], tb - 1.0, &sc).unwrap(), 0.0);
    assert_eq!(verify_reliability(&[], 250.0, &sc), Err(ReliabilityError::EmptyBatch));
    assert_eq!(reliability_fraction(&[1.0, 2.0, 3.0, 4.0], 2.0), 0.5);
}

proptest! {
    #[test]
    fn quantile_round_trip(p in 1e-6f64..(1.0 - 1e-6)) {
        let z = standard_normal_quantile(p);
        prop_assert!((std_normal().cdf(z) - p).abs() <= 1e-8);
    }

    #[test]
    fn target_mean_decreases_with_reliability(a in 0.01f64..0.99, b in 0.01f64..0.99, tc in 100.0f64..400.0, s in 0.1f64..20.0) {
        prop_assume!(a < b);
        prop_assert!(make_target(tc, b, s).unwrap().mu_target < make_target(tc, a, s).unwrap().mu_target);
    }

    #[test]
    fn fraction_ignores_order(mut t in prop::collection::vec(200.0f64..300.0, 1..200), seed in any::<u64>(), tc in 200.0f64..300.0) {
        let f = reliability_fraction(&t, tc);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rand::seq::SliceRandom::shuffle(t.as_mut_slice(), &mut rng);
        prop_assert_eq!(f, reliability_fraction(&t, tc));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn verification_ignores_order(seed in any::<u64>()) {
        let sc = ThermalScenario { n_x: 30, ..Default::default() };
        let prior = PriorSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mats: Vec<MaterialSample> = (0..20).map(|_| prior.sample(&mut rng)).collect();
        let f = verify_reliability(&mats, 240.0, &sc).unwrap();
        mats.reverse();
        mats.rotate_left(7);
        prop_assert_eq!(f, verify_reliability(&mats, 240.0, &sc).unwrap());
    }
}
