mod common;

use common::*;
use pairflow::sample::{halton_points, Sampling};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-10;

fn check(model_index: usize, p: usize, q: usize, seed: u64) -> IdentityResiduals {
    let m = model(SHIPPED_MODELS[model_index]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = p.min(m.dim);
    let q = q.min(m.dim - p);
    let a = random_form(&m, p, &mut rng);
    let b = random_form(&m, q, &mut rng);
    let x = random_field(&m, &mut rng);
    let s = Sampling::with_points(halton_points(&m.periods, 64), vec![0.0, 0.7]);
    let mut r = identity_residuals(&a, &b, &x, &s);
    r.duality = duality_residual(&m, &s);
    r
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exterior_calculus_identities(model_index in 0usize..5, p in 0usize..4, q in 0usize..3, seed in any::<u64>()) {
        let r = check(model_index, p, q, seed);
        prop_assert!(r.max() <= TOL, "{r:?}");
    }
}

#[test]
fn lie_oracle_matches_hand_computation_on_heisenberg() {
    // L_{X_1} e^3 = i_{X_1}(-e^1∧e^2) = -e^2.
    let m = model("heisenberg-circle");
    let e3 = pairflow::DifferentialForm::basis(&m, &[2]);
    let x1 = pairflow::VectorFieldRep::frame(&m, 0);
    let want = pairflow::DifferentialForm::basis(&m, &[1]).scale(-1.0);
    assert_eq!(lie_by_evaluation(&e3, &x1), want);
    assert_eq!(e3.lie_derivative(&x1).unwrap(), want);
}

#[test]
fn duality_holds_on_every_shipped_model() {
    for name in SHIPPED_MODELS {
        let m = model(name);
        let s = Sampling::new(&m.periods, 9, 1);
        assert!(duality_residual(&m, &s) <= 1e-12, "{name}");
    }
}
