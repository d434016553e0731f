use std::sync::Arc;

use pairflow::cohomology::{basic_h2_dimension, find_basic_primitive, SpectralBasis};
use pairflow::gallery::builtin::builtin;
use pairflow::moser::{
    integrate_isotopy, moser_field, necessity_check, seed_points, verify_isotopy, IntegratorSettings, MoserProblem,
    PrimitiveSource, Verdict,
};
use pairflow::rank::{FoliationSpec, GeometricStructure};
use pairflow::sample::Sampling;
use pairflow::{CoframeModel, DifferentialForm};

fn settings(t_steps: usize) -> IntegratorSettings {
    IntegratorSettings {
        t_steps,
        ..Default::default()
    }
}

fn form(m: &Arc<CoframeModel>, degree: usize, comps: &[(&[usize], String)]) -> DifferentialForm {
    let c: Vec<(Vec<usize>, &str)> = comps.iter().map(|(i, s)| (i.to_vec(), s.as_str())).collect();
    DifferentialForm::parse(m, degree, &c).unwrap()
}

#[test]
fn supplied_and_spectral_primitives_both_give_isotopies() {
    let s = builtin("t4-exact").unwrap();
    let sampling = Sampling::new(&s.model.periods, 6, 2);
    let supplied = MoserProblem::new(s.structure.clone(), s.primitives.clone(), settings(200)).unwrap();
    let spectral = MoserProblem::with_spectral_primitives(s.structure.clone(), 4, settings(200), &sampling).unwrap();
    assert_eq!(supplied.source, PrimitiveSource::Supplied);
    assert_eq!(spectral.source, PrimitiveSource::Spectral);
    for c in spectral.check_primitives(&sampling).unwrap() {
        assert!(c.exactness <= 1e-10 && c.basic, "{c:?}");
    }
    let seeds = seed_points(&s.model, 12);
    for p in [&supplied, &spectral] {
        let rep = verify_isotopy(&integrate_isotopy(p, &seeds).unwrap(), p).unwrap();
        assert!(rep.pullback_error <= 1e-6, "{rep:?}");
        assert!(rep.foliation_error <= 1e-7);
    }
}

/// `α_t = cos(θ3 + t) dθ1 + sin(θ3 + t) dθ2`, `β = dθ4`: the Gray field is
/// `-∂_3` with no rescaling, so `θ3(t) = θ3(0) - t`.
#[test]
fn rotating_contact_pair_follows_the_exact_flow() {
    let m = Arc::new(CoframeModel::torus(4));
    let alpha = form(&m, 1, &[(&[1], "cos(th3 + t)".into()), (&[2], "sin(th3 + t)".into())]);
    let beta = DifferentialForm::basis(&m, &[3]);
    let s = GeometricStructure::ContactPair {
        alpha,
        beta,
        h: 1,
        k: 0,
    };
    let p = MoserProblem::new(s, Vec::new(), settings(100)).unwrap();
    let f = moser_field(&p, &[0.4, 1.1, 2.0, 3.3], 0.3).unwrap();
    let want = [0.0, 0.0, -1.0, 0.0];
    for (a, b) in f.field.iter().zip(want) {
        assert!((a - b).abs() <= 1e-13, "{:?}", f.field);
    }
    let seeds = seed_points(&m, 5);
    let res = integrate_isotopy(&p, &seeds).unwrap();
    for (s, seed) in seeds.iter().enumerate() {
        let end = res.trajectories[s].last().unwrap();
        assert!((end[2] - (seed[2] - 1.0)).abs() <= 1e-9);
        assert!((end[0] - seed[0]).abs() <= 1e-12);
    }
    let rep = verify_isotopy(&res, &p).unwrap();
    let (lo, hi) = rep.factor_range.unwrap();
    assert!((lo - 1.0).abs() <= 1e-9 && (hi - 1.0).abs() <= 1e-9);
}

#[test]
fn rescaled_contact_pair_has_nontrivial_factor() {
    let s = builtin("t4-contact-pair").unwrap();
    let p = MoserProblem::new(s.structure.clone(), Vec::new(), settings(200)).unwrap();
    let rep = verify_isotopy(&integrate_isotopy(&p, &seed_points(&s.model, 10)).unwrap(), &p).unwrap();
    let (lo, hi) = rep.factor_range.unwrap();
    assert!(hi - lo > 0.1);
    assert!(rep.proportionality_residual <= 1e-6 && rep.factor_mismatch <= 1e-6, "{rep:?}");
}

fn product_structure(m: &Arc<CoframeModel>, ta: &str, tb: &str) -> GeometricStructure {
    let alpha = form(
        m,
        1,
        &[
            (&[1], format!("(1 + 0.2*{ta}*cos(th1))*cos(th3 + {ta})")),
            (&[2], format!("(1 + 0.2*{ta}*cos(th1))*sin(th3 + {ta})")),
        ],
    );
    let beta = form(
        m,
        1,
        &[
            (&[4], format!("(1 + 0.2*{tb}*sin(th4))*cos(th6 + 2*{tb})")),
            (&[5], format!("(1 + 0.2*{tb}*sin(th4))*sin(th6 + 2*{tb})")),
        ],
    );
    GeometricStructure::ContactContactStructure { alpha, beta, h: 1 }
}

/// On a product the field splits into the fields obtained by moving one
/// factor at a time (the other frozen at the same instant).
#[test]
fn product_field_is_sum_of_factor_fields() {
    let m = Arc::new(CoframeModel::torus(6));
    let t0 = 0.4;
    let frozen = format!("{t0}");
    let both = MoserProblem::new(product_structure(&m, "t", "t"), Vec::new(), settings(10)).unwrap();
    let first = MoserProblem::new(product_structure(&m, "t", &frozen), Vec::new(), settings(10)).unwrap();
    let second = MoserProblem::new(product_structure(&m, &frozen, "t"), Vec::new(), settings(10)).unwrap();
    for p in seed_points(&m, 8) {
        let w = moser_field(&both, &p, t0).unwrap().field;
        let a = moser_field(&first, &p, t0).unwrap().field;
        let b = moser_field(&second, &p, t0).unwrap().field;
        for i in 0..6 {
            assert!((w[i] - a[i] - b[i]).abs() <= 1e-12, "{w:?} {a:?} {b:?}");
        }
        assert!(a[3..].iter().chain(&b[..3]).all(|x| x.abs() <= 1e-12));
    }
}

/// Basic forms for the horizontal foliation on the nilmanifold are
/// `f(y) e^2` and `h(y) e^2∧e^3`: `e^3` is not basic since
/// `L_{X_1} e^3 = -e^2`, and `d(f(y) e^2) = 0`. So no nonzero basic 2-form is
/// exact, the relative residual of any target is exactly 1, and
/// `dim H^2 = 2N + 1` at order `N`.
#[test]
fn ghys_family_is_obstructed_with_frozen_constant() {
    const C: f64 = 1.0;
    let s = builtin("ghys-nil").unwrap();
    let spec = FoliationSpec::FrameSpan(vec![0, 3]);
    let dot = s.form("omega").unwrap().t_derivative();
    for order in [4, 8] {
        let basis = SpectralBasis::new(&s.model, &spec, order).unwrap();
        let r = find_basic_primitive(&dot, &basis).unwrap();
        assert!(r.primitive.is_none());
        assert!(r.residual >= C - 1e-9, "{}", r.residual);
        assert_eq!(basic_h2_dimension(&basis).unwrap().dim, 2 * order + 1);
    }
    let sampling = Sampling::new(&s.model.periods, 6, 3);
    let nec = necessity_check(&s.structure, &sampling, 4).unwrap();
    assert_eq!(nec.verdict, Verdict::Fail);
    assert!(nec.min_residual.unwrap() >= C - 1e-9);
}

#[test]
fn exact_family_passes_necessity() {
    let s = builtin("t4-exact").unwrap();
    let nec = necessity_check(&s.structure, &Sampling::new(&s.model.periods, 6, 3), 4).unwrap();
    assert_eq!(nec.verdict, Verdict::Pass);
}
