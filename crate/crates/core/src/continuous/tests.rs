use super::*;
use crate::discrete::Target;

fn ou_model() -> ContinuousModel {
    ContinuousModel::new(Kernel::exponential(2.0), Trend::constant(), 0.0, 1.0).unwrap()
}

fn matern_model() -> ContinuousModel {
    ContinuousModel::new(Kernel::matern32(2.0), Trend::constant(), 0.0, 1.0).unwrap()
}

fn point(t0: f64, p: u8) -> Target {
    Target::Point(Point::Line(t0), Pattern::order(p))
}

fn atoms(m: &SignedMeasure) -> Vec<(f64, f64)> {
    m.atoms().to_vec()
}

#[test]
fn ou_extrapolation() {
    let model = ou_model();
    let s = model.blup(2.0, 0).unwrap();
    let e2 = (-2.0f64).exp();
    let c_tilde = (1.0 - e2) / 2.0;
    let exact = 1.0 - (-4.0f64).exp() + c_tilde * (1.0 - e2);
    assert!((s.mse - exact).abs() < 1e-12, "{} vs {exact}", s.mse);
    assert!((s.rmse() - 1.164262).abs() < 1e-6);

    let q = &s.q_star.components()[0];
    let got = atoms(q);
    assert!((got[0].0 - 0.0).abs() < 1e-15 && (got[0].1 - c_tilde / 2.0).abs() < 1e-12);
    assert!((got[1].0 - 1.0).abs() < 1e-15 && (got[1].1 - (e2 + c_tilde / 2.0)).abs() < 1e-12);
    assert!((q.density_at(0.37) - c_tilde).abs() < 1e-12);
    assert!((s.information[(0, 0)] - 2.0).abs() < 1e-12);
}

#[test]
fn ou_target_falls_back_to_operator() {
    let model = ou_model();
    let t = markovian_zeta_t0(&model, 2.0).unwrap();
    assert_eq!(t.path, ZetaPath::Operator);
    assert!(t.closed_form_residual.unwrap() > RESIDUAL_TOL);
    assert!(t.residual <= RESIDUAL_TOL);
    let m = &t.measure.components()[0];
    assert!(m.atom_weight(0.0).abs() < 1e-14);
    assert!((m.atom_weight(1.0) - (-2.0f64).exp()).abs() < 1e-14);
    assert!(m.density_at(0.5).abs() < 1e-14);

    let t = markovian_zeta_t0(&model, -0.5).unwrap();
    assert_eq!(t.path, ZetaPath::Operator);
    assert!(t.closed_form_residual.is_none());
    assert!((t.measure.components()[0].atom_weight(0.0) - (-1.0f64).exp()).abs() < 1e-14);
}

#[test]
fn ou_interior_is_exact() {
    let model = ou_model();
    let s = model.blup(0.4, 0).unwrap();
    assert_eq!(s.path, ZetaPath::Interior);
    assert!(s.mse.abs() < 1e-14);
    assert_eq!(atoms(&s.q_star.components()[0]), vec![(0.4, 1.0)]);
}

#[test]
fn ou_trend_measure_matches_location_scale_form() {
    let (zeta, c) = markovian_zeta(&ou_model()).unwrap();
    let z = &zeta[0].components()[0];
    assert!((z.atom_weight(0.0) - 0.5).abs() < 1e-14);
    assert!((z.atom_weight(1.0) - 0.5).abs() < 1e-14);
    assert!((z.density_at(0.2) - 1.0).abs() < 1e-12);
    assert!((c[(0, 0)] - 2.0).abs() < 1e-12);
}

#[test]
fn brownian_location_scale() {
    for a in [0.0, 0.25] {
        let model = ContinuousModel::new(Kernel::BrownianMotion, Trend::constant(), a, 1.0).unwrap();
        let s = model.blup(2.0, 0).unwrap();
        assert!(s.c.amax() < 1e-14);
        assert_eq!(atoms(&s.q_star.components()[0]), vec![(1.0, 1.0)]);
        assert!((s.mse - 1.0).abs() < 1e-12);
        let m = model.mse_of_measure(&s.q_star, &point(2.0, 0)).unwrap();
        assert!((m - 1.0).abs() < 1e-12);
    }
    let model = ContinuousModel::new(Kernel::BrownianMotion, Trend::constant(), 0.0, 1.0).unwrap();
    assert!(model.trend_system().unwrap().degenerate);
}

#[test]
fn brownian_linear_trend() {
    let (a, b, t0) = (0.3, 1.0, 2.5);
    let model = ContinuousModel::new(Kernel::BrownianMotion, Trend::linear(), a, b).unwrap();
    let s = model.blup(t0, 0).unwrap();
    let q = &s.q_star.components()[0];
    assert!(q.atom_weight(a).abs() < 1e-12);
    assert!((q.atom_weight(b) - t0 / b).abs() < 1e-12);
    assert!(q.density_at(0.6).abs() < 1e-12);
    assert!((s.mse - t0 / b * (t0 - b)).abs() < 1e-12);
}

#[test]
fn brownian_quadratic_trend() {
    let (a, b, t0) = (0.4, 1.2, 2.0);
    let model = ContinuousModel::new(Kernel::BrownianMotion, Trend::quadratic(), a, b).unwrap();
    let s = model.blup(t0, 0).unwrap();
    let info = a.powi(3) + 4.0 / 3.0 * (b.powi(3) - a.powi(3));
    assert!((s.information[(0, 0)] - info).abs() < 1e-12);
    let c_tilde = (t0 * t0 - b * b) / info;
    let q = &s.q_star.components()[0];
    assert!((q.atom_weight(b) - (1.0 + 2.0 * b * c_tilde)).abs() < 1e-12);
    assert!((q.atom_weight(a) + a * c_tilde).abs() < 1e-12);
    assert!((q.density_at(0.9) + 2.0 * c_tilde).abs() < 1e-12);
    let exact = t0 - b + c_tilde * (t0 * t0 - b * b);
    assert!((s.mse - exact).abs() < 1e-12);
}

#[test]
fn markov_information_matches_tabulated_form() {
    // C = f(A)f(A)ᵀ / (v²(A) q(A)) + ∫ h' h'ᵀ / q' with h = f / v.
    let cases = [
        (Kernel::exponential(2.0), Trend::constant(), 0.0, 1.0),
        (Kernel::exponential(1.3), Trend::linear(), 0.2, 1.7),
        (Kernel::BrownianMotion, Trend::constant(), 0.5, 1.0),
        (Kernel::BrownianMotion, Trend::linear(), 0.5, 1.0),
        (Kernel::BrownianMotion, Trend::quadratic(), 0.5, 1.0),
        (Kernel::BrownianMotion, Trend::Monomials(vec![0, 1]), 0.5, 2.0),
    ];
    for (k, f, a, b) in cases {
        let m = k.as_markov().unwrap();
        let model = ContinuousModel::new(k, f.clone(), a, b).unwrap();
        let (_, c) = markovian_zeta(&model).unwrap();
        let fa = f.eval(a, 0);
        let va = m.v(a)[0];
        let mut oracle = &fa * fa.transpose() / (va * va * m.q(a)[0]);
        let rule = crate::numerics::composite_gauss_legendre(a, b, 16, 8).unwrap();
        for (t, w) in rule.points() {
            let [v, v1, _] = m.v(t);
            let h1 = (f.eval(t, 1) * v - f.eval(t, 0) * v1) / (v * v);
            oracle += &h1 * h1.transpose() * (w / m.q(t)[1]);
        }
        assert!((&c - &oracle).amax() < 1e-10, "{c} vs {oracle}");
    }
}

#[test]
fn custom_markov_kernel() {
    let k = Kernel::Markovian(MarkovFns::new(
        "u=1+t,v=exp(-t)",
        |t| [1.0 + t, 1.0, 0.0],
        |t| {
            let e = (-t).exp();
            [e, -e, e]
        },
    ));
    let model = ContinuousModel::new(k, Trend::linear(), 0.0, 1.0).unwrap();
    let system = model.trend_system().unwrap();
    assert!(system.residual <= RESIDUAL_TOL);
    let s = model.blup(1.8, 0).unwrap();
    let lemma = model.mse_of_measure(&s.q_star, &s.target).unwrap();
    assert!((lemma - s.mse).abs() < 1e-9);
}

#[test]
fn matern_extrapolation() {
    let model = matern_model();
    let s = matern32_blup(&model, 2.0, 0).unwrap();
    assert!((s.rmse() - 0.9985569896).abs() < 1e-9, "{}", s.rmse());
    assert_eq!(s.path, ZetaPath::ClosedForm);

    let lambda: f64 = 2.0;
    let e = (-lambda).exp();
    let z_b = 3.0 * e;
    let z1_b = e;
    let c = 1.0 + lambda / 4.0;
    let c0 = 1.0 - z_b;
    assert!((s.information[(0, 0)] - c).abs() < 1e-12);
    assert!((s.c[0] - c0).abs() < 1e-12);
    let values = &s.q_star.components()[0];
    let slopes = &s.q_star.components()[1];
    assert!((values.atom_weight(0.0) - 0.5 * c0 / c).abs() < 1e-12);
    assert!((values.atom_weight(1.0) - (0.5 * c0 / c + z_b)).abs() < 1e-12);
    assert!((values.density_at(0.3) - 0.25 * c0 * lambda / c).abs() < 1e-12);
    assert!((slopes.atom_weight(0.0) + 0.25 * c0 / (c * lambda)).abs() < 1e-12);
    assert!((slopes.atom_weight(1.0) - (z1_b + 0.25 * c0 / (c * lambda))).abs() < 1e-12);
    assert!(!slopes.has_density());
}

#[test]
fn matern_approaches_boundary() {
    let model = matern_model();
    let s = model.blup(1.0 + 1e-7, 0).unwrap();
    assert!(s.c[0].abs() < 1e-12);
    assert!(s.mse < 1e-12);
    let b = s.q_star.components()[0].atom_weight(1.0);
    assert!((b - 1.0).abs() < 1e-12);
}

#[test]
fn matern_mirror_and_derivative_targets() {
    let model = ContinuousModel::new(Kernel::matern32(1.5), Trend::linear(), 0.0, 1.0).unwrap();
    for (t0, p) in [(-0.7, 0), (1.6, 1), (-0.4, 1)] {
        let s = model.blup(t0, p).unwrap();
        assert_eq!(s.path, ZetaPath::Operator);
        assert!(s.target_residual <= RESIDUAL_TOL);
        let gap = model.unbiasedness_gap(&s.q_star, &s.target).unwrap();
        assert!(gap.amax() < 1e-10);
        let lemma = model.mse_of_measure(&s.q_star, &s.target).unwrap();
        assert!((lemma - s.mse).abs() < 1e-9, "{lemma} vs {}", s.mse);
    }
    // Symmetry: predicting at B + d and A - d gives the same MSE.
    let sym = ContinuousModel::new(Kernel::matern32(1.5), Trend::constant(), 0.0, 1.0).unwrap();
    let r = sym.blup(1.6, 0).unwrap().mse;
    let l = sym.blup(-0.6, 0).unwrap().mse;
    assert!((r - l).abs() < 1e-12);
}

#[test]
fn matern_information_tabulated_form() {
    // The tabulated information matrix agrees with the definition for a
    // constant trend; with f(t) = t it differs by a sign in the terms at B.
    let tabulated = |model: &ContinuousModel, lambda: f64| {
        let (a, b) = model.interval();
        let f = model.trend();
        let (fa, fb, da, db) = (f.eval(a, 0), f.eval(b, 0), f.eval(a, 1), f.eval(b, 1));
        let mut c = (&fa * fa.transpose() + &fb * fb.transpose()) * 0.5
            + (&da * da.transpose() + &db * db.transpose()) / (2.0 * lambda * lambda)
            - (&da * fa.transpose() + &fa * da.transpose() + &db * fb.transpose() + &fb * db.transpose())
                / (4.0 * lambda);
        let rule = crate::numerics::composite_gauss_legendre(a, b, 16, 8).unwrap();
        for (t, w) in rule.points() {
            let (f0, f1, f2) = (f.eval(t, 0), f.eval(t, 1), f.eval(t, 2));
            c += (&f0 * f0.transpose() * lambda.powi(4)
                + &f1 * f1.transpose() * (2.0 * lambda * lambda)
                + &f2 * f2.transpose())
                * (w / (4.0 * lambda.powi(3)));
        }
        c
    };
    let model = ContinuousModel::new(Kernel::matern32(2.0), Trend::constant(), 0.0, 1.0).unwrap();
    let c = model.trend_system().unwrap().information;
    assert!((c[(0, 0)] - tabulated(&model, 2.0)[(0, 0)]).abs() < 1e-12);

    let (a, b, l) = (0.2, 1.4, 1.7);
    let model = ContinuousModel::new(Kernel::matern32(l), Trend::Monomials(vec![1]), a, b).unwrap();
    let c = model.trend_system().unwrap().information[(0, 0)];
    let by_hand = (a * a + b * b) / 2.0 + (b - a) / l + 1.0 / (l * l) + l * (b.powi(3) - a.powi(3)) / 12.0;
    assert!((c - by_hand).abs() < 1e-12);
    let gap = tabulated(&model, l)[(0, 0)] - c;
    assert!((gap + b / l).abs() < 1e-12, "gap {gap}");
}

#[test]
fn matern_interior_derivative_weights_vanish() {
    let model = ContinuousModel::new(Kernel::matern32(2.0), Trend::linear(), 0.0, 1.0).unwrap();
    let s = model.blup(2.0, 0).unwrap();
    let slopes = &s.q_star.components()[1];
    assert!(!slopes.has_density());
    assert!(slopes.interior_atoms().next().is_none());
}

#[test]
fn ibm_location_scale() {
    let (a, b, t0) = (0.5, 1.0, 2.0);
    let model = ContinuousModel::new(Kernel::IntegratedBrownian, Trend::constant(), a, b).unwrap();
    let s = ibm_blup(&model, t0).unwrap();
    assert!(s.c.amax() < 1e-12);
    assert_eq!(s.path, ZetaPath::ClosedForm);
    assert_eq!(atoms(&s.q_star.components()[0]), vec![(b, 1.0)]);
    assert_eq!(atoms(&s.q_star.components()[1]), vec![(b, t0 - b)]);
    assert!((s.information[(0, 0)] - 12.0 / a.powi(3)).abs() < 1e-9);
    // Var(y(t0) - y(B) - (t0 - B) y'(B)) = (t0 - B)³ / 3.
    assert!((s.mse - (t0 - b).powi(3) / 3.0).abs() < 1e-12);
    let lemma = model.mse_of_measure(&s.q_star, &s.target).unwrap();
    assert!((lemma - s.mse).abs() < 1e-12);
    assert!((ibm_printed_mse(b, t0) + 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn ibm_requires_positive_start() {
    let err = ContinuousModel::new(Kernel::IntegratedBrownian, Trend::constant(), 0.0, 1.0)
        .unwrap()
        .blup(2.0, 0)
        .unwrap_err();
    assert!(matches!(err, Error::InvalidInterval { .. }));
}

#[test]
fn ibm_general_trend() {
    let model = ContinuousModel::new(Kernel::IntegratedBrownian, Trend::Monomials(vec![0, 1, 2]), 0.5, 1.5).unwrap();
    let system = model.trend_system().unwrap();
    assert!(system.residual <= RESIDUAL_TOL, "{}", system.residual);
    for t0 in [0.2, 2.5] {
        let s = model.blup(t0, 0).unwrap();
        let lemma = model.mse_of_measure(&s.q_star, &s.target).unwrap();
        assert!((lemma - s.mse).abs() < 1e-8 * s.mse.max(1.0), "{lemma} vs {}", s.mse);
    }
}

#[test]
fn average_single_atom_matches_point() {
    let model = ou_model();
    let p = model.blup(1.7, 0).unwrap();
    let a = model.blup_average(&[(1.7, 1.0)]).unwrap();
    assert!((p.mse - a.mse).abs() < 1e-12);
}

#[test]
fn average_agrees_with_generic_evaluator() {
    let model = ou_model();
    let nu = [(1.5, 0.5), (2.0, 0.5)];
    let s = continuous_blup_average(&model, &nu).unwrap();
    let lemma = mse_of_measure(&model, &s.q_star, &s.target).unwrap();
    assert!((lemma - s.mse).abs() < 1e-9, "{lemma} vs {}", s.mse);
}

#[test]
fn average_inside_interval_is_exact() {
    let model = ou_model();
    let s = model.blup_average(&[(0.2, 0.3), (0.9, 0.7)]).unwrap();
    assert!(s.mse.abs() < 1e-12);
    assert_eq!(atoms(&s.q_star.components()[0]), vec![(0.2, 0.3), (0.9, 0.7)]);
}

#[test]
fn generic_mse_rejects_biased_measures() {
    let model = ou_model();
    let q = VectorMeasure::scalar(SignedMeasure::dirac(0.0, 1.0, 4, 1.0, 0.5).unwrap());
    assert!(matches!(model.mse_of_measure(&q, &point(2.0, 0)), Err(Error::Biased(_))));
}

#[test]
fn perturbed_measures_are_worse() {
    let model = ou_model();
    let s = model.blup(2.0, 0).unwrap();
    let target = point(2.0, 0);
    let base = model.mse_of_measure(&s.q_star, &target).unwrap();
    // δ_0.3 - δ_0.8 annihilates the constant trend.
    let r = VectorMeasure::scalar(
        SignedMeasure::zero(0.0, 1.0, 4).unwrap().with_atom(0.3, 1.0).unwrap().with_atom(0.8, -1.0).unwrap(),
    );
    let smooth = VectorMeasure::scalar(
        SignedMeasure::zero(0.0, 1.0, 4)
            .unwrap()
            .with_density(1.0, |t| (std::f64::consts::TAU * t).cos()),
    );
    for dir in [r, smooth] {
        for eps in [-1e-1, -1e-2, 1e-2, 1e-1] {
            let q = s.q_star.axpy(eps, &dir).unwrap();
            assert!(model.mse_of_measure(&q, &target).unwrap() >= base - 1e-12);
        }
    }
}

#[test]
fn mse_paths_relation() {
    // The one-integral reduced-kernel expression omits the cᵀ D f(t0) term of
    // the full MSE; it coincides only when c = 0.
    let cases = [
        ou_model().blup(2.0, 0).unwrap(),
        matern_model().blup(2.0, 0).unwrap(),
        ContinuousModel::new(Kernel::IntegratedBrownian, Trend::constant(), 0.5, 1.0)
            .unwrap()
            .blup(2.0, 0)
            .unwrap(),
    ];
    let models = [
        ou_model(),
        matern_model(),
        ContinuousModel::new(Kernel::IntegratedBrownian, Trend::constant(), 0.5, 1.0).unwrap(),
    ];
    for (model, s) in models.iter().zip(&cases) {
        let reduced = model.mse_reduced_kernel(s).unwrap();
        let f0 = model.trend().eval(2.0, 0);
        let omitted = s.c.dot(&(&s.d * f0));
        assert!((reduced + omitted - s.mse).abs() < 1e-10, "{reduced} + {omitted} vs {}", s.mse);
    }
}

#[test]
fn invalid_models() {
    assert!(ContinuousModel::new(Kernel::exponential(1.0), Trend::constant(), 1.0, 1.0).is_err());
    assert!(ContinuousModel::new(Kernel::product(Kernel::exponential(1.0), Kernel::exponential(1.0)), Trend::constant(), 0.0, 1.0).is_err());
    let dup = Trend::Monomials(vec![1, 1]);
    assert!(matches!(
        ContinuousModel::new(Kernel::exponential(1.0), dup, 0.0, 1.0),
        Err(Error::InvalidTrend(_))
    ));
    assert!(ou_model().blup(2.0, 1).is_err());
}
