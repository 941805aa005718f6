use std::f64::consts::{PI, TAU};
use std::sync::OnceLock;

use bo_core::energy::{catalog, g1_closed_form, g_value, CalibrationConfig, EnergySet};
use bo_core::flow::{evolve, FlowSpec};
use bo_core::fourier::{product, FourierField, Multiplier};
use bo_core::measure::density_f;
use bo_core::moments::exact_moment;
use num_complex::Complex64;
use proptest::prelude::*;

fn field(max_modes: usize) -> impl Strategy<Value = FourierField<f64>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..=max_modes)
        .prop_map(|v| FourierField::new(v.into_iter().map(|(re, im)| Complex64::new(re, im)).collect()))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn max_diff(u: &FourierField<f64>, v: &FourierField<f64>) -> f64 {
    let n = u.n_max().max(v.n_max());
    (1..=n as i64).map(|j| (u.coeff(j) - v.coeff(j)).norm()).fold(0.0, f64::max)
}

/// Trapezoid rule on `m` equispaced points, exact for trigonometric
/// polynomials of degree below `m`.
fn quadrature(m: usize, f: impl Fn(f64) -> f64) -> f64 {
    (0..m).map(|i| f(TAU * i as f64 / m as f64)).sum::<f64>() * TAU / m as f64
}

fn energies() -> &'static EnergySet {
    static SET: OnceLock<EnergySet> = OnceLock::new();
    SET.get_or_init(|| EnergySet::calibrate([0, 1, 2], &CalibrationConfig::default()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn hilbert_squared_is_minus_identity(u in field(12)) {
        let back = u.hilbert().hilbert().scale(&-1.0);
        prop_assert_eq!(back, u);
    }

    #[test]
    fn projections_split_identity(u in field(12), n in 0usize..14) {
        let low = u.apply(Multiplier::DirichletLow(n));
        let high = u.apply(Multiplier::DirichletHigh(n));
        prop_assert_eq!(low.add(&high), u.clone());
        prop_assert!(low.coeffs().iter().skip(n).all(|c| c.norm() == 0.0));
    }

    #[test]
    fn product_matches_pointwise(u in field(8), v in field(8), x in 0.0..TAU) {
        let uv = product(&u, &v);
        let vu = product(&v, &u);
        prop_assert!(max_diff(&uv.field, &vu.field) < 1e-14);
        let direct = u.eval(x) * v.eval(x);
        prop_assert!(close(uv.field.eval(x) + uv.mean, direct, 1e-12));
    }

    #[test]
    fn parseval(u in field(10)) {
        let m = 4 * u.n_max() + 4;
        let quad = quadrature(m, |x| u.eval(x).powi(2)) / TAU;
        prop_assert!(close(quad, u.l2_norm_sq(), 1e-12));
        prop_assert!(close(product(&u, &u).integrate(), TAU * u.l2_norm_sq(), 1e-12));
    }

    #[test]
    fn moment_symmetries(
        j in prop::collection::vec(-4i64..=4, 0..4),
        i in prop::collection::vec(-4i64..=4, 0..4),
        rot in 0usize..4,
    ) {
        let base = exact_moment(&j, &i);
        let mut jr = j.clone();
        if !jr.is_empty() {
            let r = rot % jr.len();
            jr.rotate_left(r);
        }
        prop_assert_eq!(exact_moment(&jr, &i), base);
        let neg = |v: &[i64]| v.iter().map(|x| -x).collect::<Vec<_>>();
        prop_assert_eq!(exact_moment(&neg(&j), &neg(&i)), base);
        // Conjugation swaps the two sides.
        prop_assert_eq!(exact_moment(&i, &j), base);
    }

    #[test]
    fn g1_is_quintic(u in field(6), c in -2.0..2.0f64) {
        let n = 3;
        let scaled = g1_closed_form(&u.scale(&c), n);
        let expect = c.powi(5) * g1_closed_form(&u, n);
        prop_assert!(close(scaled, expect, 1e-11));
    }

    #[test]
    fn derivative_matches_central_difference(u in field(5), v in field(5)) {
        let e = catalog::e1(TAU);
        let h = 1e-4;
        let fd = (e.value(&u.add(&v.scale(&h))) - e.value(&u.sub(&v.scale(&h)))) / (2.0 * h);
        let scale = 1.0 + e.value(&u).abs() + e.value(&v).abs();
        prop_assert!((fd - e.derivative(&u, &v)).abs() <= 1e-6 * scale);
    }

    #[test]
    fn closed_form_matches_chain_rule(u in field(10), n in 2usize..8) {
        let e = catalog::e1(TAU);
        let chain = g_value(&e, n, &u);
        let closed = g1_closed_form(&u, n);
        prop_assert!(close(chain, closed, 1e-10));
    }

    #[test]
    fn density_sees_only_low_modes(u in field(6), high in field(4), r in 1.0..20.0f64) {
        let n = 4;
        let base = u.project_low(n);
        let shifted = FourierField::new(
            base.resized(n).coeffs().iter().copied().chain(high.coeffs().iter().copied()).collect(),
        );
        let set = energies();
        let a = density_f(2, n, r, &base, set).unwrap();
        let b = density_f(2, n, r, &shifted, set).unwrap();
        prop_assert_eq!(a, b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn hamiltonian_conserved_along_flow(u in field(6)) {
        let u = u.scale(&0.5);
        let n = 8;
        let spec = FlowSpec::bo(n);
        let e = catalog::hamiltonian_template(1.0 / (6.0 * PI));
        let before = e.value(&u.resized(n));
        let after = e.value(&evolve(&spec, &u, 0.2).unwrap());
        prop_assert!((after - before).abs() <= 1e-8 * (1.0 + before.abs()));
    }

    #[test]
    fn flow_is_reversible(u in field(6)) {
        let u = u.scale(&0.5);
        let spec = FlowSpec::bo(8);
        let forward = evolve(&spec, &u, 0.2).unwrap();
        let back = evolve(&spec, &forward, -0.2).unwrap();
        prop_assert!(max_diff(&back, &u) < 1e-8);
    }
}
