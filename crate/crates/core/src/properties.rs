//! Property tests for the operator algebra, the expansion and instance I/O.

use crate::agp::{self, AgpExpansion};
use crate::problems::{self, ProblemInstance};
use crate::{PauliLetter, PauliOperator, PauliString, C64};
use nalgebra::DMatrix;
use proptest::prelude::*;

const N: usize = 3;

fn letter() -> impl Strategy<Value = PauliLetter> {
    prop_oneof![
        Just(PauliLetter::I),
        Just(PauliLetter::X),
        Just(PauliLetter::Y),
        Just(PauliLetter::Z)
    ]
}

fn operator() -> impl Strategy<Value = PauliOperator> {
    prop::collection::vec(
        (prop::collection::vec(letter(), N), -1.0..1.0f64, -1.0..1.0f64),
        0..8,
    )
    .prop_map(|terms| {
        let terms = terms
            .into_iter()
            .map(|(letters, re, im)| (PauliString::from_letters(&letters), C64::new(re, im)));
        PauliOperator::from_terms(N, terms).unwrap()
    })
}

fn dense(op: &PauliOperator) -> DMatrix<C64> {
    op.to_dense().unwrap()
}

fn max_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn close(a: &PauliOperator, b: &PauliOperator, tol: f64) -> bool {
    a.sub(b).unwrap().terms().iter().all(|(_, c)| c.norm() <= tol)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn commutator_is_antisymmetric(a in operator(), b in operator()) {
        let ab = a.commutator(&b).unwrap();
        let ba = b.commutator(&a).unwrap();
        prop_assert!(close(&ab, &ba.scale(C64::new(-1.0, 0.0)), 1e-13));
    }

    #[test]
    fn jacobi_identity(a in operator(), b in operator(), c in operator()) {
        let t1 = a.commutator(&b.commutator(&c).unwrap()).unwrap();
        let t2 = b.commutator(&c.commutator(&a).unwrap()).unwrap();
        let t3 = c.commutator(&a.commutator(&b).unwrap()).unwrap();
        let sum = t1.add(&t2).unwrap().add(&t3).unwrap();
        prop_assert!(sum.terms().iter().all(|(_, z)| z.norm() <= 1e-12));
    }

    #[test]
    fn frobenius_matches_dense(a in operator()) {
        let d = dense(&a);
        let expected: f64 = d.iter().map(|z| z.norm_sqr()).sum();
        prop_assert!((a.frobenius_sq() - expected).abs() <= 1e-12 * expected.max(1.0));
    }

    #[test]
    fn dense_map_is_a_homomorphism(a in operator(), b in operator()) {
        let (da, db) = (dense(&a), dense(&b));
        prop_assert!(max_diff(&dense(&a.mul(&b).unwrap()), &(&da * &db)) <= 1e-12);
        let comm = &da * &db - &db * &da;
        prop_assert!(max_diff(&dense(&a.commutator(&b).unwrap()), &comm) <= 1e-12);
        prop_assert!(max_diff(&dense(&a.add(&b).unwrap()), &(&da + &db)) <= 1e-14);
    }

    #[test]
    fn lambda_polynomials_match_direct_nesting(seed in 0u64..500, lambda in 0.0..=1.0f64) {
        let inst = problems::build_random_qubo(N, seed).unwrap();
        let nested = agp::build_nested(&inst, 4).unwrap();
        let h = inst.h_ad(lambda);
        let mut direct = inst.delta_h();
        for poly in &nested {
            direct = h.commutator(&direct).unwrap();
            prop_assert!(close(&poly.evaluate(lambda), &direct, 1e-9 * (1.0 + direct.max_abs_coeff())));
        }
    }

    #[test]
    fn assembled_gauge_potential_is_hermitian_and_imaginary(seed in 0u64..500, lambda in 0.0..=1.0f64, l in 1usize..=3) {
        let inst = problems::build_random_qubo(N, seed).unwrap();
        let exp = AgpExpansion::new(&inst, l).unwrap();
        let sol = exp.solve_alphas(lambda).unwrap();
        prop_assert!(sol.alphas.iter().all(|a| a.is_finite()));
        let a = exp.assemble(lambda).unwrap();
        prop_assert!(a.is_hermitian(1e-12));
        let d = dense(&a);
        let scale = d.iter().map(|z| z.norm()).fold(1.0, f64::max);
        prop_assert!(d.iter().all(|z| z.re.abs() <= 1e-12 * scale));
    }

    #[test]
    fn variational_distance_is_nonincreasing(seed in 0u64..200, lambda in 0.05..0.95f64) {
        let inst = problems::build_random_qubo(N, seed).unwrap();
        let exact = agp::exact_agp_dense(&inst, lambda).unwrap().matrix;
        let exp = AgpExpansion::new(&inst, 3).unwrap();
        let mut last = f64::INFINITY;
        for l in 1..=3 {
            let alphas = exp.solve_alphas_at_order(l, lambda).unwrap().alphas;
            let approx = dense(&exp.assemble_with(lambda, &alphas).unwrap());
            let dist = (&approx - &exact).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            prop_assert!(dist <= last * (1.0 + 1e-9) + 1e-9, "l={l}: {dist} > {last}");
            last = dist;
        }
    }

    #[test]
    fn instance_text_round_trip(seed in 0u64..1000, family in 0usize..4) {
        let inst: ProblemInstance = match family {
            0 => problems::build_random_qubo(4, seed).unwrap(),
            1 => problems::build_random_4local(5, seed).unwrap(),
            2 => problems::maxcut_instance(6, problems::k33_edges(Some(&problems::seeded_unit_weights(9, seed))), seed).unwrap(),
            _ => problems::build_heisenberg(4, 1.0, 0.2, 0.1 + (seed % 7) as f64 * 0.1, seed).unwrap(),
        };
        let back = ProblemInstance::from_text(&inst.to_text()).unwrap();
        prop_assert_eq!(&back, &inst);
        prop_assert_eq!(back.to_text(), inst.to_text());
    }
}
