use catsim::hilbert::*;
use ndarray::{s, Array2};
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn block_max(m: &Array2<C64>, k: usize) -> f64 {
    m.slice(s![0..k, 0..k]).iter().fold(0.0, |a, z| a.max(z.norm()))
}

fn arb_amplitude() -> impl Strategy<Value = C64> {
    (0.05f64..2.5, -3.2f64..3.2).prop_map(|(r, th)| C64::from_polar(r, th))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bosonic_algebra_holds_below_the_top_level(n in 2usize..30) {
        let sig = SpaceSig::single(n).unwrap();
        let a = mode_operator(&sig, 0, ModeOp::Annihilation).unwrap();
        let ad = mode_operator(&sig, 0, ModeOp::Creation).unwrap();
        let p = mode_operator(&sig, 0, ModeOp::Parity).unwrap();
        let eye = Array2::<C64>::eye(n);
        let comm = a.commutator(&ad).unwrap().into_data() - &eye;
        prop_assert!(block_max(&comm, n - 1) < 1e-12);
        let anti = (&p * &a).into_data() + (&a * &p).into_data();
        prop_assert!(block_max(&anti, n - 1) < 1e-12);
    }

    #[test]
    fn operators_on_disjoint_modes_commute(d0 in 2usize..5, d1 in 2usize..5, d2 in 2usize..4) {
        let sig = SpaceSig::new(vec![d0, d1, d2]).unwrap();
        let kinds = [ModeOp::Annihilation, ModeOp::Creation, ModeOp::Number, ModeOp::Parity];
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            for k in kinds {
                let x = mode_operator(&sig, i, k).unwrap();
                let y = mode_operator(&sig, j, ModeOp::Annihilation).unwrap();
                prop_assert!(x.commutator(&y).unwrap().max_abs() == 0.0);
            }
        }
    }

    #[test]
    fn logical_states_are_orthonormal(alpha in arb_amplitude()) {
        let n = min_truncation(alpha.norm());
        let zero = cat_basis_state(n, alpha, CatKind::Zero).unwrap();
        let one = cat_basis_state(n, alpha, CatKind::One).unwrap();
        prop_assert!((zero.norm() - 1.0).abs() < 1e-12 && (one.norm() - 1.0).abs() < 1e-12);
        prop_assert!(zero.inner(&one).unwrap().norm() < 1e-12);
    }

    #[test]
    fn cats_have_definite_parity(alpha in arb_amplitude()) {
        let n = min_truncation(alpha.norm());
        let sig = SpaceSig::single(n).unwrap();
        let p = mode_operator(&sig, 0, ModeOp::Parity).unwrap();
        for (kind, want) in [(CatKind::Plus, 1.0), (CatKind::Minus, -1.0)] {
            let rho = cat_basis_state(n, alpha, kind).unwrap().to_density();
            prop_assert!((expectation(&rho, &p).unwrap() - C64::new(want, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn coherent_states_are_eigenstates_of_a(alpha in arb_amplitude()) {
        let n = min_truncation(alpha.norm());
        let sig = SpaceSig::single(n).unwrap();
        let rho = Ket::coherent(n, alpha).unwrap().to_density();
        let a = mode_operator(&sig, 0, ModeOp::Annihilation).unwrap();
        prop_assert!((expectation(&rho, &a).unwrap() - alpha).norm() < 1e-8);
    }

    #[test]
    fn displacement_is_unitary_on_low_levels(beta in arb_amplitude()) {
        // levels below 4 stay inside the space after displacement
        let n = min_truncation(beta.norm() + 2.0);
        let sig = SpaceSig::single(n).unwrap();
        let d = displacement(&sig, 0, beta).unwrap();
        let dd = (&d.dagger() * &d).into_data() - Array2::<C64>::eye(n);
        prop_assert!(block_max(&dd, 4) < 1e-8);
        let back = (&displacement(&sig, 0, -beta).unwrap() * &d).into_data() - Array2::<C64>::eye(n);
        prop_assert!(block_max(&back, 4) < 1e-8);
    }

    #[test]
    fn wire_format_round_trips(alpha in arb_amplitude(), d1 in 1usize..3) {
        let n = min_truncation(alpha.norm());
        let ket = cat_basis_state(n, alpha, CatKind::Zero).unwrap();
        let back: Ket = serde_json::from_str(&serde_json::to_string(&ket).unwrap()).unwrap();
        prop_assert_eq!(back.amplitudes(), ket.amplitudes());

        let sig = SpaceSig::new(vec![3, d1 + 1]).unwrap();
        let op = mode_operator(&sig, 1, ModeOp::Annihilation).unwrap().scale(alpha);
        let back: Operator = serde_json::from_str(&serde_json::to_string(&op).unwrap()).unwrap();
        prop_assert_eq!(back.data(), op.data());
        prop_assert_eq!(back.sig().dims(), op.sig().dims());

        let rho = ket.to_density();
        let back: DensityMatrix = serde_json::from_str(&serde_json::to_string(&rho).unwrap()).unwrap();
        prop_assert_eq!(back.data(), rho.data());
    }
}

#[test]
fn partial_trace_recovers_the_cat_of_a_product_state() {
    let n = min_truncation(1.5);
    let cat = cat_basis_state(n, C64::new(1.5, 0.0), CatKind::Plus).unwrap();
    let sig = SpaceSig::new(vec![3, 2]).unwrap();
    let rest = Ket::fock(&sig, &[1, 1]).unwrap();
    let joint = cat.tensor(&rest).to_density();
    let reduced = joint.partial_trace_keep(0).unwrap();
    let diff = reduced.data() - cat.to_density().data();
    assert!(diff.iter().all(|z| z.norm() < 1e-14));
}
