use catsim::hilbert::{
    cat_basis_state, expectation, mode_operator, CatKind, DensityMatrix, Ket, ModeOp, Operator, SpaceSig,
};
use catsim::lindblad::{
    evolve, liouvillian_apply, relax_to_steady, steady_state, EvolutionSpec, Liouvillian, Tolerances,
    DIRECT_STEADY_MAX_DIM,
};
use catsim::Error;
use ndarray::Array2;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn destroy(n: usize) -> Operator {
    mode_operator(&SpaceSig::single(n).unwrap(), 0, ModeOp::Annihilation).unwrap()
}

fn two_photon_loss(n: usize, kappa2: f64, alpha_sq: f64) -> Operator {
    let a = destroy(n);
    let a2 = &a * &a;
    (&a2 - &Operator::identity(a.sig()).scale(c(alpha_sq))).scale(c(kappa2.sqrt()))
}

/// Straight transcription of −i[H,ρ] + Σ (LρL† − ½{L†L, ρ}) with dense products.
fn dense_lindblad(h: &Array2<C64>, ls: &[Array2<C64>], rho: &Array2<C64>) -> Array2<C64> {
    let i = C64::new(0.0, 1.0);
    let mut out = (h.dot(rho) - rho.dot(h)) * (-i);
    for l in ls {
        let ld = l.t().mapv(|z| z.conj());
        let ldl = ld.dot(l);
        out = out + l.dot(rho).dot(&ld) - (ldl.dot(rho) + rho.dot(&ldl)) * c(0.5);
    }
    out
}

fn max_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[test]
fn coherent_state_is_dark_for_two_photon_loss() {
    // the a² eigenrelation fails only at the top two levels, which N = 40 leaves empty
    let n = 40;
    let rho = Ket::coherent(n, c(2.0)).unwrap().to_density();
    let h = Operator::zeros(rho.sig());
    let d = liouvillian_apply(&h, &[two_photon_loss(n, 1.0, 4.0)], &rho).unwrap();
    assert!(d.iter().all(|z| z.norm() < 1e-10));
}

#[test]
fn single_photon_decay_rate() {
    let n = 5;
    let kappa: f64 = 0.7;
    let s = SpaceSig::single(n).unwrap();
    let rho = Ket::fock(&s, &[1]).unwrap().to_density();
    let d = liouvillian_apply(&Operator::zeros(&s), &[destroy(n).scale(c(kappa.sqrt()))], &rho).unwrap();
    let num = mode_operator(&s, 0, ModeOp::Number).unwrap();
    let dn: C64 = d.dot(num.data()).diag().sum();
    assert!((dn - c(-kappa)).norm() < 1e-14);
}

#[test]
fn rejects_mismatched_and_non_hermitian_inputs() {
    let rho = DensityMatrix::maximally_mixed(&SpaceSig::single(3).unwrap());
    let h = Operator::zeros(&SpaceSig::single(4).unwrap());
    assert!(matches!(liouvillian_apply(&h, &[], &rho), Err(Error::SigMismatch { .. })));
    let a = destroy(3);
    assert!(matches!(Liouvillian::new(&a, &[]), Err(Error::NotHermitian(_))));
}

fn arb_c64() -> impl Strategy<Value = C64> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(r, i)| C64::new(r, i))
}

fn arb_matrix(n: usize) -> impl Strategy<Value = Array2<C64>> {
    proptest::collection::vec(arb_c64(), n * n).prop_map(move |v| Array2::from_shape_vec((n, n), v).unwrap())
}

fn random_density(g: &Array2<C64>) -> Array2<C64> {
    let gd = g.t().mapv(|z| z.conj());
    let m = g.dot(&gd) + Array2::from_diag_elem(g.nrows(), c(1e-3));
    let tr = m.diag().sum();
    m / tr
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sparse_generator_matches_dense_and_preserves_trace(
        hraw in arb_matrix(6), l1 in arb_matrix(6), l2 in arb_matrix(6), g in arb_matrix(6)
    ) {
        let s = SpaceSig::new(vec![3, 2]).unwrap();
        let hd = (&hraw + &hraw.t().mapv(|z| z.conj())) * c(0.5);
        let h = Operator::hermitian(s.clone(), hd.clone()).unwrap();
        let ls = vec![
            Operator::from_matrix(s.clone(), l1.clone()).unwrap(),
            Operator::from_matrix(s.clone(), l2.clone()).unwrap(),
        ];
        let rm = random_density(&g);
        let rho = DensityMatrix::from_matrix(s, rm.clone()).unwrap();
        let got = liouvillian_apply(&h, &ls, &rho).unwrap();
        let want = dense_lindblad(&hd, &[l1, l2], &rm);
        prop_assert!(max_diff(&got, &want) < 1e-12);
        let tr: C64 = got.diag().sum();
        let scale = rm.iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(tr.norm() < 1e-12 * scale.max(1.0) * 10.0);
    }
}

#[test]
fn photon_number_decays_exponentially() {
    let n = 6;
    let s = SpaceSig::single(n).unwrap();
    let grid: Vec<f64> = (0..=50).map(|k| k as f64 * 0.1).collect();
    let spec = EvolutionSpec::new(Operator::zeros(&s), vec![destroy(n)], grid)
        .observe("n", mode_operator(&s, 0, ModeOp::Number).unwrap());
    let ts = evolve(&spec, &Ket::fock(&s, &[1]).unwrap().to_density()).unwrap();
    for (t, v) in ts.times.iter().zip(ts.column("n").unwrap()) {
        assert!((v.re - (-t).exp()).abs() < 1e-6, "t = {t}: {}", v.re);
    }
    assert_eq!(ts.times.len(), 51);
    assert_eq!(*ts.times.last().unwrap(), 5.0);
}

#[test]
fn pure_two_photon_loss_conserves_parity() {
    for alpha_sq in [1.0f64, 2.0, 4.0] {
        let alpha = alpha_sq.sqrt();
        let n = 36;
        let s = SpaceSig::single(n).unwrap();
        let kappa2 = 1.0;
        let t_end = 10.0 / (2.0 * alpha_sq * kappa2);
        let grid: Vec<f64> = (0..=20).map(|k| k as f64 * t_end / 20.0).collect();
        let parity = mode_operator(&s, 0, ModeOp::Parity).unwrap();
        let spec = EvolutionSpec::new(Operator::zeros(&s), vec![two_photon_loss(n, kappa2, alpha_sq)], grid)
            .observe("P", parity);
        let starts = [
            Ket::fock(&s, &[0]).unwrap().to_density(),
            cat_basis_state(n, c(alpha), CatKind::Plus).unwrap().to_density(),
            cat_basis_state(n, c(alpha), CatKind::Minus).unwrap().to_density(),
            Ket::coherent(n, c(alpha)).unwrap().to_density(),
        ];
        for rho0 in &starts {
            let ts = evolve(&spec, rho0).unwrap();
            let p = ts.column("P").unwrap();
            for v in p {
                assert!((v - p[0]).norm() < 1e-6, "alpha^2 = {alpha_sq}: {v} vs {}", p[0]);
            }
            assert!(ts.stats.max_trace_drift < 1e-6);
            assert!(ts.stats.max_hermitian_deviation < 1e-8);
            assert!(ts.stats.min_eigenvalue > -1e-6);
        }
    }
}

/// Classic fixed-step RK4 on the dense generator.
fn rk4_oracle(h: &Array2<C64>, ls: &[Array2<C64>], rho0: &Array2<C64>, t: f64, steps: usize) -> Array2<C64> {
    let dt = t / steps as f64;
    let mut rho = rho0.clone();
    for _ in 0..steps {
        let k1 = dense_lindblad(h, ls, &rho);
        let k2 = dense_lindblad(h, ls, &(&rho + &(&k1 * c(dt / 2.0))));
        let k3 = dense_lindblad(h, ls, &(&rho + &(&k2 * c(dt / 2.0))));
        let k4 = dense_lindblad(h, ls, &(&rho + &(&k3 * c(dt))));
        rho = rho + (k1 + k2 * c(2.0) + k3 * c(2.0) + k4) * c(dt / 6.0);
    }
    rho
}

#[test]
fn vacuum_relaxes_into_even_cat() {
    let n = 30;
    let alpha_sq = 2.0;
    let kappa2 = 1.0;
    let kappa_c = 2.0 * alpha_sq * kappa2;
    let t_end = 10.0 / kappa_c;
    let s = SpaceSig::single(n).unwrap();
    let loss = two_photon_loss(n, kappa2, alpha_sq);
    let vac = Ket::fock(&s, &[0]).unwrap().to_density();
    let spec = EvolutionSpec::new(Operator::zeros(&s), vec![loss.clone()], vec![t_end]);
    let ts = evolve(&spec, &vac).unwrap();
    let plus = cat_basis_state(n, c(alpha_sq.sqrt()), CatKind::Plus).unwrap();
    let fid = ts.final_state.fidelity_pure(&plus).unwrap();

    let oracle = rk4_oracle(
        Operator::zeros(&s).data(),
        &[loss.data().clone()],
        vac.data(),
        t_end,
        20000,
    );
    let oracle_rho = DensityMatrix::from_matrix_unchecked(s, oracle).unwrap();
    let oracle_fid = oracle_rho.fidelity_pure(&plus).unwrap();
    assert!(fid > 0.99, "fidelity {fid}");
    assert!((fid - oracle_fid).abs() < 1e-6, "{fid} vs oracle {oracle_fid}");
    assert!(max_diff(ts.final_state.data(), oracle_rho.data()) < 1e-6);
}

fn one_mode_generator(n: usize, scale: f64) -> (Operator, Vec<Operator>) {
    let a = destroy(n);
    let ad = a.dagger();
    let kerr = (&(&ad * &ad) * &(&a * &a)).scale(c(-0.3 * scale));
    (kerr, vec![two_photon_loss(n, scale, 2.0), a.scale(c((0.2 * scale).sqrt()))])
}

#[test]
fn rate_rescaling_is_covariant() {
    let n = 24;
    let s = SpaceSig::single(n).unwrap();
    let rho0 = Ket::coherent(n, c(1.4)).unwrap().to_density();
    let a = destroy(n);
    let run = |scale: f64| {
        let (h, ls) = one_mode_generator(n, scale);
        let grid: Vec<f64> = (1..=10).map(|k| k as f64 * 0.3 / scale).collect();
        let spec = EvolutionSpec::new(h, ls, grid).observe("a", a.clone());
        evolve(&spec, &rho0).unwrap()
    };
    let base = run(1.0);
    let fast = run(100.0);
    for (x, y) in base.column("a").unwrap().iter().zip(fast.column("a").unwrap()) {
        assert!((x - y).norm() < 1e-6, "{x} vs {y}");
    }
    let _ = s;
}

#[test]
fn halving_step_tolerance_changes_little() {
    let n = 24;
    let rho0 = Ket::coherent(n, c(1.4)).unwrap().to_density();
    let a = destroy(n);
    let (h, ls) = one_mode_generator(n, 1.0);
    let grid: Vec<f64> = (1..=10).map(|k| k as f64 * 0.5).collect();
    let base = EvolutionSpec::new(h, ls, grid).observe("a", a);
    let tol = base.tolerances;
    let tight = base.clone().with_tolerances(Tolerances { rel_step_tol: tol.rel_step_tol / 2.0, ..tol });
    let x = evolve(&base, &rho0).unwrap();
    let y = evolve(&tight, &rho0).unwrap();
    for (p, q) in x.column("a").unwrap().iter().zip(y.column("a").unwrap()) {
        assert!((p - q).norm() < 1e-5);
    }
}

#[test]
fn evolve_validates_its_inputs() {
    let s = SpaceSig::single(3).unwrap();
    let rho = DensityMatrix::maximally_mixed(&s);
    let h = Operator::zeros(&s);
    let bad_grid = EvolutionSpec::new(h.clone(), vec![], vec![1.0, 1.0]);
    assert!(matches!(evolve(&bad_grid, &rho), Err(Error::InvalidParameter(_))));
    let negative = EvolutionSpec::new(h.clone(), vec![], vec![-1.0]);
    assert!(matches!(evolve(&negative, &rho), Err(Error::InvalidParameter(_))));
    let other = DensityMatrix::maximally_mixed(&SpaceSig::single(4).unwrap());
    let ok = EvolutionSpec::new(h, vec![], vec![0.0, 1.0]);
    assert!(matches!(evolve(&ok, &other), Err(Error::SigMismatch { .. })));
}

#[test]
fn csv_export_layout() {
    let s = SpaceSig::single(3).unwrap();
    let spec = EvolutionSpec::new(Operator::zeros(&s), vec![destroy(3)], vec![0.0, 0.5])
        .observe("n", mode_operator(&s, 0, ModeOp::Number).unwrap());
    let ts = evolve(&spec, &Ket::fock(&s, &[1]).unwrap().to_density()).unwrap();
    let mut buf = Vec::new();
    ts.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,n_re,n_im");
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[1], "0.0000000000000000e0,1.0000000000000000e0,0.0000000000000000e0");
    let fields: Vec<&str> = lines[2].split(',').collect();
    let v: f64 = fields[1].parse().unwrap();
    assert!((v - (-0.5f64).exp()).abs() < 1e-7);
}

#[test]
fn steady_state_examples() {
    let tol = Tolerances::default();

    // single-photon loss from |2⟩ ends in vacuum
    let s = SpaceSig::single(4).unwrap();
    let ss = relax_to_steady(
        &Operator::zeros(&s),
        &[destroy(4)],
        &Ket::fock(&s, &[2]).unwrap().to_density(),
        100.0,
        1e-9,
        tol,
    )
    .unwrap();
    assert!(ss.converged);
    assert!((ss.state.data()[[0, 0]] - c(1.0)).norm() < 1e-8);

    // an even cat is a fixed point of pure two-photon loss
    let n = 40;
    let plus = cat_basis_state(n, c(2.0), CatKind::Plus).unwrap().to_density();
    let ss = relax_to_steady(
        &Operator::zeros(plus.sig()),
        &[two_photon_loss(n, 1.0, 4.0)],
        &plus,
        10.0,
        1e-8,
        tol,
    )
    .unwrap();
    assert!(ss.converged);
    assert_eq!(ss.t, 0.0);
    assert_eq!(ss.state, plus);

    // single-photon loss mixes the parities, so the steady parity drops below 1;
    // once steps are stability limited the residual floor is about rel_step_tol/h
    let n = 20;
    let sn = SpaceSig::single(n).unwrap();
    let (_, ls) = one_mode_generator(n, 1.0);
    let ss = relax_to_steady(
        &Operator::zeros(&sn),
        &ls,
        &Ket::fock(&sn, &[0]).unwrap().to_density(),
        400.0,
        1e-5,
        tol,
    )
    .unwrap();
    assert!(ss.converged, "residual {}", ss.residual);
    let p = expectation(&ss.state, &mode_operator(&sn, 0, ModeOp::Parity).unwrap()).unwrap();
    assert!(p.re < 0.9 && p.re > -0.9, "parity {}", p.re);

    // the horizon is reported, not thrown
    let short = relax_to_steady(
        &Operator::zeros(&sn),
        &ls,
        &Ket::fock(&sn, &[0]).unwrap().to_density(),
        0.1,
        1e-12,
        tol,
    )
    .unwrap();
    assert!(!short.converged);
    assert!((short.t - 0.1).abs() < 1e-15);
}

#[test]
fn direct_steady_state_matches_relaxation() {
    // thermal qubit: decay γ(1+n), heating γn → excited population n/(1+2n)
    let q = destroy(2);
    let (g, nth): (f64, f64) = (0.7, 0.05);
    let ls = [q.scale(c((g * (1.0 + nth)).sqrt())), q.dagger().scale(c((g * nth).sqrt()))];
    let ss = steady_state(&Operator::zeros(q.sig()), &ls).unwrap();
    assert!((ss.data()[[1, 1]].re - nth / (1.0 + 2.0 * nth)).abs() < 1e-14);

    // driven, lossy, Kerr cat mode: direct solve vs long relaxation
    let n = 20;
    let sn = SpaceSig::single(n).unwrap();
    let (h, ls) = one_mode_generator(n, 1.0);
    let num = mode_operator(&sn, 0, ModeOp::Number).unwrap();
    let h = &h + &num.scale(c(0.4));
    let direct = steady_state(&h, &ls).unwrap();
    direct.validate().unwrap();
    let resid = liouvillian_apply(&h, &ls, &direct).unwrap();
    assert!(resid.iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-11);
    let relaxed = relax_to_steady(&h, &ls, &Ket::fock(&sn, &[0]).unwrap().to_density(), 400.0, 1e-6, Tolerances::default())
        .unwrap();
    assert!(relaxed.converged);
    let diff = (direct.data() - relaxed.state.data()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert!(diff < 1e-5, "{diff}");

    let big = SpaceSig::single(DIRECT_STEADY_MAX_DIM + 1).unwrap();
    assert!(matches!(steady_state(&Operator::zeros(&big), &[]), Err(Error::Unsupported(_))));
    // a dark subspace makes the solve singular
    let m = 10;
    let dark = steady_state(&Operator::zeros(&SpaceSig::single(m).unwrap()), &[two_photon_loss(m, 1.0, 0.0)]);
    assert!(dark.is_err());
}
