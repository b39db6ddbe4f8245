use bdglab::fock::{
    bogoliubov_diagonalize, commutator_identity_check, expectation, fermi_function, gibbs_two_point,
    predicted_spectrum, second_quantize, to_block_grading, FockSpace,
};
use bdglab::lattice::{ChargeAndSpinOps, LatticeSpec};
use bdglab::linalg::{self, eigvalsh, max_abs_diff};
use bdglab::models::{build_model, DisorderRealization, Kinetic, PairingKind, PairingSpec};
use ndarray::{s, Array2};
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random `[[α, β], [γ, −αᵀ]]` with antisymmetric off-diagonal blocks.
fn random_graded(m: usize, seed: u64, hermitian: bool) -> Array2<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = || C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
    let mut alpha = Array2::from_shape_fn((m, m), |_| z());
    let mut beta = Array2::from_shape_fn((m, m), |_| z());
    let mut gamma = Array2::from_shape_fn((m, m), |_| z());
    beta = &beta - &beta.t();
    gamma = &gamma - &gamma.t();
    if hermitian {
        alpha = (&alpha + &linalg::adjoint(&alpha)).mapv(|x| x * 0.5);
        gamma = linalg::adjoint(&beta);
    }
    let mut a = Array2::zeros((2 * m, 2 * m));
    a.slice_mut(s![..m, ..m]).assign(&alpha);
    a.slice_mut(s![..m, m..]).assign(&beta);
    a.slice_mut(s![m.., ..m]).assign(&gamma);
    a.slice_mut(s![m.., m..]).assign(&alpha.t().mapv(|x| -x));
    a
}

fn model(kind: PairingKind, n: usize, mu: f64, w: f64, seed: u64) -> bdglab::BdGModel {
    let spec = LatticeSpec::torus(n, n, kind.fiber_dim()).unwrap();
    let dis = DisorderRealization::generate(&spec, w, seed, "fock").unwrap();
    build_model(&spec, Some(PairingSpec::new(kind, 1.0)), mu, &dis, Kinetic::Laplacian).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn lie_homomorphism_on_random_pairs(seed in any::<u64>()) {
        let f = FockSpace::new(6).unwrap();
        let a = random_graded(6, seed, false);
        let b = random_graded(6, seed ^ 0x9e37, false);
        prop_assert!(commutator_identity_check(&a, &b, &f).unwrap() <= 1e-12);
    }

    #[test]
    fn quadratics_preserve_parity(seed in any::<u64>()) {
        let f = FockSpace::new(5).unwrap();
        let q = second_quantize(&random_graded(5, seed, true), &f).unwrap();
        prop_assert!(q.bold.commutator(&f.parity()).max_abs() < 1e-14);
        let d = q.bold.to_dense();
        prop_assert!(linalg::hermitian_residual(&d) < 1e-14);
    }

    #[test]
    fn bogoliubov_lands_in_the_group(seed in any::<u64>()) {
        let h = random_graded(5, seed, true);
        let b = bogoliubov_diagonalize(&h).unwrap();
        let (u, p) = b.group_residuals();
        prop_assert!(u <= 1e-10 && p <= 1e-10);
        let d = b.w.dot(&h).dot(&linalg::adjoint(&b.w));
        let mut want = Array2::zeros((10, 10));
        for (k, &e) in b.d.iter().enumerate() {
            want[[k, k]] = C64::new(e, 0.0);
            want[[5 + k, 5 + k]] = C64::new(-e, 0.0);
        }
        prop_assert!(max_abs_diff(&d, &want) <= 1e-10);
        prop_assert!(b.d.windows(2).all(|w| w[0] >= w[1]) && b.d.iter().all(|&x| x >= 0.0));
    }
}

#[test]
fn alpha_only_identity() {
    let f = FockSpace::new(4).unwrap();
    let mut a = random_graded(4, 1, false);
    let mut b = random_graded(4, 2, false);
    for x in [&mut a, &mut b] {
        x.slice_mut(s![..4, 4..]).fill(C64::new(0.0, 0.0));
        x.slice_mut(s![4.., ..4]).fill(C64::new(0.0, 0.0));
    }
    assert!(commutator_identity_check(&a, &b, &f).unwrap() <= 1e-13);
}

#[test]
fn spin_operators_close_under_second_quantization() {
    let spec = LatticeSpec::torus(1, 1, 2).unwrap();
    let ops = ChargeAndSpinOps::new(&spec);
    let f = FockSpace::new(2).unwrap();
    let s: Vec<Array2<C64>> = ops.s.iter().map(to_block_grading).collect();
    for (a, b, c) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
        assert!(commutator_identity_check(&s[a], &s[b], &f).unwrap() <= 1e-13);
        let lhs = second_quantize(&s[a], &f).unwrap().bold.commutator(&second_quantize(&s[b], &f).unwrap().bold);
        let rhs = second_quantize(&s[c], &f).unwrap().bold.scale(C64::new(0.0, 1.0));
        assert!(lhs.sub(&rhs).max_abs() <= 1e-13);
    }
}

#[test]
fn gibbs_state_matches_fermi_function_on_lattice_models() {
    for (kind, w, seed) in [(PairingKind::PPlusIP, 0.0, 0), (PairingKind::DPlusID, 0.8, 3), (PairingKind::TripletP, 0.5, 7)] {
        let m = model(kind, 2, -1.0, w, seed);
        let h = to_block_grading(&m.hamiltonian);
        let modes = h.nrows() / 2;
        let f = FockSpace::new(modes).unwrap();
        for beta in [0.0, 0.7, 3.0] {
            let g = gibbs_two_point(&h, beta, &f).unwrap();
            let fb = fermi_function(&h, beta).unwrap();
            assert!(max_abs_diff(&g, &fb) <= 1e-10, "{kind} beta {beta}");
            let k = bdglab::fock::block_swap(modes);
            let lhs = k.dot(&linalg::conj(&g)).dot(&k);
            let rhs = linalg::identity(2 * modes) - &g;
            assert!(max_abs_diff(&lhs, &rhs) <= 1e-10);
        }
    }
}

#[test]
fn low_temperature_gibbs_is_the_spectral_projection() {
    let m = model(PairingKind::PPlusIP, 2, -1.0, 0.0, 0);
    let h = to_block_grading(&m.hamiltonian);
    let f = FockSpace::new(h.nrows() / 2).unwrap();
    let g = gibbs_two_point(&h, f64::INFINITY, &f).unwrap();
    let p = fermi_function(&h, f64::INFINITY).unwrap();
    assert!(max_abs_diff(&g, &p) <= 1e-10);
}

#[test]
fn quadratic_expectations() {
    let m = model(PairingKind::DPlusID, 2, -0.5, 0.3, 11);
    let h = to_block_grading(&m.hamiltonian);
    let modes = h.nrows() / 2;
    let f = FockSpace::new(modes).unwrap();
    let beta = 1.3;
    let gamma = gibbs_two_point(&h, beta, &f).unwrap();
    let bold_h = second_quantize(&h, &f).unwrap().bold.to_dense();
    let es = linalg::eigh(&bold_h).unwrap();
    let e0 = es.values[0];
    let w: Vec<f64> = es.values.iter().map(|e| (-beta * (e - e0)).exp()).collect();
    let z: f64 = w.iter().sum();
    let rho = es.apply_weights(&w.iter().map(|x| x / z).collect::<Vec<_>>());
    let a = random_graded(modes, 5, true);
    let lhs = expectation(&second_quantize(&a, &f).unwrap().bold, &rho);
    let rhs = linalg::trace_product(&gamma, &a) * 0.5;
    assert!((lhs - rhs).norm() <= 1e-10);
}

#[test]
fn many_body_spectrum_from_quasiparticles() {
    let m = model(PairingKind::SpinfulP, 2, -1.0, 0.6, 2);
    let h = to_block_grading(&m.hamiltonian);
    let f = FockSpace::new(h.nrows() / 2).unwrap();
    let bold = second_quantize(&h, &f).unwrap().bold.to_dense();
    let exact = eigvalsh(&bold).unwrap();
    let b = bogoliubov_diagonalize(&h).unwrap();
    let predicted = predicted_spectrum(&b);
    for (x, y) in exact.iter().zip(&predicted) {
        assert!((x - y).abs() <= 1e-10);
    }
}
