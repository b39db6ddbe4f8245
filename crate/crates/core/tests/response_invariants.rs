//! Invariants of currents, linear response and edge observables on random
//! local models.

use std::f64::consts::PI;

use bdglab::boundary::{twisted, EdgeWindow};
use bdglab::currents::{continuity_residual, equilibrium_current, Conserved};
use bdglab::lattice::derivation;
use bdglab::linalg;
use bdglab::models::random_local_model;
use bdglab::transport::{liouvillian_resolvent_apply, onsager_check, KuboConfig, Perturbation, RESOLVENT_TOL};
use bdglab::{BdGModel, Direction, LatticeSpec};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_model(spec: LatticeSpec, seed: u64) -> BdGModel {
    random_local_model(spec, 1, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn matter_and_energy_are_locally_conserved(seed in any::<u64>()) {
        let m = random_model(LatticeSpec::torus(6, 6, 1).unwrap(), seed);
        for which in [Conserved::Matter, Conserved::Energy] {
            let r = continuity_residual(&m, which).unwrap();
            prop_assert!(r.conserved && r.residual < 1e-11);
        }
        // generic pairing breaks charge conservation
        prop_assert!(!continuity_residual(&m, Conserved::Charge).unwrap().conserved);
    }

    #[test]
    fn no_equilibrium_current(seed in any::<u64>(), beta in 0.2f64..20.0) {
        let m = random_model(LatticeSpec::torus(6, 6, 1).unwrap(), seed);
        prop_assert!(equilibrium_current(&m, beta).unwrap() < 1e-12);
    }

    #[test]
    fn resolvent_inverts_delta_minus_liouvillian(seed in any::<u64>(), delta in 0.01f64..2.0) {
        let m = random_model(LatticeSpec::torus(4, 4, 1).unwrap(), seed);
        let j = derivation(&m.hamiltonian, Direction::One).unwrap();
        let r = liouvillian_resolvent_apply(&m.hamiltonian, delta, &j).unwrap();
        prop_assert!(r.inverse_residual < RESOLVENT_TOL);
    }

    #[test]
    fn onsager_identity(seed in any::<u64>(), beta in 0.5f64..10.0) {
        let m = random_model(LatticeSpec::torus(4, 4, 1).unwrap(), seed);
        let cfg = KuboConfig::new(beta, 0.1, Perturbation::Gravitational).unwrap();
        prop_assert!(onsager_check(&m, &cfg).unwrap().identity_residual() < 1e-10);
    }

    #[test]
    fn twisted_spectrum_is_periodic_and_particle_hole_paired(seed in any::<u64>(), theta in -PI..PI) {
        let m = random_model(LatticeSpec::cylinder(5, 4, 1).unwrap(), seed);
        let at = |t: f64| linalg::eigvalsh(&twisted(&m.hamiltonian, t).unwrap()).unwrap();
        let (a, b, c) = (at(theta), at(theta + 2.0 * PI), at(-theta));
        prop_assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-11));
        prop_assert!(a.iter().zip(c.iter().rev()).all(|(x, y)| (x + y).abs() < 1e-11));
    }

    #[test]
    fn bump_windows_are_probability_densities(a in 0.05f64..3.0) {
        let w = EdgeWindow::bump(a).unwrap();
        prop_assert!((w.integral() - 1.0).abs() < 1e-9);
        prop_assert!((w.antiderivative(0.0) - 0.5).abs() < 1e-9);
        prop_assert_eq!(w.g(1.01 * a), 0.0);
        prop_assert!(w.g(0.3 * a) == w.g(-0.3 * a) && w.g(0.3 * a) > 0.0);
    }
}
