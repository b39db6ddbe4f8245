//! Fixtures shared by the criterion benchmarks in `benches/`.

use bdglab::{build_model, BdGModel, DisorderRealization, Kinetic, LatticeSpec, PairingKind, PairingSpec};

/// Clean or disordered p+ip model on an `n × n` torus.
pub fn p_plus_ip(n: usize, mu: f64, w: f64) -> BdGModel {
    let spec = LatticeSpec::torus(n, n, 1).expect("valid lattice");
    let disorder = if w == 0.0 {
        DisorderRealization::clean(&spec)
    } else {
        DisorderRealization::generate(&spec, w, 1, "bench").expect("valid disorder")
    };
    build_model(&spec, Some(PairingSpec::new(PairingKind::PPlusIP, 1.0)), mu, &disorder, Kinetic::Laplacian)
        .expect("valid model")
}
