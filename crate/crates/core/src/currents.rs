//! Local densities, discrete gradients and the continuity equations for
//! matter, charge, spin and energy on the torus.
//!
//! A bond `(n, n')` carries an oriented displacement `D(n, n')` with
//! `D(n', n) = −D(n, n')`. Along a periodic direction this is the minimal
//! image, and a bond of exactly half a period is oriented from the smaller
//! to the larger coordinate. The gradient
//!
//! `(∂_j ρ_A)(n) = −Σ_{n'} c(n, n') / D_j(n, n') [|n⟩A(n,n')⟨n'| + |n'⟩A(n',n)⟨n|]`
//!
//! runs over bonds with `D_j ≠ 0`. The weight `c` is the inverse number of
//! nonzero components of `D`, so axis bonds get `c = 2/d = 1` and diagonal
//! bonds are shared between both directions. With this weighting the
//! continuity equations hold exactly for any finite-range operator.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::lattice::{
    derivation, spectral_function, BlockOperator, ChargeAndSpinOps, Direction, Geometry, LatticeSpec,
};
use crate::linalg::{self, I, ZERO};
use crate::models::BdGModel;

/// Oriented bond displacement along `j`, defined for every pair of sites.
pub fn bond_displacement(spec: &LatticeSpec, j: Direction, a: usize, b: usize) -> i64 {
    match spec.displacement(j, a, b) {
        Some(d) => d,
        None => {
            let half = (spec.extent(j) / 2) as i64;
            if a < b {
                half
            } else {
                -half
            }
        }
    }
}

fn site_coord(spec: &LatticeSpec, s: usize, j: Direction) -> usize {
    let (i1, i2) = spec.coords(s);
    match j {
        Direction::One => i1,
        Direction::Two => i2,
    }
}

/// `(D_1, D_2)` for every ordered pair of sites.
fn bond_table(spec: &LatticeSpec) -> Vec<[i64; 2]> {
    let n = spec.sites();
    let mut t = vec![[0; 2]; n * n];
    for s in 0..n {
        for u in 0..n {
            t[s * n + u] = [Direction::One, Direction::Two]
                .map(|j| bond_displacement(spec, j, site_coord(spec, s, j), site_coord(spec, u, j)));
        }
    }
    t
}

/// The density field `n ↦ ρ_A(n) = ½{A, ρ(n)}` of an operator.
#[derive(Debug, Clone)]
pub struct LocalDensityField {
    pub base: BlockOperator,
    bonds: Vec<[i64; 2]>,
}

impl LocalDensityField {
    pub fn new(base: BlockOperator) -> Result<Self> {
        if base.spec().geometry != Geometry::Torus {
            return Err(Error::NotTorus);
        }
        let bonds = bond_table(base.spec());
        Ok(LocalDensityField { base, bonds })
    }

    fn width(&self) -> usize {
        2 * self.base.spec().fiber_l
    }

    /// `Σ_{n'} w(n') [|n⟩A(n,n')⟨n'| + |n'⟩A(n',n)⟨n|]` as a dense matrix.
    fn cross<F: Fn(usize) -> f64>(&self, n: usize, w: F) -> Array2<C64> {
        let a = self.base.data();
        let dim = a.nrows();
        let k = self.width();
        let mut out = Array2::zeros((dim, dim));
        for t in 0..self.base.spec().sites() {
            let c = w(t);
            if c == 0.0 {
                continue;
            }
            for x in 0..k {
                for y in 0..k {
                    let (r, q) = (n * k + x, t * k + y);
                    out[[r, q]] += a[[r, q]] * c;
                    out[[q, r]] += a[[q, r]] * c;
                }
            }
        }
        out
    }

    /// `ρ_A(n)`.
    pub fn density(&self, n: usize) -> Array2<C64> {
        self.cross(n, |_| 0.5)
    }

    /// `(∂_j ρ_A)(n)`.
    pub fn derivative(&self, n: usize, j: Direction) -> Array2<C64> {
        let sites = self.base.spec().sites();
        let bonds = &self.bonds;
        self.cross(n, |t| {
            let d = bonds[n * sites + t];
            let dj = d[j.index()];
            if dj == 0 {
                return 0.0;
            }
            let nonzero = d.iter().filter(|&&x| x != 0).count() as f64;
            -1.0 / (nonzero * dj as f64)
        })
    }
}

/// `V_j(n, n') = −i D_j(n, n') A(n, n')`, i.e. `i[A, X_j]` with oriented bonds.
pub fn velocity(a: &BlockOperator, j: Direction) -> BlockOperator {
    let spec = *a.spec();
    let bonds = bond_table(&spec);
    let sites = spec.sites();
    let k = 2 * spec.fiber_l;
    let d = a.data();
    let out = Array2::from_shape_fn(d.dim(), |(r, c)| {
        let dj = bonds[(r / k) * sites + c / k][j.index()];
        if dj == 0 {
            ZERO
        } else {
            d[[r, c]] * (-I * dj as f64)
        }
    });
    let mut op = BlockOperator::new(spec, out);
    if a.is_hermitian() {
        op.mark_hermitian().expect("velocity of a hermitian operator is hermitian");
    }
    op
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conserved {
    Matter,
    Charge,
    Spin,
    Energy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuityReport {
    pub which: Conserved,
    /// `false` when the global conservation law fails; `residual` then holds
    /// the obstruction `‖[H, Q]‖` or `‖[H, S³]‖`.
    pub conserved: bool,
    pub residual: f64,
}

/// `max_n ‖−i[ρ_•(n), H] + (∂·𝒥_•)(n)‖_max`.
pub fn continuity_residual(m: &BdGModel, which: Conserved) -> Result<ContinuityReport> {
    let h = &m.hamiltonian;
    let spec = *h.spec();
    if spec.geometry != Geometry::Torus {
        return Err(Error::NotTorus);
    }
    let ops = ChargeAndSpinOps::new(&spec);
    let grading = match which {
        Conserved::Charge => Some(&ops.q),
        Conserved::Spin => Some(ops.s3()),
        _ => None,
    };
    if let Some(g) = grading {
        let obstruction = h.commutator(g).max_abs();
        if obstruction > 1e-12 {
            return Ok(ContinuityReport {
                which,
                conserved: false,
                residual: obstruction,
            });
        }
    }
    // the density ρ_•(n) = ½{B, ρ(n)} and the Hamiltonian generating the currents
    let (base, generator) = match which {
        Conserved::Matter => (BlockOperator::identity(spec), h.clone()),
        Conserved::Charge => (ops.q.clone(), h.clone()),
        Conserved::Spin => (ops.s3().clone(), h.clone()),
        Conserved::Energy => (h.clone(), h.matmul(h).scale(C64::new(0.5, 0.0))),
    };
    let currents: Vec<LocalDensityField> = [Direction::One, Direction::Two]
        .into_iter()
        .map(|j| {
            let mut v = velocity(&generator, j);
            if let Some(g) = grading {
                v = v.matmul(g);
            }
            LocalDensityField::new(v)
        })
        .collect::<Result<_>>()?;
    let density = LocalDensityField::new(base)?;
    let hd = h.data();
    let mut worst = 0.0f64;
    for n in 0..spec.sites() {
        let rho = density.density(n);
        let dt = linalg::commutator(&rho, hd).mapv(|x| -I * x);
        let div = currents[0].derivative(n, Direction::One) + currents[1].derivative(n, Direction::Two);
        worst = worst.max(linalg::max_abs(&(dt + div)));
    }
    Ok(ContinuityReport {
        which,
        conserved: true,
        residual: worst,
    })
}

#[derive(Debug, Clone)]
pub struct CurrentOps {
    /// `𝒥_j = i[H, X_j]`.
    pub matter: [BlockOperator; 2],
    /// `𝒥_Q = 𝒥 Q`, present when `[H, Q] = 0`.
    pub charge: Option<[BlockOperator; 2]>,
    /// `𝒥_{S³} = 𝒥 S³`, present when `[H, S³] = 0`.
    pub spin: Option<[BlockOperator; 2]>,
    /// `𝒥_H = (i/2)[H², X]`.
    pub energy: [BlockOperator; 2],
}

/// Macroscopic current operators; the matter current is `∇_j H`.
pub fn current_operators(m: &BdGModel) -> Result<CurrentOps> {
    let h = &m.hamiltonian;
    let spec = *h.spec();
    let ops = ChargeAndSpinOps::new(&spec);
    let matter = [derivation(h, Direction::One)?, derivation(h, Direction::Two)?];
    let h2 = h.matmul(h).scale(C64::new(0.5, 0.0));
    let energy = [
        derivation(&h2, Direction::One)?,
        derivation(&h2, Direction::Two)?,
    ];
    let graded = |g: &BlockOperator| -> Option<[BlockOperator; 2]> {
        (h.commutator(g).max_abs() <= 1e-12).then(|| {
            matter.clone().map(|j| {
                let mut op = j.matmul(g);
                op.mark_hermitian().expect("commuting product of hermitian operators");
                op
            })
        })
    };
    Ok(CurrentOps {
        charge: graded(&ops.q),
        spin: graded(ops.s3()),
        matter,
        energy,
    })
}

/// `max_j |𝒯(f_β(H) ∇_j H)|`.
pub fn equilibrium_current(m: &BdGModel, beta: f64) -> Result<f64> {
    let h = &m.hamiltonian;
    if h.spec().geometry != Geometry::Torus {
        return Err(Error::NotTorus);
    }
    let f = spectral_function(h, |e| crate::lattice::fermi_dirac(beta, e))?;
    let mut worst = 0.0f64;
    for j in [Direction::One, Direction::Two] {
        let v = derivation(h, j)?;
        let t = linalg::trace_product(f.data(), v.data()) / h.spec().sites() as f64;
        worst = worst.max(t.norm());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{one_particle_from_hoppings, Hopping};
    use crate::linalg::ONE;
    use crate::models::{build_model, DisorderRealization, Kinetic, PairingKind, PairingSpec};

    fn model(kind: Option<PairingKind>, l: usize) -> BdGModel {
        let s = LatticeSpec::torus(6, 6, l).unwrap();
        build_model(
            &s,
            kind.map(|k| PairingSpec::new(k, 0.8)),
            -1.0,
            &DisorderRealization::generate(&s, 1.0, 5, "t").unwrap(),
            Kinetic::Laplacian,
        )
        .unwrap()
    }

    #[test]
    fn identity_density_is_on_site_projection() {
        let s = LatticeSpec::torus(4, 4, 1).unwrap();
        let f = LocalDensityField::new(BlockOperator::identity(s)).unwrap();
        let d = f.density(5);
        for r in 0..s.dim() {
            for c in 0..s.dim() {
                let want = if r == c && r / 2 == 5 { ONE } else { ZERO };
                assert_eq!(d[[r, c]], want);
            }
        }
        assert_eq!(linalg::max_abs(&f.derivative(5, Direction::One)), 0.0);
    }

    #[test]
    fn densities_sum_to_the_operator() {
        let m = model(Some(PairingKind::DXY), 2);
        let f = LocalDensityField::new(m.hamiltonian.clone()).unwrap();
        let total = (0..m.spec.sites()).fold(Array2::zeros(m.hamiltonian.data().dim()), |acc, n| acc + f.density(n));
        assert!(linalg::max_abs_diff(&total, m.hamiltonian.data()) < 1e-14);
        assert!(linalg::hermitian_residual(&f.density(3)) < 1e-15);
    }

    #[test]
    fn derivative_of_a_shift() {
        let s = LatticeSpec::torus(6, 6, 1).unwrap();
        let hop = Hopping {
            d1: 1,
            d2: 0,
            fiber: linalg::identity(1),
        };
        let v = one_particle_from_hoppings(&s, &[hop], |_, _, _, _| ONE);
        let zero = Array2::zeros(v.dim());
        let op = BlockOperator::new(s, crate::lattice::ph_assemble(&v, &zero, &zero, &zero));
        let f = LocalDensityField::new(op.clone()).unwrap();
        let n = s.site(2, 3);
        let d = f.derivative(n, Direction::One);
        // V1 moves n − e1 to n: D_1(n, n − e1) = 1, D_1(n + e1, n) = 1
        let r = s.index(2, 3, 0, 0);
        let from = s.index(1, 3, 0, 0);
        let to = s.index(3, 3, 0, 0);
        assert_eq!(d[[r, from]], -ONE);
        assert_eq!(d[[to, r]], ONE);
        assert_eq!(linalg::max_abs(&f.derivative(n, Direction::Two)), 0.0);
    }

    #[test]
    fn total_divergence_vanishes() {
        let m = model(Some(PairingKind::DPlusID), 2);
        let fields = [Direction::One, Direction::Two].map(|j| LocalDensityField::new(velocity(&m.hamiltonian, j)).unwrap());
        let mut total = Array2::zeros(m.hamiltonian.data().dim());
        for n in 0..m.spec.sites() {
            total = total + fields[0].derivative(n, Direction::One) + fields[1].derivative(n, Direction::Two);
        }
        assert!(linalg::max_abs(&total) < 1e-13);
    }

    #[test]
    fn continuity_for_presets() {
        for kind in [PairingKind::PPlusIP, PairingKind::DXY, PairingKind::SpinfulP] {
            let m = model(Some(kind), kind.fiber_dim());
            for which in [Conserved::Matter, Conserved::Energy] {
                let r = continuity_residual(&m, which).unwrap();
                assert!(r.conserved && r.residual <= 1e-11, "{kind} {which:?} {}", r.residual);
            }
            let r = continuity_residual(&m, Conserved::Charge).unwrap();
            assert!(!r.conserved && r.residual > 0.1);
        }
        let m = model(Some(PairingKind::SpinfulP), 2);
        let r = continuity_residual(&m, Conserved::Spin).unwrap();
        assert!(r.conserved && r.residual <= 1e-11);
        let m = model(None, 2);
        let r = continuity_residual(&m, Conserved::Charge).unwrap();
        assert!(r.conserved && r.residual <= 1e-11);
    }

    #[test]
    fn macroscopic_currents() {
        let m = model(None, 1);
        let c = current_operators(&m).unwrap();
        let q = ChargeAndSpinOps::new(&m.spec).q;
        let jq = c.charge.as_ref().unwrap();
        assert!(jq[0].commutator(&q).max_abs() < 1e-13);
        for j in 0..2 {
            assert!(c.energy[j].hermitian_residual() < 1e-12);
            assert!(c.matter[j].is_hermitian());
        }
        let m = model(Some(PairingKind::PPlusIP), 1);
        let c = current_operators(&m).unwrap();
        assert!(c.charge.is_none());
        // 𝒥_H is odd under the particle-hole conjugation, like H
        let k = crate::lattice::ph_conjugate(&c.energy[0]);
        assert!(k.sub(&c.energy[0]).max_abs() < 1e-12 || k.add(&c.energy[0]).max_abs() < 1e-12);
    }

    #[test]
    fn no_equilibrium_current() {
        let m = model(None, 1);
        assert!(equilibrium_current(&m, 2.0).unwrap() <= 1e-12);
        let m = model(Some(PairingKind::PPlusIP), 1);
        assert!(equilibrium_current(&m, f64::INFINITY).unwrap() <= 1e-12);
    }
}
