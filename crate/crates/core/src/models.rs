//! BdG Hamiltonians `H = [[h − μ, Δ], [−conj(Δ), −conj(h) + μ]]` built from
//! a kinetic term, a pairing preset and on-site disorder, together with the
//! symmetry engine (PHS, TRS, U(1), SU(2), charge) and the spin reductions.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lattice::{
    one_particle_from_hoppings, ph_assemble, ph_blocks, ph_conjugate, BlockOperator, Direction, Geometry, Hopping,
    LatticeSpec,
};
use crate::linalg::{self, I, ONE, ZERO};
use crate::spin::SpinRep;

/// Residual threshold deciding whether a symmetry is present.
pub const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairingKind {
    SWave,
    ExtendedS,
    PX,
    PPlusIP,
    PMinusIP,
    SpinfulP,
    TripletP,
    DXY,
    DX2Y2,
    DPlusID,
    DMinusID,
}

impl PairingKind {
    pub const ALL: [PairingKind; 11] = [
        PairingKind::SWave,
        PairingKind::ExtendedS,
        PairingKind::PX,
        PairingKind::PPlusIP,
        PairingKind::PMinusIP,
        PairingKind::SpinfulP,
        PairingKind::TripletP,
        PairingKind::DXY,
        PairingKind::DX2Y2,
        PairingKind::DPlusID,
        PairingKind::DMinusID,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PairingKind::SWave => "s_wave",
            PairingKind::ExtendedS => "extended_s",
            PairingKind::PX => "p_x",
            PairingKind::PPlusIP => "p_plus_ip",
            PairingKind::PMinusIP => "p_minus_ip",
            PairingKind::SpinfulP => "spinful_p",
            PairingKind::TripletP => "triplet_p",
            PairingKind::DXY => "d_xy",
            PairingKind::DX2Y2 => "d_x2y2",
            PairingKind::DPlusID => "d_plus_id",
            PairingKind::DMinusID => "d_minus_id",
        }
    }

    /// Fiber dimension `L = 2s + 1` the preset is written for.
    pub fn fiber_dim(&self) -> usize {
        match self {
            PairingKind::PPlusIP | PairingKind::PMinusIP => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for PairingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PairingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PairingKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown pairing preset `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairingSpec {
    pub kind: PairingKind,
    /// Real amplitude `δ`.
    pub amplitude: f64,
}

impl PairingSpec {
    pub fn new(kind: PairingKind, amplitude: f64) -> Self {
        PairingSpec { kind, amplitude }
    }

    pub fn spin_required(&self) -> usize {
        self.kind.fiber_dim()
    }

    /// `Δ` as a sum of shift monomials tensored with spin matrices.
    pub fn hoppings(&self) -> Vec<Hopping> {
        let d = self.amplitude;
        let rep = SpinRep::from_dim(self.kind.fiber_dim());
        let is2 = rep.s2.mapv(|x| x * I);
        let one = linalg::identity(rep.dim());
        // Laurent polynomials in (V1, V2) as (exponents, coefficient)
        let px: Poly = vec![((1, 0), ONE), ((-1, 0), -ONE)];
        let py: Poly = vec![((0, 1), ONE), ((0, -1), -ONE)];
        let lap: Poly = vec![((1, 0), ONE), ((-1, 0), ONE), ((0, 1), ONE), ((0, -1), ONE)];
        let dx2y2: Poly = vec![((1, 0), ONE), ((-1, 0), ONE), ((0, 1), -ONE), ((0, -1), -ONE)];
        let dxy = poly_mul(&px, &py);
        let chiral = |sign: f64| poly_add(&px, &poly_scale(&py, I * sign));
        let mut out = Vec::new();
        let mut push = |p: &Poly, fiber: &Array2<C64>| {
            for &((d1, d2), c) in p {
                out.push(Hopping {
                    d1,
                    d2,
                    fiber: fiber.mapv(|x| x * c * d),
                });
            }
        };
        match self.kind {
            PairingKind::SWave => push(&vec![((0, 0), ONE)], &is2),
            PairingKind::ExtendedS => push(&lap, &is2),
            PairingKind::PX => push(&px, &rep.s1),
            PairingKind::PPlusIP => push(&chiral(1.0), &one),
            PairingKind::PMinusIP => push(&chiral(-1.0), &one),
            PairingKind::SpinfulP => push(&chiral(1.0), &rep.s1),
            PairingKind::TripletP => {
                push(&px, &one);
                push(&poly_scale(&py, I), &rep.s3);
            }
            PairingKind::DXY => push(&dxy, &is2),
            PairingKind::DX2Y2 => push(&dx2y2, &is2),
            PairingKind::DPlusID => push(&poly_add(&dx2y2, &poly_scale(&dxy, I)), &is2),
            PairingKind::DMinusID => push(&poly_add(&dx2y2, &poly_scale(&dxy, -I)), &is2),
        }
        out
    }
}

type Poly = Vec<((i64, i64), C64)>;

fn poly_mul(a: &Poly, b: &Poly) -> Poly {
    let mut out: Poly = Vec::new();
    for &((a1, a2), ca) in a {
        for &((b1, b2), cb) in b {
            let e = (a1 + b1, a2 + b2);
            match out.iter_mut().find(|(k, _)| *k == e) {
                Some((_, c)) => *c += ca * cb,
                None => out.push((e, ca * cb)),
            }
        }
    }
    out.retain(|(_, c)| *c != ZERO);
    out
}

fn poly_add(a: &Poly, b: &Poly) -> Poly {
    let mut out = a.clone();
    for &(e, c) in b {
        match out.iter_mut().find(|(k, _)| *k == e) {
            Some((_, x)) => *x += c,
            None => out.push((e, c)),
        }
    }
    out.retain(|(_, c)| *c != ZERO);
    out
}

fn poly_scale(a: &Poly, s: C64) -> Poly {
    a.iter().map(|&(e, c)| (e, c * s)).collect()
}

/// One sample of the uniform on-site potential on `[−W/2, W/2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisorderRealization {
    pub seed: u64,
    pub strength_w: f64,
    /// One value per `(site, spin)` in the lattice layout order.
    pub values: Vec<f64>,
    pub ensemble_id: String,
}

impl DisorderRealization {
    pub fn generate(spec: &LatticeSpec, strength_w: f64, seed: u64, ensemble_id: impl Into<String>) -> Result<Self> {
        if !(strength_w >= 0.0) || !strength_w.is_finite() {
            return Err(Error::Parameter(format!("disorder strength {strength_w} must be finite and >= 0")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..spec.one_particle_dim())
            .map(|_| (rng.random::<f64>() - 0.5) * strength_w)
            .collect();
        Ok(DisorderRealization {
            seed,
            strength_w,
            values,
            ensemble_id: ensemble_id.into(),
        })
    }

    pub fn clean(spec: &LatticeSpec) -> Self {
        DisorderRealization {
            seed: 0,
            strength_w: 0.0,
            values: vec![0.0; spec.one_particle_dim()],
            ensemble_id: String::from("clean"),
        }
    }

    /// The configuration `τ_j ω`: values moved by one site along `j`.
    pub fn translated(&self, spec: &LatticeSpec, j: Direction) -> Self {
        let l = spec.fiber_l;
        let mut values = vec![0.0; self.values.len()];
        for i2 in 0..spec.n2 {
            for i1 in 0..spec.n1 {
                let (s1, s2) = match j {
                    Direction::One => ((i1 + spec.n1 - 1) % spec.n1, i2),
                    Direction::Two => (i1, (i2 + spec.n2 - 1) % spec.n2),
                };
                for a in 0..l {
                    values[spec.site(i1, i2) * l + a] = self.values[spec.site(s1, s2) * l + a];
                }
            }
        }
        DisorderRealization {
            values,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kinetic {
    /// `V1 + V1* + V2 + V2*`.
    Laplacian,
    /// Hoppings dressed with the Landau-gauge phase that makes them commute
    /// with the magnetic translations.
    MagneticLaplacian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CazClass {
    D,
    DIII,
    C,
    CI,
    A,
    AIII,
    /// Integer spin with time reversal; outside the half-integer table.
    BDI,
}

impl fmt::Display for CazClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CazClass::D => "D",
            CazClass::DIII => "DIII",
            CazClass::C => "C",
            CazClass::CI => "CI",
            CazClass::A => "A",
            CazClass::AIII => "AIII",
            CazClass::BDI => "BDI",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct BdGModel {
    pub spec: LatticeSpec,
    /// One-particle `h − μ` including disorder.
    pub h: Array2<C64>,
    /// One-particle pairing block `Δ`.
    pub delta: Array2<C64>,
    pub mu: f64,
    pub hamiltonian: BlockOperator,
    pub caz_class: CazClass,
    pub pairing: Option<PairingSpec>,
    pub kinetic: Kinetic,
}

/// Builds the kinetic one-particle matrix `⊗ 1_L`.
pub fn kinetic_matrix(spec: &LatticeSpec, kinetic: Kinetic) -> Result<Array2<C64>> {
    let one = linalg::identity(spec.fiber_l);
    let terms: Vec<Hopping> = [(1, 0), (-1, 0), (0, 1), (0, -1)]
        .into_iter()
        .map(|(d1, d2)| Hopping {
            d1,
            d2,
            fiber: one.clone(),
        })
        .collect();
    match kinetic {
        Kinetic::Laplacian => Ok(one_particle_from_hoppings(spec, &terms, |_, _, _, _| ONE)),
        Kinetic::MagneticLaplacian => {
            if spec.geometry == Geometry::Torus && !spec.flux.commensurate_with(spec.n2) {
                return Err(Error::Lattice(format!(
                    "magnetic hoppings need flux * n2 integer (flux {}, n2 = {})",
                    spec.flux, spec.n2
                )));
            }
            let qb = spec.qb();
            Ok(one_particle_from_hoppings(spec, &terms, |_, i2, d1, _| {
                C64::from_polar(1.0, qb * d1 as f64 * i2 as f64)
            }))
        }
    }
}

/// Builds `H(μ)` for a preset on the given lattice.
pub fn build_model(
    spec: &LatticeSpec,
    pairing: Option<PairingSpec>,
    mu: f64,
    disorder: &DisorderRealization,
    kinetic: Kinetic,
) -> Result<BdGModel> {
    spec.validate()?;
    let mut h = kinetic_matrix(spec, kinetic)?;
    if disorder.values.len() != spec.one_particle_dim() {
        return Err(Error::Parameter(format!(
            "disorder has {} values, lattice needs {}",
            disorder.values.len(),
            spec.one_particle_dim()
        )));
    }
    let delta = match pairing {
        Some(p) => {
            if p.spin_required() != spec.fiber_l {
                return Err(Error::SpinMismatch {
                    required: p.spin_required(),
                    actual: spec.fiber_l,
                });
            }
            if p.amplitude != 0.0 && kinetic == Kinetic::MagneticLaplacian && !spec.flux.allows_pairing() {
                return Err(Error::FluxPairing { qb: spec.qb() });
            }
            one_particle_from_hoppings(spec, &p.hoppings(), |_, _, _, _| ONE)
        }
        None => Array2::zeros(h.dim()),
    };
    for (k, v) in disorder.values.iter().enumerate() {
        h[[k, k]] += C64::new(v - mu, 0.0);
    }
    let mut m = BdGModel::from_parts(*spec, h, delta)?;
    m.mu = mu;
    m.pairing = pairing;
    m.kinetic = kinetic;
    Ok(m)
}

impl BdGModel {
    /// Assembles a model from one-particle blocks `h` (with `μ` absorbed) and
    /// `Δ`; checks hermiticity of `h` and `Δ^T = −Δ`.
    pub fn from_parts(spec: LatticeSpec, h: Array2<C64>, delta: Array2<C64>) -> Result<Self> {
        let n = spec.one_particle_dim();
        if h.dim() != (n, n) || delta.dim() != (n, n) {
            return Err(Error::Parameter("block shapes do not match the lattice".into()));
        }
        let hr = linalg::hermitian_residual(&h);
        if hr > 1e-12 * linalg::max_abs(&h).max(1.0) {
            return Err(Error::NotHermitian(hr));
        }
        let anti = linalg::max_abs_diff(&delta.t().to_owned(), &delta.mapv(|x| -x));
        if anti > 1e-13 * linalg::max_abs(&delta).max(1.0) {
            return Err(Error::Parameter(format!("pairing is not antisymmetric (residual {anti:.3e})")));
        }
        let c = linalg::conj(&delta).mapv(|x| -x);
        let hh = linalg::conj(&h).mapv(|x| -x);
        let data = ph_assemble(&h, &delta, &c, &hh);
        let hamiltonian = BlockOperator::hermitian(spec, data)?.with_range(max_hopping_range(&spec, &h, &delta));
        let mut m = BdGModel {
            spec,
            h,
            delta,
            mu: 0.0,
            hamiltonian,
            caz_class: CazClass::D,
            pairing: None,
            kinetic: Kinetic::Laplacian,
        };
        m.caz_class = classify_symmetries(&m).caz_class;
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    /// Distance from the spectrum of `H` to zero.
    pub fn gap(&self) -> Result<f64> {
        Ok(self
            .hamiltonian
            .eigenvalues()?
            .iter()
            .fold(f64::INFINITY, |m, e| m.min(e.abs())))
    }

    /// The same model restricted to a cylinder of the given width: hoppings
    /// crossing the cut in direction 2 are removed.
    pub fn restrict_to_cylinder(&self, width: usize) -> Result<BdGModel> {
        if self.spec.geometry != Geometry::Torus {
            return Err(Error::NotTorus);
        }
        let cyl = LatticeSpec {
            n2: width,
            geometry: Geometry::Cylinder,
            ..self.spec
        };
        cyl.validate()?;
        let l = self.spec.fiber_l;
        let src = self.spec;
        let n = cyl.one_particle_dim();
        let pick = |m: &Array2<C64>| {
            let mut out = Array2::zeros((n, n));
            for s in 0..cyl.sites() {
                let (a1, a2) = cyl.coords(s);
                for t in 0..cyl.sites() {
                    let (b1, b2) = cyl.coords(t);
                    // keep only bonds that do not wrap in direction 2
                    let raw = a2 as i64 - b2 as i64;
                    let d = src.displacement(Direction::Two, a2 % src.n2, b2 % src.n2);
                    if d != Some(raw) {
                        continue;
                    }
                    let ss = src.site(a1, a2 % src.n2);
                    let tt = src.site(b1, b2 % src.n2);
                    for x in 0..l {
                        for y in 0..l {
                            out[[s * l + x, t * l + y]] = m[[ss * l + x, tt * l + y]];
                        }
                    }
                }
            }
            out
        };
        if width > src.n2 {
            return Err(Error::Parameter(format!(
                "cylinder width {width} exceeds the torus extent {}",
                src.n2
            )));
        }
        let mut m = BdGModel::from_parts(cyl, pick(&self.h), pick(&self.delta))?;
        m.mu = self.mu;
        m.pairing = self.pairing;
        m.kinetic = self.kinetic;
        Ok(m)
    }
}

/// Random model with hoppings and pairing of Chebyshev range at most
/// `range`: `h = X + X*` and `Δ = Y − Y^T` for local random `X`, `Y`.
pub fn random_local_model<R: Rng + ?Sized>(spec: LatticeSpec, range: usize, rng: &mut R) -> Result<BdGModel> {
    let l = spec.fiber_l;
    let n = spec.one_particle_dim();
    let mut x = Array2::<C64>::zeros((n, n));
    let mut y = Array2::<C64>::zeros((n, n));
    for s in 0..spec.sites() {
        for t in 0..spec.sites() {
            if spec.site_distance(s, t) > range {
                continue;
            }
            for a in 0..l {
                for b in 0..l {
                    let (i, j) = (s * l + a, t * l + b);
                    x[[i, j]] = C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                    y[[i, j]] = C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                }
            }
        }
    }
    let h = &x + &linalg::adjoint(&x);
    let delta = &y - &y.t();
    BdGModel::from_parts(spec, h, delta)
}

fn max_hopping_range(spec: &LatticeSpec, h: &Array2<C64>, delta: &Array2<C64>) -> usize {
    let l = spec.fiber_l;
    let mut r = 0;
    for s in 0..spec.sites() {
        for t in 0..spec.sites() {
            let d = spec.site_distance(s, t);
            if d <= r {
                continue;
            }
            let hit = (0..l).any(|a| {
                (0..l).any(|b| h[[s * l + a, t * l + b]] != ZERO || delta[[s * l + a, t * l + b]] != ZERO)
            });
            if hit {
                r = d;
            }
        }
    }
    r
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryReport {
    /// `‖K* conj(H) K + H‖_max`.
    pub phs_residual: f64,
    /// `max(‖R h R⁻¹ − conj(h)‖, ‖R Δ R⁻¹ − conj(Δ)‖)`.
    pub trs_residual: f64,
    /// `max(‖conj(h) − h‖, ‖conj(Δ) − Δ‖)`: plain complex conjugation.
    pub conj_residual: f64,
    /// Sign of the time reversal listed for the class.
    pub trs: Option<i8>,
    /// `‖[H, S³]‖_max`.
    pub u1_residual: f64,
    /// `‖[H, S^j]‖_max` for `j = 1, 2, 3`.
    pub su2_residuals: [f64; 3],
    /// `‖[H, Q]‖_max`.
    pub charge_residual: f64,
    pub phs: bool,
    pub u1: bool,
    pub su2: bool,
    pub charge: bool,
    pub caz_class: CazClass,
}

/// Max over site pairs of `‖F B − B F‖` for a fiber operator `F` acting on
/// the `(spin, ph)` fiber of every site.
fn fiber_commutator_residual(op: &BlockOperator, f: &Array2<C64>) -> f64 {
    let spec = op.spec();
    let w = 2 * spec.fiber_l;
    let d = op.data();
    let mut r = 0.0f64;
    for s in 0..spec.sites() {
        for t in 0..spec.sites() {
            let b = d.slice(ndarray::s![s * w..(s + 1) * w, t * w..(t + 1) * w]);
            if b.iter().all(|x| *x == ZERO) {
                continue;
            }
            let c = f.dot(&b) - b.dot(f);
            r = r.max(linalg::max_abs(&c));
        }
    }
    r
}

/// `diag(particle, hole)` on a single `(spin, ph)` fiber.
fn local_fiber(particle: &Array2<C64>, hole: &Array2<C64>) -> Array2<C64> {
    let l = particle.nrows();
    let mut out = Array2::zeros((2 * l, 2 * l));
    for a in 0..l {
        for b in 0..l {
            out[[2 * a, 2 * b]] = particle[[a, b]];
            out[[2 * a + 1, 2 * b + 1]] = hole[[a, b]];
        }
    }
    out
}

/// Residual of `R A R⁻¹ = conj(A)` on a one-particle matrix, `R` acting on spin.
fn trs_residual(spec: &LatticeSpec, a: &Array2<C64>, r: &Array2<C64>) -> f64 {
    let l = spec.fiber_l;
    let rinv = linalg::adjoint(r);
    let mut res = 0.0f64;
    for s in 0..spec.sites() {
        for t in 0..spec.sites() {
            let b = a.slice(ndarray::s![s * l..(s + 1) * l, t * l..(t + 1) * l]);
            if b.iter().all(|x| *x == ZERO) {
                continue;
            }
            let lhs = r.dot(&b).dot(&rinv);
            res = res.max(linalg::max_abs_diff(&lhs, &b.mapv(|x| x.conj())));
        }
    }
    res
}

/// Residual-based symmetry detection and the CAZ label for half-integer spin.
pub fn classify_symmetries(m: &BdGModel) -> SymmetryReport {
    let spec = &m.spec;
    let rep = SpinRep::from_dim(spec.fiber_l);
    let h = &m.hamiltonian;
    let phs_residual = ph_conjugate(h).add(h).max_abs();
    let spin_fiber = |j: usize| {
        let sj = rep.component(j);
        local_fiber(sj, &sj.t().mapv(|x| -x))
    };
    let su2_residuals = [1, 2, 3].map(|j| fiber_commutator_residual(h, &spin_fiber(j)));
    let one = linalg::identity(spec.fiber_l);
    let q = local_fiber(&one, &one.mapv(|x| -x));
    let charge_residual = fiber_commutator_residual(h, &q);
    let trs_residual = trs_residual(spec, &m.h, &rep.r).max(trs_residual(spec, &m.delta, &rep.r));
    let conj_residual = linalg::max_abs_diff(&linalg::conj(&m.h), &m.h)
        .max(linalg::max_abs_diff(&linalg::conj(&m.delta), &m.delta));
    let u1_residual = su2_residuals[2];
    let u1 = u1_residual <= SYMMETRY_TOL;
    let su2 = su2_residuals.iter().all(|&r| r <= SYMMETRY_TOL);
    let has_r = trs_residual <= SYMMETRY_TOL;
    // with U(1) a real H gives the reduced operator a chiral symmetry
    let has_k = u1 && conj_residual <= SYMMETRY_TOL;
    let (caz_class, trs) = if !rep.half_integer() {
        if has_r {
            (CazClass::BDI, Some(1))
        } else {
            (CazClass::D, None)
        }
    } else if su2 {
        if has_r {
            (CazClass::CI, Some(1))
        } else {
            (CazClass::C, None)
        }
    } else if u1 {
        if has_r || has_k {
            (CazClass::AIII, Some(-1))
        } else {
            (CazClass::A, None)
        }
    } else if has_r {
        (CazClass::DIII, Some(-1))
    } else {
        (CazClass::D, None)
    };
    SymmetryReport {
        phs_residual,
        trs_residual,
        conj_residual,
        trs,
        u1_residual,
        su2_residuals,
        charge_residual,
        phs: phs_residual <= 1e-12,
        u1,
        su2,
        charge: charge_residual <= SYMMETRY_TOL,
        caz_class,
    }
}

#[derive(Debug, Clone)]
pub struct Su2Reduction {
    pub h_red: BlockOperator,
    pub h_red_prime: BlockOperator,
    /// Copies of `(H_red, H_red')` contained in `H`.
    pub multiplicities: (usize, usize),
    /// `max(‖h − h_red ⊗ 1‖, ‖Δ − Δ_red ⊗ T‖)`.
    pub recovery_residual: f64,
    pub delta_red: Array2<C64>,
}

/// Spinless reduced lattice for a model.
pub fn reduced_spec(spec: &LatticeSpec) -> LatticeSpec {
    LatticeSpec { fiber_l: 1, ..*spec }
}

/// Splits an SU(2)-invariant model into its two reduced building blocks.
pub fn reduce_su2(m: &BdGModel) -> Result<Su2Reduction> {
    let report = classify_symmetries(m);
    let worst = report.su2_residuals.iter().cloned().fold(0.0, f64::max);
    if worst > SYMMETRY_TOL {
        return Err(Error::Symmetry {
            name: "SU(2)",
            residual: worst,
        });
    }
    let spec = m.spec;
    let l = spec.fiber_l;
    let rep = SpinRep::from_dim(l);
    let n = spec.sites();
    let h_red = Array2::from_shape_fn((n, n), |(s, t)| m.h[[s * l, t * l]]);
    let delta_red = Array2::from_shape_fn((n, n), |(s, t)| m.delta[[s * l, t * l + l - 1]]);
    let rebuilt_h = linalg::kron(h_red.view(), linalg::identity(l).view());
    let rebuilt_d = linalg::kron(delta_red.view(), rep.t_cross.view());
    let recovery_residual =
        linalg::max_abs_diff(&rebuilt_h, &m.h).max(linalg::max_abs_diff(&rebuilt_d, &m.delta));
    let sigma = if l % 2 == 0 { 1.0 } else { -1.0 };
    let rs = reduced_spec(&spec);
    let hh = linalg::conj(&h_red).mapv(|x| -x);
    let lower = linalg::conj(&delta_red).mapv(|x| x * sigma);
    let red = ph_assemble(&h_red, &delta_red, &lower, &hh);
    let red_p = ph_assemble(&h_red, &delta_red.mapv(|x| -x), &lower.mapv(|x| -x), &hh);
    let range = m.hamiltonian.range().unwrap_or(0);
    let multiplicities = if l % 2 == 0 { (l / 2, l / 2) } else { ((l + 1) / 2, (l - 1) / 2) };
    Ok(Su2Reduction {
        h_red: BlockOperator::hermitian(rs, red)?.with_range(range),
        h_red_prime: BlockOperator::hermitian(rs, red_p)?.with_range(range),
        multiplicities,
        recovery_residual,
        delta_red,
    })
}

/// The `L` spinless sectors of a U(1)-invariant model. Sector `l` couples
/// particles of spin index `l` with holes of spin index `L − 1 − l`, on which
/// `S³` takes the constant value `s − l`.
pub fn reduce_u1(m: &BdGModel) -> Result<Vec<BlockOperator>> {
    let report = classify_symmetries(m);
    if report.u1_residual > SYMMETRY_TOL {
        return Err(Error::Symmetry {
            name: "U(1)",
            residual: report.u1_residual,
        });
    }
    let spec = m.spec;
    let l = spec.fiber_l;
    let n = spec.sites();
    let [a, b, c, d] = ph_blocks(m.hamiltonian.data());
    let rs = reduced_spec(&spec);
    let range = m.hamiltonian.range().unwrap_or(0);
    (0..l)
        .map(|sector| {
            let lh = l - 1 - sector;
            let pick = |blk: &Array2<C64>, x: usize, y: usize| {
                Array2::from_shape_fn((n, n), |(s, t)| blk[[s * l + x, t * l + y]])
            };
            let data = ph_assemble(
                &pick(&a, sector, sector),
                &pick(&b, sector, lh),
                &pick(&c, lh, sector),
                &pick(&d, lh, lh),
            );
            Ok(BlockOperator::hermitian(rs, data)?.with_range(range))
        })
        .collect()
}

/// The odd particle-hole map `I = [[0, −1], [1, 0]]` on a spinless ph space.
pub fn odd_phs_conjugate(a: &BlockOperator) -> BlockOperator {
    // I* conj(A) I: entry (r, c) = sign(r) sign(c) conj(A)(r^1, c^1)
    let d = a.data();
    let n = d.nrows();
    let sign = |r: usize| if r & 1 == 0 { 1.0 } else { -1.0 };
    let out = Array2::from_shape_fn((n, n), |(r, c)| d[[r ^ 1, c ^ 1]].conj() * (sign(r) * sign(c)));
    let mut op = BlockOperator::new(*a.spec(), out);
    if a.is_hermitian() {
        op.mark_hermitian().expect("conjugation preserves hermiticity");
    }
    op
}
