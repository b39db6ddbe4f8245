//! Finite-volume lattice layer: geometry, index layout, magnetic
//! translations, the derivations `∇_j`, traces and spectral calculus.
//!
//! Index layout is fixed once for the whole crate: sites run with `n2` as the
//! slow index and `n1` as the fast one, followed by the spin fiber and then the
//! particle-hole grading as the innermost bit,
//!
//! ```text
//! index = ((n2 * N1 + n1) * L + l) * 2 + eta
//! ```
//!
//! Operators on the one-particle space (no particle-hole fiber) use the same
//! layout with the last factor dropped.

use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock};

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, Eigensystem, I, ONE, ZERO};
use crate::spin::SpinRep;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Geometry {
    Torus,
    /// Periodic in direction 1, open (Dirichlet) in direction 2.
    Cylinder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    One,
    Two,
}

impl Direction {
    pub fn index(self) -> usize {
        match self {
            Direction::One => 0,
            Direction::Two => 1,
        }
    }
}

/// Rational flux `qB / 2π` in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Flux {
    num: i64,
    den: i64,
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl Flux {
    pub const ZERO: Flux = Flux { num: 0, den: 1 };

    pub fn new(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(Error::Lattice("flux denominator is zero".into()));
        }
        let g = gcd(num, den).max(1);
        let s = if den < 0 { -1 } else { 1 };
        Ok(Flux {
            num: s * num / g,
            den: s * den / g,
        })
    }

    pub fn num(&self) -> i64 {
        self.num
    }

    pub fn den(&self) -> i64 {
        self.den
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    /// Whether `flux * n` is an integer.
    pub fn commensurate_with(&self, n: usize) -> bool {
        (self.num * n as i64) % self.den == 0
    }

    /// Whether `qB` lies in `{0, π/2, π, 3π/2}` modulo `2π`.
    pub fn allows_pairing(&self) -> bool {
        4 % self.den == 0
    }
}

impl fmt::Display for Flux {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Geometry, size, flux and fiber of a finite lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LatticeSpec {
    pub n1: usize,
    pub n2: usize,
    pub geometry: Geometry,
    /// Spin fiber dimension `L = 2s + 1`.
    pub fiber_l: usize,
    pub flux: Flux,
    /// Sign of the particle charge `q`; antiparticles carry the opposite sign.
    pub charge_sign: i8,
}

impl LatticeSpec {
    pub fn new(n1: usize, n2: usize, geometry: Geometry, fiber_l: usize, flux: Flux) -> Result<Self> {
        let spec = LatticeSpec {
            n1,
            n2,
            geometry,
            fiber_l,
            flux,
            charge_sign: 1,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn torus(n1: usize, n2: usize, fiber_l: usize) -> Result<Self> {
        Self::new(n1, n2, Geometry::Torus, fiber_l, Flux::ZERO)
    }

    pub fn cylinder(n1: usize, width: usize, fiber_l: usize) -> Result<Self> {
        Self::new(n1, width, Geometry::Cylinder, fiber_l, Flux::ZERO)
    }

    pub fn with_flux(mut self, flux: Flux) -> Result<Self> {
        self.flux = flux;
        self.validate()?;
        Ok(self)
    }

    pub fn with_fiber(mut self, fiber_l: usize) -> Result<Self> {
        self.fiber_l = fiber_l;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n1 == 0 || self.n2 == 0 || self.fiber_l == 0 {
            return Err(Error::Lattice(format!(
                "sizes must be positive (n1 = {}, n2 = {}, L = {})",
                self.n1, self.n2, self.fiber_l
            )));
        }
        if self.charge_sign != 1 && self.charge_sign != -1 {
            return Err(Error::Lattice("charge sign must be +1 or -1".into()));
        }
        if self.geometry == Geometry::Torus && !self.flux.commensurate_with(self.n1) {
            let smallest = (self.flux.den / gcd(self.flux.num, self.flux.den).max(1)) as usize;
            return Err(Error::IncommensurateFlux {
                flux: self.flux.to_string(),
                n1: self.n1,
                smallest_n1: smallest,
            });
        }
        Ok(())
    }

    pub fn sites(&self) -> usize {
        self.n1 * self.n2
    }

    /// Dimension of the one-particle space `ℓ²(Λ) ⊗ C^L`.
    pub fn one_particle_dim(&self) -> usize {
        self.sites() * self.fiber_l
    }

    /// Dimension of the particle-hole space.
    pub fn dim(&self) -> usize {
        2 * self.one_particle_dim()
    }

    pub fn site(&self, i1: usize, i2: usize) -> usize {
        debug_assert!(i1 < self.n1 && i2 < self.n2);
        i2 * self.n1 + i1
    }

    pub fn coords(&self, site: usize) -> (usize, usize) {
        (site % self.n1, site / self.n1)
    }

    pub fn index(&self, i1: usize, i2: usize, l: usize, eta: usize) -> usize {
        ((self.site(i1, i2) * self.fiber_l + l) << 1) | eta
    }

    /// Inverse of [`LatticeSpec::index`]: `(n1, n2, l, eta)`.
    pub fn unindex(&self, idx: usize) -> (usize, usize, usize, usize) {
        let eta = idx & 1;
        let p = idx >> 1;
        let l = p % self.fiber_l;
        let (i1, i2) = self.coords(p / self.fiber_l);
        (i1, i2, l, eta)
    }

    /// Number of sites in direction `j`.
    pub fn extent(&self, j: Direction) -> usize {
        match j {
            Direction::One => self.n1,
            Direction::Two => self.n2,
        }
    }

    pub fn periodic(&self, j: Direction) -> bool {
        match (self.geometry, j) {
            (Geometry::Torus, _) | (Geometry::Cylinder, Direction::One) => true,
            (Geometry::Cylinder, Direction::Two) => false,
        }
    }

    /// `qB` including the charge sign.
    pub fn qb(&self) -> f64 {
        self.charge_sign as f64 * 2.0 * PI * self.flux.value()
    }

    /// Commutation phases `(e^{-iqB}, e^{iqB})` of the translations on the
    /// particle and hole blocks, as produced by the Landau-gauge definitions.
    pub fn xi(&self) -> (C64, C64) {
        let p = C64::from_polar(1.0, -self.qb());
        (p, p.conj())
    }

    /// Signed displacement `n_j - n'_j`, minimal-image on periodic directions.
    /// Returns `None` when the displacement is exactly half a period, where the
    /// sign is ambiguous.
    pub fn displacement(&self, j: Direction, a: usize, b: usize) -> Option<i64> {
        let n = self.extent(j) as i64;
        let raw = a as i64 - b as i64;
        if !self.periodic(j) {
            return Some(raw);
        }
        let mut d = raw.rem_euclid(n);
        if 2 * d > n {
            d -= n;
        }
        if n % 2 == 0 && 2 * d.abs() == n {
            None
        } else {
            Some(d)
        }
    }

    /// Chebyshev distance between two sites using minimal images.
    pub fn site_distance(&self, s: usize, t: usize) -> usize {
        let (a1, a2) = self.coords(s);
        let (b1, b2) = self.coords(t);
        let d1 = self
            .displacement(Direction::One, a1, b1)
            .map(|d| d.unsigned_abs() as usize)
            .unwrap_or(self.n1 / 2);
        let d2 = self
            .displacement(Direction::Two, a2, b2)
            .map(|d| d.unsigned_abs() as usize)
            .unwrap_or(self.n2 / 2);
        d1.max(d2)
    }
}

/// Dense operator on the particle-hole lattice space.
#[derive(Debug, Clone)]
pub struct BlockOperator {
    spec: LatticeSpec,
    data: Array2<C64>,
    hermitian: bool,
    range: Option<usize>,
    eig: OnceLock<Arc<Eigensystem>>,
}

const HERMITIAN_TOL: f64 = 1e-12;

impl BlockOperator {
    pub fn new(spec: LatticeSpec, data: Array2<C64>) -> Self {
        assert_eq!(
            data.dim(),
            (spec.dim(), spec.dim()),
            "operator shape does not match lattice dimension"
        );
        BlockOperator {
            spec,
            data,
            hermitian: false,
            range: None,
            eig: OnceLock::new(),
        }
    }

    /// Wraps a matrix that must be hermitian up to `1e-12` relative to its
    /// largest entry; the stored data is exactly symmetrized.
    pub fn hermitian(spec: LatticeSpec, data: Array2<C64>) -> Result<Self> {
        let mut op = Self::new(spec, data);
        op.mark_hermitian()?;
        Ok(op)
    }

    pub fn mark_hermitian(&mut self) -> Result<()> {
        let r = linalg::hermitian_residual(&self.data);
        let scale = linalg::max_abs(&self.data).max(1.0);
        if r > HERMITIAN_TOL * scale {
            return Err(Error::NotHermitian(r));
        }
        let n = self.data.nrows();
        for i in 0..n {
            self.data[[i, i]].im = 0.0;
            for j in (i + 1)..n {
                let m = 0.5 * (self.data[[i, j]] + self.data[[j, i]].conj());
                self.data[[i, j]] = m;
                self.data[[j, i]] = m.conj();
            }
        }
        self.hermitian = true;
        self.eig = OnceLock::new();
        Ok(())
    }

    pub fn identity(spec: LatticeSpec) -> Self {
        let mut op = Self::new(spec, linalg::identity(spec.dim()));
        op.hermitian = true;
        op.range = Some(0);
        op
    }

    pub fn zeros(spec: LatticeSpec) -> Self {
        let mut op = Self::new(spec, Array2::zeros((spec.dim(), spec.dim())));
        op.hermitian = true;
        op.range = Some(0);
        op
    }

    /// Declares the finite range `R`: `A(n, n') = 0` for `dist(n, n') > R`.
    pub fn with_range(mut self, range: usize) -> Self {
        self.range = Some(range);
        self
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn data(&self) -> &Array2<C64> {
        &self.data
    }

    pub fn into_data(self) -> Array2<C64> {
        self.data
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn range(&self) -> Option<usize> {
        self.range
    }

    fn derived(&self, data: Array2<C64>, range: Option<usize>) -> Self {
        let mut op = Self::new(self.spec, data);
        op.range = range;
        op
    }

    fn assert_same(&self, other: &Self) {
        assert_eq!(self.spec, other.spec, "operators live on different lattices");
    }

    pub fn matmul(&self, other: &Self) -> Self {
        self.assert_same(other);
        let range = match (self.range, other.range) {
            (Some(a), Some(b)) => Some(a + b),
            _ => None,
        };
        self.derived(self.data.dot(&other.data), range)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.assert_same(other);
        let range = self.range.zip(other.range).map(|(a, b)| a.max(b));
        let mut op = self.derived(&self.data + &other.data, range);
        op.hermitian = self.hermitian && other.hermitian;
        op
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.assert_same(other);
        let range = self.range.zip(other.range).map(|(a, b)| a.max(b));
        let mut op = self.derived(&self.data - &other.data, range);
        op.hermitian = self.hermitian && other.hermitian;
        op
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut op = self.derived(self.data.mapv(|x| x * c), self.range);
        op.hermitian = self.hermitian && c.im == 0.0;
        op
    }

    pub fn adjoint(&self) -> Self {
        let mut op = self.derived(linalg::adjoint(&self.data), self.range);
        op.hermitian = self.hermitian;
        op
    }

    /// Entrywise complex conjugate.
    pub fn conj(&self) -> Self {
        let mut op = self.derived(linalg::conj(&self.data), self.range);
        op.hermitian = self.hermitian;
        op
    }

    pub fn commutator(&self, other: &Self) -> Self {
        self.matmul(other).sub(&other.matmul(self))
    }

    pub fn anticommutator(&self, other: &Self) -> Self {
        self.matmul(other).add(&other.matmul(self))
    }

    pub fn max_abs(&self) -> f64 {
        linalg::max_abs(&self.data)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        linalg::max_abs_diff(&self.data, &other.data)
    }

    pub fn hermitian_residual(&self) -> f64 {
        linalg::hermitian_residual(&self.data)
    }

    pub fn trace(&self) -> C64 {
        linalg::trace(&self.data)
    }

    /// Largest minimal-image distance carrying an entry above `tol`.
    pub fn measured_range(&self, tol: f64) -> usize {
        let w = 2 * self.spec.fiber_l;
        let sites = self.spec.sites();
        let mut r = 0;
        for s in 0..sites {
            for t in 0..sites {
                let d = self.spec.site_distance(s, t);
                if d <= r {
                    continue;
                }
                let hit = (0..w).any(|a| (0..w).any(|b| self.data[[s * w + a, t * w + b]].norm() > tol));
                if hit {
                    r = d;
                }
            }
        }
        r
    }

    /// The `2L × 2L` block `A(n, n')` between two sites.
    pub fn site_block(&self, s: usize, t: usize) -> Array2<C64> {
        let w = 2 * self.spec.fiber_l;
        self.data
            .slice(ndarray::s![s * w..(s + 1) * w, t * w..(t + 1) * w])
            .to_owned()
    }

    /// Cached eigendecomposition of a hermitian operator.
    pub fn eigensystem(&self) -> Result<Arc<Eigensystem>> {
        if !self.hermitian {
            return Err(Error::NotHermitian(self.hermitian_residual()));
        }
        if let Some(e) = self.eig.get() {
            return Ok(e.clone());
        }
        let e = Arc::new(linalg::eigh(&self.data)?);
        Ok(self.eig.get_or_init(|| e).clone())
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(self.eigensystem()?.values.to_vec())
    }

    /// `‖V D V* − A‖_max` relative to `‖A‖_max`.
    pub fn reconstruction_residual(&self) -> Result<f64> {
        let es = self.eigensystem()?;
        let rec = es.apply(|x| x);
        Ok(linalg::max_abs_diff(&rec, &self.data) / self.max_abs().max(f64::MIN_POSITIVE))
    }
}

/// `(U1, U2)`; `U2` is `None` on a cylinder.
///
/// `(u1 ψ)_n = ψ_{n−e1}`, `(u2 ψ)_n = e^{iqB n1} ψ_{n−e2}` on particles and
/// the complex conjugates on holes.
pub fn magnetic_translations(spec: &LatticeSpec) -> Result<(BlockOperator, Option<BlockOperator>)> {
    spec.validate()?;
    let qb = spec.qb();
    let u1 = translation(spec, Direction::One, |_, _| ONE);
    let u2 = match spec.geometry {
        Geometry::Torus => Some(translation(spec, Direction::Two, |i1, _| {
            C64::from_polar(1.0, qb * i1 as f64)
        })),
        Geometry::Cylinder => None,
    };
    Ok((u1, u2))
}

/// Unitary `ψ_n ↦ phase(n) ψ_{n−e_j}` on particles, conjugated on holes.
fn translation<F: Fn(usize, usize) -> C64>(spec: &LatticeSpec, j: Direction, phase: F) -> BlockOperator {
    let dim = spec.dim();
    let mut data = Array2::zeros((dim, dim));
    for i2 in 0..spec.n2 {
        for i1 in 0..spec.n1 {
            let (s1, s2) = match j {
                Direction::One => ((i1 + spec.n1 - 1) % spec.n1, i2),
                Direction::Two => (i1, (i2 + spec.n2 - 1) % spec.n2),
            };
            let ph = phase(i1, i2);
            for l in 0..spec.fiber_l {
                data[[spec.index(i1, i2, l, 0), spec.index(s1, s2, l, 0)]] = ph;
                data[[spec.index(i1, i2, l, 1), spec.index(s1, s2, l, 1)]] = ph.conj();
            }
        }
    }
    BlockOperator::new(*spec, data).with_range(1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceReport {
    /// `max_{j, n} ‖U_j A_{τ_j^{-1} ω} U_j^{-1} − A_ω‖_max` over the checked shifts.
    pub residual: f64,
    pub checked: usize,
}

/// Checks `U_j A_{(a, b)} U_j^{-1} = A_{(a, b) + e_j}` for every listed shift.
///
/// `family(a, b)` returns the operator for the configuration translated by
/// `(a, b)`; a periodic operator ignores its arguments.
pub fn check_covariance<F>(spec: &LatticeSpec, family: F, shifts: &[(usize, usize)]) -> Result<CovarianceReport>
where
    F: Fn(usize, usize) -> BlockOperator,
{
    if spec.geometry != Geometry::Torus {
        return Err(Error::NotTorus);
    }
    let (u1, u2) = magnetic_translations(spec)?;
    let u2 = u2.expect("torus has two translations");
    let mut residual = 0.0f64;
    for &(a, b) in shifts {
        let base = family(a, b);
        for (j, u) in [(Direction::One, &u1), (Direction::Two, &u2)] {
            let (na, nb) = match j {
                Direction::One => ((a + 1) % spec.n1, b),
                Direction::Two => (a, (b + 1) % spec.n2),
            };
            let conj = u.matmul(&base).matmul(&u.adjoint());
            residual = residual.max(conj.max_abs_diff(&family(na, nb)));
        }
    }
    Ok(CovarianceReport {
        residual,
        checked: shifts.len(),
    })
}

/// Periodic special case of [`check_covariance`].
pub fn check_covariance_periodic(a: &BlockOperator) -> Result<CovarianceReport> {
    check_covariance(a.spec(), |_, _| a.clone(), &[(0, 0)])
}

/// `∇_j A = i[A, X_j ⊗ 1]`, entrywise `−i d_j(n, n') A(n, n')` with the
/// minimal-image displacement `d_j` on periodic directions.
///
/// Entries at exactly half a period have no well-defined sign and are set to
/// zero, which keeps `∇` a `*`-derivation. Operators declaring a finite range
/// that reaches half a period are rejected instead.
pub fn derivation(a: &BlockOperator, j: Direction) -> Result<BlockOperator> {
    let spec = a.spec();
    if spec.periodic(j) {
        if let Some(r) = a.range() {
            let n = spec.extent(j);
            if 2 * r >= n {
                return Err(Error::Aliasing { range: r, period: n });
            }
        }
    }
    Ok(derivation_unchecked(a, j))
}

pub(crate) fn derivation_unchecked(a: &BlockOperator, j: Direction) -> BlockOperator {
    let spec = *a.spec();
    let mut out = a.data().clone();
    scale_by_displacement(&spec, &mut out, j, spec.dim() / spec.sites());
    let mut op = BlockOperator::new(spec, out);
    op.range = a.range();
    // −i d_j is antisymmetric, so hermiticity survives
    op.hermitian = a.is_hermitian();
    op
}

/// Multiplies every site block `(n, n')` of a matrix by `−i d_j(n, n')`.
/// `width` is the number of rows per site.
pub(crate) fn scale_by_displacement(spec: &LatticeSpec, m: &mut Array2<C64>, j: Direction, width: usize) {
    let sites = spec.sites();
    let coord = |s: usize| {
        let (i1, i2) = spec.coords(s);
        match j {
            Direction::One => i1,
            Direction::Two => i2,
        }
    };
    let table: Vec<C64> = {
        let n = spec.extent(j);
        let mut t = vec![ZERO; n * n];
        for x in 0..n {
            for y in 0..n {
                t[x * n + y] = match spec.displacement(j, x, y) {
                    Some(d) => -I * d as f64,
                    None => ZERO,
                };
            }
        }
        t
    };
    let n = spec.extent(j);
    for s in 0..sites {
        let cs = coord(s);
        for t in 0..sites {
            let f = table[cs * n + coord(t)];
            let mut blk = m.slice_mut(ndarray::s![s * width..(s + 1) * width, t * width..(t + 1) * width]);
            if f == ZERO {
                blk.fill(ZERO);
            } else {
                blk.mapv_inplace(|x| x * f);
            }
        }
    }
}

/// `𝒯(A) = Tr(A) / (n1 n2)`.
pub fn trace_per_volume(a: &BlockOperator) -> Result<C64> {
    if a.spec().geometry != Geometry::Torus {
        return Err(Error::NotTorus);
    }
    Ok(a.trace() / a.spec().sites() as f64)
}

/// Random operator whose site blocks vanish beyond Chebyshev distance
/// `range`. Entries are uniform in the unit square of the complex plane,
/// centred at zero.
pub fn random_local_operator<R: Rng + ?Sized>(spec: &LatticeSpec, range: usize, rng: &mut R) -> BlockOperator {
    let w = spec.dim() / spec.sites();
    let mut data = Array2::zeros((spec.dim(), spec.dim()));
    for s in 0..spec.sites() {
        for t in 0..spec.sites() {
            if spec.site_distance(s, t) > range {
                continue;
            }
            for a in 0..w {
                for b in 0..w {
                    data[[s * w + a, t * w + b]] = C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                }
            }
        }
    }
    BlockOperator::new(*spec, data).with_range(range)
}

/// `V f(D) V*` for a hermitian operator and a real function.
pub fn spectral_function<F: Fn(f64) -> f64>(a: &BlockOperator, f: F) -> Result<BlockOperator> {
    let es = a.eigensystem()?;
    let mut op = BlockOperator::new(*a.spec(), es.apply(f));
    op.hermitian = true;
    Ok(op)
}

/// Complex-valued spectral calculus, e.g. unitaries `exp(−2πi G(A))`.
pub fn spectral_function_complex<F: Fn(f64) -> C64>(a: &BlockOperator, f: F) -> Result<BlockOperator> {
    let es = a.eigensystem()?;
    Ok(BlockOperator::new(*a.spec(), es.apply_complex(f)))
}

/// Fermi-Dirac function `f_β(E) = 1 / (e^{βE} + 1)`; `β = ∞` gives `χ(E ≤ 0)`.
pub fn fermi_dirac(beta: f64, e: f64) -> f64 {
    if beta.is_infinite() {
        return if e <= 0.0 { 1.0 } else { 0.0 };
    }
    let x = beta * e;
    if x > 0.0 {
        let t = (-x).exp();
        t / (1.0 + t)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// Charge, spin and position operators on the particle-hole space.
#[derive(Debug, Clone)]
pub struct ChargeAndSpinOps {
    /// `diag(1, −1)` on the particle-hole fiber.
    pub q: BlockOperator,
    /// `S^j = diag(s^j, −(s^j)^T)` for `j = 1, 2, 3`.
    pub s: [BlockOperator; 3],
    /// Positions `X_j ⊗ 1₂` with coordinates `0..n_j − 1`.
    pub x: [BlockOperator; 2],
}

impl ChargeAndSpinOps {
    pub fn new(spec: &LatticeSpec) -> Self {
        let rep = SpinRep::from_dim(spec.fiber_l);
        let l = spec.fiber_l;
        let q = fiber_operator(spec, &linalg::identity(l), &(-linalg::identity(l)));
        let s = [&rep.s1, &rep.s2, &rep.s3].map(|m| fiber_operator(spec, m, &(-m.t().to_owned())));
        let x = [Direction::One, Direction::Two].map(|j| {
            let dim = spec.dim();
            let mut d = Array2::zeros((dim, dim));
            for idx in 0..dim {
                let (i1, i2, _, _) = spec.unindex(idx);
                let c = match j {
                    Direction::One => i1,
                    Direction::Two => i2,
                };
                d[[idx, idx]] = C64::new(c as f64, 0.0);
            }
            let mut op = BlockOperator::new(*spec, d).with_range(0);
            op.hermitian = true;
            op
        });
        ChargeAndSpinOps { q, s, x }
    }

    pub fn s3(&self) -> &BlockOperator {
        &self.s[2]
    }
}

/// `1_sites ⊗ diag(particle, hole)` for `L × L` fiber matrices.
pub fn fiber_operator(spec: &LatticeSpec, particle: &Array2<C64>, hole: &Array2<C64>) -> BlockOperator {
    let l = spec.fiber_l;
    let dim = spec.dim();
    let mut d = Array2::zeros((dim, dim));
    for s in 0..spec.sites() {
        for a in 0..l {
            for b in 0..l {
                d[[(s * l + a) * 2, (s * l + b) * 2]] = particle[[a, b]];
                d[[(s * l + a) * 2 + 1, (s * l + b) * 2 + 1]] = hole[[a, b]];
            }
        }
    }
    let mut op = BlockOperator::new(*spec, d).with_range(0);
    op.hermitian = linalg::hermitian_residual(&op.data) == 0.0;
    op
}

/// Interleaves four one-particle blocks into the particle-hole layout.
pub fn ph_assemble(a: &Array2<C64>, b: &Array2<C64>, c: &Array2<C64>, d: &Array2<C64>) -> Array2<C64> {
    let n = a.nrows();
    let mut out = Array2::zeros((2 * n, 2 * n));
    for p in 0..n {
        for q in 0..n {
            out[[2 * p, 2 * q]] = a[[p, q]];
            out[[2 * p, 2 * q + 1]] = b[[p, q]];
            out[[2 * p + 1, 2 * q]] = c[[p, q]];
            out[[2 * p + 1, 2 * q + 1]] = d[[p, q]];
        }
    }
    out
}

/// Splits a particle-hole matrix into its four one-particle blocks.
pub fn ph_blocks(m: &Array2<C64>) -> [Array2<C64>; 4] {
    let n = m.nrows() / 2;
    let pick = |ea: usize, eb: usize| Array2::from_shape_fn((n, n), |(p, q)| m[[2 * p + ea, 2 * q + eb]]);
    [pick(0, 0), pick(0, 1), pick(1, 0), pick(1, 1)]
}

/// The particle-hole swap `K`.
pub fn ph_swap(spec: &LatticeSpec) -> BlockOperator {
    let dim = spec.dim();
    let mut d = Array2::zeros((dim, dim));
    for p in 0..dim / 2 {
        d[[2 * p, 2 * p + 1]] = ONE;
        d[[2 * p + 1, 2 * p]] = ONE;
    }
    let mut op = BlockOperator::new(*spec, d).with_range(0);
    op.hermitian = true;
    op
}

/// `K* conj(A) K` computed by index permutation.
pub fn ph_conjugate(a: &BlockOperator) -> BlockOperator {
    let d = a.data();
    let n = d.nrows();
    let out = Array2::from_shape_fn((n, n), |(r, c)| d[[r ^ 1, c ^ 1]].conj());
    let mut op = BlockOperator::new(*a.spec(), out);
    op.range = a.range();
    op.hermitian = a.is_hermitian();
    op
}

/// A translation-invariant one-particle term `Σ_n |n⟩⟨n − (d1, d2)| ⊗ fiber`,
/// i.e. the monomial `V1^{d1} V2^{d2} ⊗ fiber` in the shifts.
#[derive(Debug, Clone)]
pub struct Hopping {
    pub d1: i64,
    pub d2: i64,
    pub fiber: Array2<C64>,
}

/// Builds a one-particle matrix from hoppings. Terms leaving an open
/// direction are dropped (Dirichlet). `phase(n1, n2, d1, d2)` dresses each
/// hopping into site `n`, e.g. with a Peierls factor.
pub fn one_particle_from_hoppings<F>(spec: &LatticeSpec, terms: &[Hopping], phase: F) -> Array2<C64>
where
    F: Fn(usize, usize, i64, i64) -> C64,
{
    let l = spec.fiber_l;
    let n = spec.one_particle_dim();
    let mut out = Array2::zeros((n, n));
    for i2 in 0..spec.n2 {
        for i1 in 0..spec.n1 {
            for t in terms {
                let Some(j1) = step(i1, -t.d1, spec.n1, spec.periodic(Direction::One)) else {
                    continue;
                };
                let Some(j2) = step(i2, -t.d2, spec.n2, spec.periodic(Direction::Two)) else {
                    continue;
                };
                let ph = phase(i1, i2, t.d1, t.d2);
                let s = spec.site(i1, i2);
                let u = spec.site(j1, j2);
                for a in 0..l {
                    for b in 0..l {
                        out[[s * l + a, u * l + b]] += ph * t.fiber[[a, b]];
                    }
                }
            }
        }
    }
    out
}

fn step(i: usize, d: i64, n: usize, periodic: bool) -> Option<usize> {
    let j = i as i64 + d;
    if periodic {
        Some(j.rem_euclid(n as i64) as usize)
    } else if j < 0 || j >= n as i64 {
        None
    } else {
        Some(j as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn index_is_bijective() {
        let spec = LatticeSpec::torus(3, 4, 2).unwrap();
        let mut seen = vec![false; spec.dim()];
        for i2 in 0..4 {
            for i1 in 0..3 {
                for l in 0..2 {
                    for eta in 0..2 {
                        let k = spec.index(i1, i2, l, eta);
                        assert!(!seen[k]);
                        seen[k] = true;
                        assert_eq!(spec.unindex(k), (i1, i2, l, eta));
                    }
                }
            }
        }
        assert!(seen.iter().all(|&b| b));
        assert_eq!(spec.dim(), 3 * 4 * 2 * 2);
    }

    #[test]
    fn incommensurate_flux_reports_smallest_n1() {
        let err = LatticeSpec::torus(4, 4, 1)
            .unwrap()
            .with_flux(Flux::new(1, 3).unwrap())
            .unwrap_err();
        assert_eq!(
            err,
            Error::IncommensurateFlux {
                flux: "1/3".into(),
                n1: 4,
                smallest_n1: 3
            }
        );
    }

    #[test]
    fn zero_flux_translations_commute() {
        let spec = LatticeSpec::torus(4, 4, 1).unwrap();
        let (u1, u2) = magnetic_translations(&spec).unwrap();
        let u2 = u2.unwrap();
        let lhs = u1.matmul(&u2);
        let rhs = u2.matmul(&u1);
        assert_eq!(lhs.max_abs_diff(&rhs), 0.0);
        // plain permutation matrices
        for row in u1.data().rows() {
            assert_eq!(row.iter().filter(|x| **x == ONE).count(), 1);
        }
    }

    #[test]
    fn quarter_flux_commutation_phase() {
        let spec = LatticeSpec::torus(4, 4, 1)
            .unwrap()
            .with_flux(Flux::new(1, 4).unwrap())
            .unwrap();
        let (u1, u2) = magnetic_translations(&spec).unwrap();
        let u2 = u2.unwrap();
        let group = u1.matmul(&u2).matmul(&u1.adjoint()).matmul(&u2.adjoint());
        let (xp, xh) = spec.xi();
        assert!((xp - C64::new(0.0, -1.0)).norm() < 1e-15);
        for idx in 0..spec.dim() {
            let want = if idx & 1 == 0 { xp } else { xh };
            for col in 0..spec.dim() {
                let v = group.data()[[idx, col]];
                let e = if col == idx { want } else { ZERO };
                assert!((v - e).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn derivation_of_shift() {
        let spec = LatticeSpec::torus(6, 6, 1).unwrap();
        let (u1, _) = magnetic_translations(&spec).unwrap();
        let d1 = derivation(&u1, Direction::One).unwrap();
        let d2 = derivation(&u1, Direction::Two).unwrap();
        assert!(d1.max_abs_diff(&u1.scale(-I)) < 1e-15);
        assert_eq!(d2.max_abs(), 0.0);
        let id = BlockOperator::identity(spec);
        assert_eq!(derivation(&id, Direction::One).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn derivation_rejects_aliasing_range() {
        let spec = LatticeSpec::torus(4, 4, 1).unwrap();
        let op = BlockOperator::identity(spec).with_range(2);
        assert!(matches!(derivation(&op, Direction::One), Err(Error::Aliasing { .. })));
    }

    #[test]
    fn trace_normalization() {
        let spec = LatticeSpec::torus(3, 5, 2).unwrap();
        let t = trace_per_volume(&BlockOperator::identity(spec)).unwrap();
        assert_eq!(t, c(4.0));
        let cyl = LatticeSpec::cylinder(3, 5, 2).unwrap();
        assert_eq!(trace_per_volume(&BlockOperator::identity(cyl)), Err(Error::NotTorus));
    }

    #[test]
    fn spectral_function_examples() {
        let spec = LatticeSpec::torus(1, 1, 1).unwrap();
        let a = BlockOperator::hermitian(spec, ndarray::array![[c(-1.0), ZERO], [ZERO, c(2.0)]]).unwrap();
        let p = spectral_function(&a, |e| if e <= 0.0 { 1.0 } else { 0.0 }).unwrap();
        assert!(linalg::max_abs_diff(p.data(), &ndarray::array![[ONE, ZERO], [ZERO, ZERO]]) < 1e-15);
        let id = spectral_function(&a, |e| e).unwrap();
        assert!(id.max_abs_diff(&a) < 1e-14);
        let z = BlockOperator::zeros(spec);
        let f = spectral_function(&z, |e| fermi_dirac(1.0, e)).unwrap();
        assert!((f.data()[[0, 0]] - c(0.5)).norm() < 1e-15);
        let nh = BlockOperator::new(spec, ndarray::array![[ZERO, ONE], [ZERO, ZERO]]);
        assert!(spectral_function(&nh, |e| e).is_err());
    }

    #[test]
    fn fermi_dirac_limits() {
        assert_eq!(fermi_dirac(1.0, 0.0), 0.5);
        assert_eq!(fermi_dirac(f64::INFINITY, -1.0), 1.0);
        assert_eq!(fermi_dirac(f64::INFINITY, 1.0), 0.0);
        assert!(fermi_dirac(1e4, 1.0) < 1e-300);
        assert!((fermi_dirac(2.0, 0.3) + fermi_dirac(2.0, -0.3) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn charge_and_spin_ops() {
        let spec = LatticeSpec::torus(2, 2, 2).unwrap();
        let ops = ChargeAndSpinOps::new(&spec);
        let q2 = ops.q.matmul(&ops.q);
        assert_eq!(q2.max_abs_diff(&BlockOperator::identity(spec)), 0.0);
        assert_eq!(ops.s3().commutator(&ops.q).max_abs(), 0.0);
        for x in &ops.x {
            assert!(x.data().iter().all(|v| v.im == 0.0));
        }
    }

    #[test]
    fn hoppings_respect_dirichlet_cut() {
        let spec = LatticeSpec::cylinder(3, 3, 1).unwrap();
        let one = ndarray::array![[ONE]];
        let terms = [Hopping { d1: 0, d2: 1, fiber: one }];
        let m = one_particle_from_hoppings(&spec, &terms, |_, _, _, _| ONE);
        // (V2 ψ)_n = ψ_{n − e2}: row n2 = 0 has no partner
        for i1 in 0..3 {
            assert_eq!(m.row(spec.site(i1, 0)).iter().filter(|x| **x != ZERO).count(), 0);
            assert_eq!(m[[spec.site(i1, 1), spec.site(i1, 0)]], ONE);
        }
    }
}
