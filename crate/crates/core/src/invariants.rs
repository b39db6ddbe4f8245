//! Fermi projections, the real-space Chern number, the Dirac-phase index and
//! the relations between Chern numbers imposed by symmetries.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::lattice::{derivation, ph_assemble, ph_conjugate, BlockOperator, Direction, Geometry, LatticeSpec};
use crate::linalg::{self, Eigensystem, I, ONE, ZERO};
use crate::models::{classify_symmetries, reduce_su2, reduce_u1, BdGModel, SYMMETRY_TOL};

/// Eigenvalues closer to zero than this make `χ(H ≤ 0)` ambiguous.
pub const ZERO_MODE_TOL: f64 = 1e-12;
/// Default bound on `𝒯(|∇P|²)` above which results are marked unreliable.
pub const LOC_METRIC_THRESHOLD: f64 = 1e3;
/// Singular values within this distance of ½ make the index unreliable.
pub const INDEX_BAND: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct FermiProjection {
    pub p: BlockOperator,
    /// Distance of the spectrum of `H` to zero.
    pub gap: f64,
    /// `𝒯(|∇₁P|² + |∇₂P|²)`.
    pub loc_metric: f64,
}

/// `𝒯` as `Tr / sites` without the torus check, for internal use on
/// projections of reduced or embedded models.
fn tau(spec: &LatticeSpec, tr: C64) -> C64 {
    tr / spec.sites() as f64
}

/// `P = χ(H ≤ 0)`; fails when `H` has eigenvalues at zero.
pub fn fermi_projection(h: &BlockOperator) -> Result<FermiProjection> {
    let es = h.eigensystem()?;
    let zeros: Vec<f64> = es.values.iter().cloned().filter(|e| e.abs() < ZERO_MODE_TOL).collect();
    if !zeros.is_empty() {
        return Err(Error::ZeroModes(zeros));
    }
    let gap = es.values.iter().fold(f64::INFINITY, |m, e| m.min(e.abs()));
    let mut p = BlockOperator::new(*h.spec(), es.apply(|e| if e <= 0.0 { 1.0 } else { 0.0 }));
    p.mark_hermitian()?;
    let loc_metric = localization_metric(&p)?;
    Ok(FermiProjection { p, gap, loc_metric })
}

pub fn model_fermi_projection(m: &BdGModel) -> Result<FermiProjection> {
    fermi_projection(&m.hamiltonian)
}

fn localization_metric(p: &BlockOperator) -> Result<f64> {
    let spec = p.spec();
    let mut total = 0.0;
    for j in [Direction::One, Direction::Two] {
        if !spec.periodic(j) {
            continue;
        }
        let d = derivation(p, j)?;
        total += d.data().iter().map(|x| x.norm_sqr()).sum::<f64>();
    }
    Ok(total / spec.sites() as f64)
}

impl FermiProjection {
    /// Residuals of `P² = P`, `P* = P` and `K conj(P) K = 1 − P`.
    pub fn residuals(&self) -> (f64, f64, f64) {
        let p = &self.p;
        let idem = p.matmul(p).max_abs_diff(p);
        let herm = p.hermitian_residual();
        let one = BlockOperator::identity(*p.spec());
        let phs = ph_conjugate(p).max_abs_diff(&one.sub(p));
        (idem, herm, phs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChernMethod {
    RealspaceTrace,
    FredholmIndex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChernResult {
    pub value: f64,
    pub method: ChernMethod,
    /// `|Ch(L) − Ch(L')|` for a second, smaller volume when available.
    pub finite_size_error: Option<f64>,
    pub snap: i64,
    pub deviation: f64,
    /// Imaginary part of the trace formula, zero up to rounding.
    pub imaginary_residue: f64,
    pub reliable: bool,
}

impl ChernResult {
    fn new(value: f64, method: ChernMethod, imaginary_residue: f64, reliable: bool) -> Self {
        let snap = value.round() as i64;
        ChernResult {
            value,
            method,
            finite_size_error: None,
            snap,
            deviation: (value - snap as f64).abs(),
            imaginary_residue,
            reliable,
        }
    }
}

/// `2πi 𝒯(P[∇₁P, ∇₂P])` as a complex number.
pub fn chern_trace(p: &BlockOperator) -> Result<C64> {
    let spec = p.spec();
    if spec.geometry != Geometry::Torus {
        return Err(Error::NotTorus);
    }
    let d1 = derivation(p, Direction::One)?;
    let d2 = derivation(p, Direction::Two)?;
    let a = d1.data().dot(d2.data());
    let b = d2.data().dot(d1.data());
    let t = linalg::trace_product(p.data(), &(a - b));
    Ok(tau(spec, t) * (2.0 * PI * I))
}

pub fn chern_realspace(fp: &FermiProjection) -> Result<ChernResult> {
    let c = chern_trace(&fp.p)?;
    Ok(ChernResult::new(
        c.re,
        ChernMethod::RealspaceTrace,
        c.im.abs(),
        fp.loc_metric.is_finite() && fp.loc_metric <= LOC_METRIC_THRESHOLD,
    ))
}

/// Real-space Chern number at `(n1, n2)` with the finite-size error taken
/// against a volume three quarters as large.
pub fn chern_realspace_two_volumes<F>(build: F, n1: usize, n2: usize) -> Result<ChernResult>
where
    F: Fn(usize, usize) -> Result<BdGModel>,
{
    let shrink = |n: usize| (3 * n / 4).max(4) & !1;
    let big = chern_realspace(&model_fermi_projection(&build(n1, n2)?)?)?;
    let small = chern_realspace(&model_fermi_projection(&build(shrink(n1), shrink(n2))?)?)?;
    Ok(ChernResult {
        finite_size_error: Some((big.value - small.value).abs()),
        ..big
    })
}

/// Minimal-image coordinate of site coordinate `i` relative to `origin`.
fn centered(i: usize, origin: f64, n: usize) -> f64 {
    let nf = n as f64;
    let x = i as f64 - origin;
    (x + nf / 2.0).rem_euclid(nf) - nf / 2.0
}

/// Periodic coordinate `(n / 2π) sin(2π x / n)`, equal to `x` near the origin.
fn periodic_coordinate(i: usize, origin: f64, n: usize) -> f64 {
    let nf = n as f64;
    nf / (2.0 * PI) * (2.0 * PI * (i as f64 - origin) / nf).sin()
}

/// The Dirac phase `F = (X₁ + iX₂)/|X₁ + iX₂|` as its diagonal.
///
/// The coordinates are the periodic ones, so `F` is continuous on the torus
/// and winds once around the origin. Its other three phase singularities sit
/// half a period away and are discarded by the localized count.
pub fn dirac_phase(spec: &LatticeSpec, origin: (f64, f64)) -> Result<Vec<C64>> {
    if !(origin.0 > 0.0 && origin.0 < 1.0 && origin.1 > 0.0 && origin.1 < 1.0) {
        return Err(Error::Parameter(format!(
            "origin offset {origin:?} must lie strictly inside (0, 1)^2"
        )));
    }
    let w = spec.dim() / spec.sites();
    Ok((0..spec.dim())
        .map(|idx| {
            let (i1, i2) = spec.coords(idx / w);
            let z = C64::new(
                periodic_coordinate(i1, origin.0, spec.n1),
                periodic_coordinate(i2, origin.1, spec.n2),
            );
            z / z.norm()
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct IndexDetails {
    pub result: ChernResult,
    /// Singular values of `PFP + (1 − P)` below ½.
    pub small_singular_values: Vec<f64>,
    /// Distance of the closest singular value to the threshold ½.
    pub threshold_margin: f64,
    /// Small right (kernel-side) and left (cokernel-side) singular vectors
    /// bound to the origin.
    pub kernel_at_origin: usize,
    pub cokernel_at_origin: usize,
}

/// Number of vectors in the column span of `vs` concentrated on the rows
/// flagged by `near`, and whether the split is clean.
pub(crate) fn localized_count(vs: &Array2<C64>, near: &[bool]) -> (usize, bool) {
    let k = vs.ncols();
    if k == 0 {
        return (0, true);
    }
    let weights = Array2::from_shape_fn((k, k), |(a, b)| {
        (0..vs.nrows())
            .filter(|&r| near[r])
            .map(|r| vs[[r, a]].conj() * vs[[r, b]])
            .sum::<C64>()
    });
    let ev = linalg::eigvalsh(&weights).expect("weight matrix is hermitian");
    let count = ev.iter().filter(|&&x| x > 0.5).count();
    let clean = ev.iter().all(|&x| !(0.25..=0.75).contains(&x));
    (count, clean)
}

/// Index of `PFP` from the compression `T = PFP + (1 − P)`.
///
/// On a torus every phase singularity of `F` binds its own small singular
/// values, so the plain count of kernel minus cokernel dimensions vanishes.
/// Restricting the count to vectors bound to the origin recovers the index:
/// `dim Ker_0 T − dim Ker_0 T*` over singular values below ½.
pub fn chern_index(fp: &FermiProjection, origin: (f64, f64)) -> Result<IndexDetails> {
    let p = &fp.p;
    let spec = *p.spec();
    if spec.geometry != Geometry::Torus {
        return Err(Error::NotTorus);
    }
    let f = dirac_phase(&spec, origin)?;
    let pd = p.data();
    let n = pd.nrows();
    let fp_ = Array2::from_shape_fn((n, n), |(r, c)| f[r] * pd[[r, c]]);
    let mut t = pd.dot(&fp_);
    for i in 0..n {
        for j in 0..n {
            t[[i, j]] -= pd[[i, j]];
        }
        t[[i, i]] += ONE;
    }
    let ta = linalg::adjoint(&t);
    let right = linalg::eigh(&ta.dot(&t))?;
    let left = linalg::eigh(&t.dot(&ta))?;
    let sv: Vec<f64> = right.values.iter().map(|&x| x.max(0.0).sqrt()).collect();
    let threshold_margin = sv.iter().fold(f64::INFINITY, |m, s| m.min((s - 0.5).abs()));
    let small_cols = |es: &Eigensystem| -> Vec<usize> { (0..n).filter(|&k| es.values[k] < 0.25).collect() };
    let w = n / spec.sites();
    let radius = spec.n1.min(spec.n2) as f64 / 4.0;
    let near: Vec<bool> = (0..n)
        .map(|r| {
            let (i1, i2) = spec.coords(r / w);
            let x = centered(i1, origin.0, spec.n1);
            let y = centered(i2, origin.1, spec.n2);
            (x * x + y * y).sqrt() <= radius
        })
        .collect();
    let rc = small_cols(&right);
    let lc = small_cols(&left);
    let (kernel_at_origin, clean_r) = localized_count(&right.vectors.select(ndarray::Axis(1), &rc), &near);
    let (cokernel_at_origin, clean_l) = localized_count(&left.vectors.select(ndarray::Axis(1), &lc), &near);
    let index = kernel_at_origin as i64 - cokernel_at_origin as i64;
    let reliable = threshold_margin > INDEX_BAND
        && clean_r
        && clean_l
        && rc.len() == lc.len()
        && fp.loc_metric <= LOC_METRIC_THRESHOLD;
    let mut result = ChernResult::new(index as f64, ChernMethod::FredholmIndex, 0.0, reliable);
    result.deviation = 0.0;
    Ok(IndexDetails {
        result,
        small_singular_values: rc.iter().map(|&k| sv[k]).collect(),
        threshold_margin,
        kernel_at_origin,
        cokernel_at_origin,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChernRelations {
    pub ch: f64,
    /// `(Ch(p), |Ch(P) − 2 Ch(p)|)` for charge-conserving models.
    pub charge: Option<(f64, f64)>,
    /// `(Ch(P_l), |Ch(P) − Σ_l Ch(P_l)|)` for U(1)-invariant models.
    pub u1: Option<(Vec<f64>, f64)>,
    /// `(Ch(P_red), |Ch(P) − L Ch(P_red)|)` for SU(2)-invariant models.
    pub su2: Option<(f64, f64)>,
    /// `|Ch(P)|` for models with time reversal.
    pub trs: Option<f64>,
}

impl ChernRelations {
    /// Largest deviation over the applicable relations.
    pub fn worst(&self) -> f64 {
        [
            self.charge.as_ref().map(|x| x.1),
            self.u1.as_ref().map(|x| x.1),
            self.su2.as_ref().map(|x| x.1),
        ]
        .into_iter()
        .flatten()
        .fold(0.0, f64::max)
    }
}

fn chern_of_hamiltonian(h: &BlockOperator) -> Result<f64> {
    Ok(chern_trace(&fermi_projection(h)?.p)?.re)
}

/// Evaluates the Chern number relations that the symmetries of `m` imply.
pub fn chern_relations(m: &BdGModel) -> Result<ChernRelations> {
    let report = classify_symmetries(m);
    let fp = model_fermi_projection(m)?;
    let ch = chern_trace(&fp.p)?.re;
    let charge = if report.charge {
        // p = χ(h ≤ 0) embedded in the particle block
        let pb = crate::lattice::ph_blocks(fp.p.data());
        let zero = Array2::zeros(pb[0].dim());
        let emb = BlockOperator::new(m.spec, ph_assemble(&pb[0], &zero, &zero, &zero));
        let cp = chern_trace(&emb)?.re;
        Some((cp, (ch - 2.0 * cp).abs()))
    } else {
        None
    };
    let u1 = if report.u1 {
        let sectors = reduce_u1(m)?;
        let values = sectors.iter().map(chern_of_hamiltonian).collect::<Result<Vec<f64>>>()?;
        let dev = (ch - values.iter().sum::<f64>()).abs();
        Some((values, dev))
    } else {
        None
    };
    let su2 = if report.su2 {
        let red = reduce_su2(m)?;
        let cr = chern_of_hamiltonian(&red.h_red)?;
        Some((cr, (ch - m.spec.fiber_l as f64 * cr).abs()))
    } else {
        None
    };
    let trs = (report.trs_residual <= SYMMETRY_TOL).then_some(ch.abs());
    Ok(ChernRelations {
        ch,
        charge,
        u1,
        su2,
        trs,
    })
}

/// `Ch(χ(H ≤ E))` on a grid of energies from one diagonalization, written
/// in the eigenbasis of `H` with `∇_j H` as the only nonlocal input:
/// `Ch(E) = 2πi 𝒯(Σ_{a ≤ E < b} (V₁)_{ab}(V₂)_{ba} − (V₂)_{ab}(V₁)_{ba}) / (E_a − E_b)²`.
pub fn chern_energy_resolved(h: &BlockOperator, energies: &[f64]) -> Result<Vec<f64>> {
    let spec = *h.spec();
    if spec.geometry != Geometry::Torus {
        return Err(Error::NotTorus);
    }
    let es = h.eigensystem()?;
    let v1 = es.to_eigenbasis(derivation(h, Direction::One)?.data());
    let v2 = es.to_eigenbasis(derivation(h, Direction::Two)?.data());
    let e = &es.values;
    let n = e.len();
    // contribution c_a of each occupied level given the set of empty ones is
    // not additive, so accumulate over pairs (a occupied, b empty)
    let mut out = Vec::with_capacity(energies.len());
    for &mu in energies {
        let k = e.iter().take_while(|&&x| x <= mu).count();
        let mut acc = ZERO;
        for a in 0..k {
            for b in k..n {
                let de = e[a] - e[b];
                if de.abs() < 1e-13 {
                    continue;
                }
                acc += (v1[[a, b]] * v2[[b, a]] - v2[[a, b]] * v1[[b, a]]) / (de * de);
            }
        }
        out.push((tau(&spec, acc) * (2.0 * PI * I)).re);
    }
    Ok(out)
}
