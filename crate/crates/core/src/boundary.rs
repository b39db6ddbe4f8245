//! Half-space physics on a cylinder: boundary traces, edge currents, the
//! winding number of `exp(−2πi G(Ĥ))`, the quarter-plane index and thermal
//! and thermoelectric edge currents.
//!
//! Boundary traces `𝒯̂ = 𝒯₁ Tr₂` average over Bloch twists `θ` of the
//! periodic direction: the cylinder of `n1` sites is a unit cell, bonds
//! crossing its seam pick up `e^{iθ}`, and `∇₁` acts on each fiber as
//! `−i[X₁, ·] + n1 ∂_θ`. Products, spectral functions and derivations of
//! spectral functions are computed fiberwise, the last by divided
//! differences. One twist is the plain periodic cylinder.

use std::f64::consts::PI;

use ndarray::{Array2, Axis};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::invariants::{localized_count, ChernMethod, ChernResult, INDEX_BAND};
use crate::lattice::{derivation, fermi_dirac, BlockOperator, Direction, Geometry, LatticeSpec};
use crate::linalg::{self, Eigensystem, I, ONE, ZERO};
use crate::models::{classify_symmetries, reduce_u1, BdGModel};

/// Narrowest cylinder accepted.
pub const MIN_WIDTH: usize = 8;
/// Approximate length of the ring on which the quarter-plane index is
/// evaluated.
pub const INDEX_RING_SITES: usize = 64;
/// Largest `T / gap` accepted by the thermal edge current.
pub const MAX_THERMAL_T_OVER_GAP: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct HalfSpaceModel {
    pub bulk: BdGModel,
    pub width: usize,
    /// The bulk restricted to the cylinder; its Hamiltonian is `Ĥ`.
    pub cylinder: BdGModel,
    /// Rows `n₂ < depth` enter `𝒯̂`; defaults to half the width so that only
    /// the edge at `n₂ = 0` is counted.
    pub boundary_trace_depth: usize,
    /// Number of Bloch twists averaged in `𝒯̂`.
    pub twists: usize,
    /// Distance from zero to the bulk spectrum.
    pub bulk_gap: f64,
}

/// Restricts a gapped bulk model on a torus to a cylinder of `width` rows.
pub fn build_half_space(bulk: &BdGModel, width: usize) -> Result<HalfSpaceModel> {
    if bulk.spec.geometry != Geometry::Torus {
        return Err(Error::NotTorus);
    }
    if width < MIN_WIDTH {
        return Err(Error::Parameter(format!(
            "cylinder width {width} is below {MIN_WIDTH}; the two edges would tunnel"
        )));
    }
    let cylinder = bulk.restrict_to_cylinder(width)?;
    let samples = 48usize.div_ceil(bulk.spec.n1).max(1);
    let mut bulk_gap = f64::INFINITY;
    for k in 0..samples {
        let theta = 2.0 * PI * k as f64 / samples as f64;
        let ev = linalg::eigvalsh(&twisted(&bulk.hamiltonian, theta)?)?;
        bulk_gap = ev.iter().fold(bulk_gap, |m, e| m.min(e.abs()));
    }
    if bulk_gap < 1e-8 {
        return Err(Error::Window(format!("bulk spectrum reaches zero (gap {bulk_gap:.2e})")));
    }
    Ok(HalfSpaceModel {
        bulk: bulk.clone(),
        width,
        cylinder,
        boundary_trace_depth: width / 2,
        twists: 1,
        bulk_gap,
    })
}

impl HalfSpaceModel {
    pub fn h_hat(&self) -> &BlockOperator {
        &self.cylinder.hamiltonian
    }

    pub fn with_twists(mut self, twists: usize) -> Self {
        self.twists = twists.max(1);
        self
    }

    pub fn with_depth(mut self, depth: usize) -> Result<Self> {
        if depth == 0 || depth > self.width {
            return Err(Error::Parameter(format!("depth {depth} outside 1..={}", self.width)));
        }
        self.boundary_trace_depth = depth;
        Ok(self)
    }

    fn check_window(&self, support: f64) -> Result<()> {
        if !(support < self.bulk_gap) {
            return Err(Error::Window(format!(
                "support half-width {support:.4} reaches the bulk gap {:.4}",
                self.bulk_gap
            )));
        }
        Ok(())
    }
}

/// `A` with the bonds crossing the seam of direction 1 multiplied by
/// `e^{±iθ}`. Requires a declared range below half the period.
pub fn twisted(op: &BlockOperator, theta: f64) -> Result<Array2<C64>> {
    let spec = op.spec();
    let n1 = spec.n1;
    match op.range() {
        Some(r) if 2 * r < n1 => {}
        Some(r) => return Err(Error::Aliasing { range: r, period: n1 }),
        None => return Err(Error::Parameter("twisting needs an operator of finite range".into())),
    }
    let mut out = op.data().clone();
    if theta == 0.0 {
        return Ok(out);
    }
    let w = spec.dim() / spec.sites();
    let phase = C64::from_polar(1.0, theta);
    for s in 0..spec.sites() {
        let (a1, _) = spec.coords(s);
        for t in 0..spec.sites() {
            let (b1, _) = spec.coords(t);
            let Some(d) = spec.displacement(Direction::One, a1, b1) else {
                continue;
            };
            let wrap = (a1 as i64 - b1 as i64 - d) / n1 as i64;
            if wrap == 0 {
                continue;
            }
            let f = if wrap > 0 { phase.conj() } else { phase };
            out.slice_mut(ndarray::s![s * w..(s + 1) * w, t * w..(t + 1) * w])
                .mapv_inplace(|x| x * f);
        }
    }
    Ok(out)
}

/// Eigensystem and `∇₁` of the Hamiltonian on one twisted fiber.
struct Fiber {
    es: Eigensystem,
    dh: Array2<C64>,
}

fn fiber(op: &BlockOperator, theta: f64) -> Result<Fiber> {
    let data = twisted(op, theta)?;
    let es = linalg::eigh(&data)?;
    let mut tw = BlockOperator::new(*op.spec(), data);
    if let Some(r) = op.range() {
        tw = tw.with_range(r);
    }
    let dh = derivation(&tw, Direction::One)?.into_data();
    Ok(Fiber { es, dh })
}

fn twist_angles(k: usize) -> impl Iterator<Item = f64> {
    (0..k).map(move |j| 2.0 * PI * j as f64 / k as f64)
}

/// Diagonal row weights `D` for `Tr(D ·)`: rows with `n₂ < depth`, scaled
/// by `fiber_weight` of the `(spin, ph)` index.
fn row_weights<F: Fn(usize, usize) -> f64>(spec: &LatticeSpec, depth: usize, fiber_weight: F) -> Vec<f64> {
    (0..spec.dim())
        .map(|r| {
            let (_, i2, l, eta) = spec.unindex(r);
            if i2 < depth {
                fiber_weight(l, eta)
            } else {
                0.0
            }
        })
        .collect()
}

/// `(1/K) Σ_θ (1/n1) Tr(D f(Ĥ_θ) ∇₁Ĥ_θ)` for several functions `f` at
/// once, each assumed to vanish outside `(−support, support)`.
fn edge_traces(op: &BlockOperator, d: &[f64], twists: usize, support: f64, fs: &[&dyn Fn(f64) -> f64]) -> Result<Vec<f64>> {
    let n1 = op.spec().n1 as f64;
    let mut acc = vec![0.0; fs.len()];
    for theta in twist_angles(twists) {
        let fb = fiber(op, theta)?;
        let keep: Vec<usize> = (0..fb.es.values.len()).filter(|&a| fb.es.values[a].abs() < support).collect();
        if keep.is_empty() {
            continue;
        }
        let vs = fb.es.vectors.select(Axis(1), &keep);
        // (v_a* ∇H D v_a) for each kept a
        let mut dv = vs.clone();
        for (r, mut row) in dv.axis_iter_mut(Axis(0)).enumerate() {
            row.mapv_inplace(|x| x * d[r]);
        }
        let y = fb.dh.dot(&dv);
        let diag: Vec<f64> = (0..keep.len())
            .map(|c| vs.column(c).iter().zip(y.column(c)).map(|(v, w)| (v.conj() * w).re).sum())
            .collect();
        for (k, f) in fs.iter().enumerate() {
            acc[k] += keep.iter().zip(&diag).map(|(&a, x)| f(fb.es.values[a]) * x).sum::<f64>();
        }
    }
    Ok(acc.into_iter().map(|x| x / (twists as f64 * n1)).collect())
}

/// Smooth step equal to 1 for `t ≤ 0` and 0 for `t ≥ 1`, with
/// `step(t) + step(1 − t) = 1`.
fn smooth_step(t: f64) -> f64 {
    let psi = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
    let a = psi(1.0 - t);
    let b = psi(t);
    if a + b == 0.0 {
        0.0
    } else {
        a / (a + b)
    }
}

fn bump(x: f64) -> f64 {
    if x.abs() < 1.0 {
        (-1.0 / (1.0 - x * x)).exp()
    } else {
        0.0
    }
}

/// Composite Simpson rule with `n` (even) intervals.
fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WindowShape {
    /// `g(E) ∝ exp(−1/(1 − (E/a)²))` on `|E| < a`, normalized to `∫g = 1`.
    Bump { half_width: f64 },
    /// `g_β(E) = E (f_β(E) − f_∞(E)) ρ(E)` with `ρ ≡ 1` on `|E| ≤ inner`
    /// and `ρ = 0` beyond `outer`.
    Thermal { beta: f64, inner: f64, outer: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeWindow {
    pub shape: WindowShape,
    /// `∫ bump` over `(−1, 1)` for the bump, unused otherwise.
    norm: f64,
}

impl EdgeWindow {
    pub fn bump(half_width: f64) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::Parameter(format!("window half-width must be positive, got {half_width}")));
        }
        Ok(EdgeWindow {
            shape: WindowShape::Bump { half_width },
            norm: simpson(bump, -1.0, 1.0, 4000),
        })
    }

    pub fn thermal(beta: f64, inner: f64, outer: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Parameter(format!("beta must be positive and finite, got {beta}")));
        }
        if !(inner > 0.0 && outer > inner) {
            return Err(Error::Parameter(format!("cutoff needs 0 < inner < outer, got {inner}, {outer}")));
        }
        Ok(EdgeWindow {
            shape: WindowShape::Thermal { beta, inner, outer },
            norm: 1.0,
        })
    }

    /// Half-width of the support.
    pub fn support(&self) -> f64 {
        match self.shape {
            WindowShape::Bump { half_width } => half_width,
            WindowShape::Thermal { outer, .. } => outer,
        }
    }

    /// The cutoff `ρ` of a thermal window, 1 for the bump.
    pub fn rho(&self, e: f64) -> f64 {
        match self.shape {
            WindowShape::Bump { .. } => 1.0,
            WindowShape::Thermal { inner, outer, .. } => smooth_step((e.abs() - inner) / (outer - inner)),
        }
    }

    pub fn g(&self, e: f64) -> f64 {
        match self.shape {
            WindowShape::Bump { half_width } => bump(e / half_width) / (half_width * self.norm),
            WindowShape::Thermal { beta, .. } => {
                // E (f_β(E) − χ(E ≤ 0)) = |E| f_β(|E|)
                let x = e.abs();
                x * fermi_dirac(beta, x) * self.rho(e)
            }
        }
    }

    /// `G(E) = ∫_{−∞}^E g`.
    pub fn antiderivative(&self, e: f64) -> f64 {
        let a = self.support();
        if e <= -a {
            return 0.0;
        }
        let top = self.integral();
        if e >= a {
            return top;
        }
        simpson(|x| self.g(x), -a, e, 2000)
    }

    pub fn integral(&self) -> f64 {
        let a = self.support();
        simpson(|x| self.g(x), -a, a, 4000)
    }
}

/// `ĵ(g) = −½ 𝒯̂(g(Ĥ) ∇₁Ĥ)`.
pub fn edge_current(hs: &HalfSpaceModel, w: &EdgeWindow) -> Result<f64> {
    hs.check_window(w.support())?;
    let d = row_weights(&hs.cylinder.spec, hs.boundary_trace_depth, |_, _| 1.0);
    let g = |e: f64| w.g(e);
    Ok(-0.5 * edge_traces(hs.h_hat(), &d, hs.twists, w.support(), &[&g])?[0])
}

/// Contribution of each row `n₂` to `−½ 𝒯₁(g(Ĥ) ∇₁Ĥ)` across the full width.
pub fn edge_current_profile(hs: &HalfSpaceModel, w: &EdgeWindow) -> Result<Vec<f64>> {
    hs.check_window(w.support())?;
    let spec = hs.cylinder.spec;
    let n1 = spec.n1 as f64;
    let mut rows = vec![0.0; spec.dim()];
    for theta in twist_angles(hs.twists) {
        let fb = fiber(hs.h_hat(), theta)?;
        let keep: Vec<usize> = (0..fb.es.values.len()).filter(|&a| fb.es.values[a].abs() < w.support()).collect();
        if keep.is_empty() {
            continue;
        }
        let vs = fb.es.vectors.select(Axis(1), &keep);
        let y = fb.dh.dot(&vs);
        for (c, &a) in keep.iter().enumerate() {
            let g = w.g(fb.es.values[a]);
            for (r, acc) in rows.iter_mut().enumerate() {
                *acc += g * (y[[r, c]].conj() * vs[[r, c]]).re;
            }
        }
    }
    let mut out = vec![0.0; hs.width];
    for (r, x) in rows.into_iter().enumerate() {
        out[spec.unindex(r).1] += -0.5 * x / (hs.twists as f64 * n1);
    }
    Ok(out)
}

/// `−½ 𝒯̂(χ_Δ(Ĥ) ∇₁Ĥ)` for `Δ = [−half_width, half_width]`, which tends to
/// `|Δ| σ` for long cylinders.
pub fn edge_current_indicator(hs: &HalfSpaceModel, half_width: f64) -> Result<f64> {
    hs.check_window(half_width)?;
    let d = row_weights(&hs.cylinder.spec, hs.boundary_trace_depth, |_, _| 1.0);
    let chi = |e: f64| if e.abs() <= half_width { 1.0 } else { 0.0 };
    Ok(-0.5 * edge_traces(hs.h_hat(), &d, hs.twists, half_width * (1.0 + 1e-12), &[&chi])?[0])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Winding {
    /// `−i 𝒯̂((Û* − 1) ∇₁Û)`, oriented so that it equals `4π ĵ(g)`.
    pub value: f64,
    /// `i 𝒯̂((Û* − 1) ∇₁Û)` as evaluated.
    pub raw: f64,
    pub snap: i64,
    pub imaginary_residue: f64,
}

/// Winding number of `Û = exp(−2πi G(Ĥ))`. Since
/// `𝒯̂(Û*∇₁Û) = −2πi 𝒯̂(g(Ĥ)∇₁Ĥ)` and `𝒯̂(∇₁(Û − 1)) = 0`, the expression
/// `i 𝒯̂((Û* − 1)∇₁Û)` equals `−4π ĵ(g)`; the reported value flips it.
pub fn winding_number(hs: &HalfSpaceModel, w: &EdgeWindow) -> Result<Winding> {
    let support = w.support();
    hs.check_window(support)?;
    let op = hs.h_hat();
    let d = row_weights(&hs.cylinder.spec, hs.boundary_trace_depth, |_, _| 1.0);
    let n1 = hs.cylinder.spec.n1 as f64;
    let u = |e: f64| C64::from_polar(1.0, -2.0 * PI * w.antiderivative(e));
    let mut acc = ZERO;
    for theta in twist_angles(hs.twists) {
        let fb = fiber(op, theta)?;
        let e = &fb.es.values;
        let v = &fb.es.vectors;
        let keep: Vec<usize> = (0..e.len()).filter(|&a| e[a].abs() < support).collect();
        if keep.is_empty() {
            continue;
        }
        let vs = v.select(Axis(1), &keep);
        // rows a ∈ S of V*∇H V and columns a ∈ S of V* D V
        let v1 = linalg::adjoint(&vs).dot(&fb.dh).dot(v);
        let mut dvs = vs.clone();
        for (r, mut row) in dvs.axis_iter_mut(Axis(0)).enumerate() {
            row.mapv_inplace(|x| x * d[r]);
        }
        let z = linalg::adjoint(v).dot(&dvs);
        let ub: Vec<C64> = e.iter().map(|&x| if x.abs() < support { u(x) } else { ONE }).collect();
        for (c, &a) in keep.iter().enumerate() {
            let mut row = ZERO;
            for b in 0..e.len() {
                let de = e[a] - e[b];
                let dd = if de.abs() > 1e-12 {
                    (ub[a] - ub[b]) / de
                } else {
                    ub[a] * (-2.0 * PI * w.g(e[a])) * I
                };
                row += dd * v1[[c, b]] * z[[b, c]];
            }
            acc += (ub[a].conj() - ONE) * row;
        }
    }
    let value = I * acc / (hs.twists as f64 * n1);
    Ok(Winding {
        value: -value.re,
        raw: value.re,
        snap: (-value.re).round() as i64,
        imaginary_residue: value.im.abs(),
    })
}

#[derive(Debug, Clone)]
pub struct QuarterPlaneIndex {
    pub result: ChernResult,
    pub small_singular_values: Vec<f64>,
    pub threshold_margin: f64,
}

/// Index of `Π Û Π` on a ring of `K · n1` sites whose Bloch fibers are the
/// `K` twisted cylinders, with `K` even, at least 4 and chosen so the ring
/// holds about [`INDEX_RING_SITES`] sites. It equals `−Ind(Π Û* Π)` and
/// carries the orientation of [`Winding::value`]. `Π` keeps the half ring of cells
/// `0 ≤ m < twists/2` and `Û` is cut to the rows `n₂ < depth`, so only the
/// lower edge enters; small singular vectors are counted when bound to the
/// end of `Π` at `n₁ = 0`. The twist count of `hs` is not used.
pub fn quarter_plane_index(hs: &HalfSpaceModel, w: &EdgeWindow) -> Result<QuarterPlaneIndex> {
    let support = w.support();
    hs.check_window(support)?;
    let spec = hs.cylinder.spec;
    let k = INDEX_RING_SITES.div_ceil(spec.n1).max(4).next_multiple_of(2);
    let sel: Vec<usize> = (0..spec.dim()).filter(|&r| spec.unindex(r).1 < hs.boundary_trace_depth).collect();
    let ns = sel.len();
    let cells = k / 2;
    // B_Δ = (1/K) Σ_θ (Û_θ − 1)[sel, sel] e^{iθΔ} for Δ = m' − m
    let mut blocks = vec![Array2::<C64>::zeros((ns, ns)); 2 * cells - 1];
    for theta in twist_angles(k) {
        let es = linalg::eigh(&twisted(hs.h_hat(), theta)?)?;
        let keep: Vec<usize> = (0..es.values.len()).filter(|&a| es.values[a].abs() < support).collect();
        if keep.is_empty() {
            continue;
        }
        let vs = es.vectors.select(Axis(1), &keep).select(Axis(0), &sel);
        let mut scaled = vs.clone();
        for (c, &a) in keep.iter().enumerate() {
            let f = C64::from_polar(1.0, -2.0 * PI * w.antiderivative(es.values[a])) - ONE;
            scaled.column_mut(c).mapv_inplace(|x| x * f);
        }
        let f = scaled.dot(&linalg::adjoint(&vs));
        for (j, b) in blocks.iter_mut().enumerate() {
            let delta = j as f64 - (cells as f64 - 1.0);
            let ph = C64::from_polar(1.0 / k as f64, theta * delta);
            b.scaled_add(ph, &f);
        }
    }
    let m_dim = cells * ns;
    let mut m = linalg::identity(m_dim);
    for a in 0..cells {
        for b in 0..cells {
            let blk = &blocks[b + cells - 1 - a];
            m.slice_mut(ndarray::s![a * ns..(a + 1) * ns, b * ns..(b + 1) * ns])
                .scaled_add(ONE, blk);
        }
    }
    let ma = linalg::adjoint(&m);
    let right = linalg::eigh(&ma.dot(&m))?;
    let left = linalg::eigh(&m.dot(&ma))?;
    let sv: Vec<f64> = right.values.iter().map(|&x| x.max(0.0).sqrt()).collect();
    let threshold_margin = sv.iter().fold(f64::INFINITY, |acc, s| acc.min((s - 0.5).abs()));
    let small = |es: &Eigensystem| -> Vec<usize> { (0..m_dim).filter(|&j| es.values[j] < 0.25).collect() };
    let ring = k * spec.n1;
    let near: Vec<bool> = (0..m_dim)
        .map(|r| {
            let i1 = (r / ns) * spec.n1 + spec.unindex(sel[r % ns]).0;
            4 * i1 < ring
        })
        .collect();
    let (rc, lc) = (small(&right), small(&left));
    let (kernel, clean_r) = localized_count(&right.vectors.select(Axis(1), &rc), &near);
    let (cokernel, clean_l) = localized_count(&left.vectors.select(Axis(1), &lc), &near);
    let index = kernel as f64 - cokernel as f64;
    let reliable = threshold_margin > INDEX_BAND && clean_r && clean_l;
    Ok(QuarterPlaneIndex {
        result: ChernResult {
            value: index,
            method: ChernMethod::FredholmIndex,
            finite_size_error: None,
            snap: index as i64,
            deviation: 0.0,
            imaginary_residue: 0.0,
            reliable,
        },
        small_singular_values: rc.iter().map(|&j| sv[j]).collect(),
        threshold_margin,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpinEdgeCurrent {
    /// `−½ 𝒯̂(g(Ĥ)(S³)² ∇₁Ĥ)`.
    pub value: f64,
    /// `ĵ_l = −½ 𝒯̂(g(Ĥ_l) ∇₁Ĥ_l)` per U(1) sector.
    pub sector_currents: Vec<f64>,
    /// `(S³)²` on each sector.
    pub sector_weights: Vec<f64>,
    /// `Σ_l (S³)²_l ĵ_l`.
    pub sector_sum: f64,
}

/// Spin edge current of a U(1)-invariant model, directly and by sectors.
pub fn spin_edge_current(hs: &HalfSpaceModel, w: &EdgeWindow) -> Result<SpinEdgeCurrent> {
    hs.check_window(w.support())?;
    let report = classify_symmetries(&hs.cylinder);
    if !report.u1 {
        return Err(Error::Symmetry {
            name: "U(1)",
            residual: report.u1_residual,
        });
    }
    let spec = hs.cylinder.spec;
    let s = (spec.fiber_l as f64 - 1.0) / 2.0;
    let sq = |l: usize| (s - l as f64).powi(2);
    let g = |e: f64| w.g(e);
    let d = row_weights(&spec, hs.boundary_trace_depth, |l, _| sq(l));
    let value = -0.5 * edge_traces(hs.h_hat(), &d, hs.twists, w.support(), &[&g])?[0];
    let sectors = reduce_u1(&hs.cylinder)?;
    let sector_weights: Vec<f64> = (0..spec.fiber_l).map(sq).collect();
    let sector_currents = sectors
        .iter()
        .map(|h| {
            let d = row_weights(h.spec(), hs.boundary_trace_depth, |_, _| 1.0);
            Ok(-0.5 * edge_traces(h, &d, hs.twists, w.support(), &[&g])?[0])
        })
        .collect::<Result<Vec<f64>>>()?;
    let sector_sum = sector_currents.iter().zip(&sector_weights).map(|(j, w)| j * w).sum();
    Ok(SpinEdgeCurrent {
        value,
        sector_currents,
        sector_weights,
        sector_sum,
    })
}

/// `ĵ_Q(g) = −𝒯̂(g(ĥ − μ) ∇₁ĥ)` on the particle block of a
/// charge-conserving model.
pub fn charge_edge_current(hs: &HalfSpaceModel, w: &EdgeWindow) -> Result<f64> {
    hs.check_window(w.support())?;
    require_charge(&hs.cylinder)?;
    let d = row_weights(&hs.cylinder.spec, hs.boundary_trace_depth, |_, eta| if eta == 0 { 1.0 } else { 0.0 });
    let g = |e: f64| w.g(e);
    Ok(-edge_traces(hs.h_hat(), &d, hs.twists, w.support(), &[&g])?[0])
}

fn require_charge(m: &BdGModel) -> Result<()> {
    let report = classify_symmetries(m);
    if !report.charge {
        return Err(Error::Symmetry {
            name: "[H, Q]",
            residual: report.charge_residual,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalEdge {
    pub beta: f64,
    /// `ĵ_H(β) = −½ 𝒯̂(g_β(Ĥ) ∇₁Ĥ)`.
    pub j_h: f64,
    pub j_h_over_t2: f64,
    /// `∂ĵ_H/∂T` by a central difference.
    pub kappa_hat: f64,
    /// `∫ g_β`, close to `(π²/6) T²`.
    pub window_integral: f64,
}

/// Thermal edge current with the cutoff `ρ` equal to 1 on
/// `|E| ≤ inner · gap` and 0 beyond `outer · gap`.
pub fn thermal_edge_current(hs: &HalfSpaceModel, beta: f64, inner: f64, outer: f64) -> Result<ThermalEdge> {
    let gap = hs.bulk_gap;
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Parameter(format!("beta must be positive and finite, got {beta}")));
    }
    if 1.0 / beta > MAX_THERMAL_T_OVER_GAP * gap {
        return Err(Error::Parameter(format!(
            "temperature {:.4} exceeds {MAX_THERMAL_T_OVER_GAP} times the bulk gap {gap:.4}",
            1.0 / beta
        )));
    }
    let t = 1.0 / beta;
    let h = 1e-2 * t;
    let windows = [t, t - h, t + h]
        .map(|tt| EdgeWindow::thermal(1.0 / tt, inner * gap, outer * gap))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    hs.check_window(windows[0].support())?;
    let d = row_weights(&hs.cylinder.spec, hs.boundary_trace_depth, |_, _| 1.0);
    let fs: Vec<Box<dyn Fn(f64) -> f64>> = windows
        .iter()
        .map(|w| {
            let w = *w;
            Box::new(move |e: f64| w.g(e)) as Box<dyn Fn(f64) -> f64>
        })
        .collect();
    let refs: Vec<&dyn Fn(f64) -> f64> = fs.iter().map(|f| f.as_ref()).collect();
    let j = edge_traces(hs.h_hat(), &d, hs.twists, windows[0].support(), &refs)?;
    let j: Vec<f64> = j.into_iter().map(|x| -0.5 * x).collect();
    Ok(ThermalEdge {
        beta,
        j_h: j[0],
        j_h_over_t2: j[0] / (t * t),
        kappa_hat: (j[2] - j[1]) / (2.0 * h),
        window_integral: windows[0].integral(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermoelectricEdge {
    /// `𝒯̂((p̂₋ − p̂₊)(ĥ − μ′) ∇₁ĥ)` with the window `χ_{[−δ, δ]}` smoothed
    /// over a width `smoothing` around `±δ`.
    pub value: f64,
    /// The same with the sharp indicator.
    pub sharp_value: f64,
    /// `∫` of the window, equal to `2δ`.
    pub window_weight: f64,
}

/// Boundary thermoelectric response for offsets `μ ± δ` and the weight
/// `ĥ − μ′` with `μ′ = μ + mu_shift`.
pub fn thermoelectric_edge_check(
    hs: &HalfSpaceModel,
    delta: f64,
    smoothing: f64,
    mu_shift: f64,
) -> Result<ThermoelectricEdge> {
    if !(delta > 0.0 && smoothing >= 0.0 && smoothing <= 2.0 * delta) {
        return Err(Error::Parameter(format!(
            "offsets need delta > 0 and 0 <= smoothing <= 2 delta, got {delta}, {smoothing}"
        )));
    }
    let support = delta + 0.5 * smoothing;
    hs.check_window(support)?;
    require_charge(&hs.cylinder)?;
    let chi = move |e: f64| {
        if smoothing == 0.0 {
            if e.abs() <= delta {
                1.0
            } else {
                0.0
            }
        } else {
            smooth_step((e.abs() - delta + 0.5 * smoothing) / smoothing)
        }
    };
    let smooth = move |e: f64| -chi(e) * (e - mu_shift);
    let sharp = move |e: f64| if e.abs() <= delta { -(e - mu_shift) } else { 0.0 };
    let d = row_weights(&hs.cylinder.spec, hs.boundary_trace_depth, |_, eta| if eta == 0 { 1.0 } else { 0.0 });
    let v = edge_traces(hs.h_hat(), &d, hs.twists, support * (1.0 + 1e-12), &[&smooth, &sharp])?;
    Ok(ThermoelectricEdge {
        value: v[0],
        sharp_value: v[1],
        window_weight: simpson(chi, -support, support, 4000),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSpectrum {
    pub thetas: Vec<f64>,
    /// Eigenvalues of `Ĥ_θ` inside the bulk gap.
    pub energies: Vec<Vec<f64>>,
    /// Weight of each such eigenvector on the rows `n₂ < depth`.
    pub lower_weight: Vec<Vec<f64>>,
    /// Net number of lower-edge branches crossing zero per period of `θ`,
    /// measured by the spectral flow through `|E| < gap/2` and counted
    /// positive for branches moving like those that make `ĵ` positive.
    pub chiral_branches: f64,
}

/// In-gap spectrum of `Ĥ` along the Bloch twist.
pub fn edge_spectrum(hs: &HalfSpaceModel) -> Result<EdgeSpectrum> {
    let spec = hs.cylinder.spec;
    let d = row_weights(&spec, hs.boundary_trace_depth, |_, _| 1.0);
    let window = 0.5 * hs.bulk_gap;
    let mut thetas = Vec::new();
    let mut energies = Vec::new();
    let mut lower_weight = Vec::new();
    let mut flow = 0.0;
    for theta in twist_angles(hs.twists) {
        let fb = fiber(hs.h_hat(), theta)?;
        let mut es_row = Vec::new();
        let mut w_row = Vec::new();
        for (a, &e) in fb.es.values.iter().enumerate() {
            if e.abs() >= hs.bulk_gap {
                continue;
            }
            let v = fb.es.vectors.column(a);
            let lw: f64 = v.iter().zip(&d).map(|(x, w)| x.norm_sqr() * w).sum();
            if e.abs() < window {
                // ⟨∂_θ H⟩ = ⟨∇₁H⟩ / n1 on eigenvectors
                let vel: f64 = (0..v.len())
                    .map(|r| (v[r].conj() * fb.dh.row(r).dot(&v)).re)
                    .sum::<f64>()
                    / spec.n1 as f64;
                flow += lw * vel;
            }
            es_row.push(e);
            w_row.push(lw);
        }
        thetas.push(theta);
        energies.push(es_row);
        lower_weight.push(w_row);
    }
    let chiral_branches = -flow * (2.0 * PI / hs.twists as f64) / (2.0 * window);
    Ok(EdgeSpectrum {
        thetas,
        energies,
        lower_weight,
        chiral_branches,
    })
}

/// The model mirrored by `n₁ ↦ −n₁`.
pub fn reflect_direction_one(m: &BdGModel) -> Result<BdGModel> {
    let spec = m.spec;
    let l = spec.fiber_l;
    let n = spec.one_particle_dim();
    let map = |r: usize| {
        let s = r / l;
        let (i1, i2) = spec.coords(s);
        spec.site((spec.n1 - i1) % spec.n1, i2) * l + r % l
    };
    let perm = |a: &Array2<C64>| Array2::from_shape_fn((n, n), |(r, c)| a[[map(r), map(c)]]);
    let mut out = BdGModel::from_parts(spec, perm(&m.h), perm(&m.delta))?;
    out.mu = m.mu;
    out.pairing = m.pairing;
    out.kinetic = m.kinetic;
    Ok(out)
}
