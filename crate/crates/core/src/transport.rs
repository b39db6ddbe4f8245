//! Linear response: the dissipative Kubo formula, its zero-temperature
//! Chern limits, spin Hall weights and the thermal and thermoelectric
//! coefficients obtained from the energy-resolved Chern number.
//!
//! Units are natural, `ħ = k_B = 1`, so Hall conductances are quantized in
//! `(1/4π) ℤ`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::invariants::{chern_energy_resolved, chern_relations, chern_trace, fermi_projection, FermiProjection};
use crate::lattice::{derivation, fermi_dirac, BlockOperator, ChargeAndSpinOps, Direction, Geometry};
use crate::linalg::{self, Eigensystem, I};
use crate::models::{classify_symmetries, reduce_su2, reduce_u1, BdGModel, SYMMETRY_TOL};

/// Tolerance on `(δ + ℒ_H) R = J` after applying the resolvent.
pub const RESOLVENT_TOL: f64 = 1e-10;
/// Relative tolerance between a quadrature and its refinement.
pub const QUADRATURE_TOL: f64 = 1e-2;
/// Absolute tolerance between a quadrature and its refinement, applied to
/// the dimensionless coefficients `κ/T` and `α`.
pub const QUADRATURE_FLOOR: f64 = 1e-6;
/// Fewest grid points required inside the spectral gap.
pub const MIN_GAP_POINTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Perturbation {
    /// `𝒫 = X₂`, current `∇₁H`.
    Gravitational,
    /// `𝒫 = X₂Q`, current `∇₁H Q`.
    Electric,
    /// `𝒫 = X₂S³`, current `∇₁H S³`.
    Zeeman,
    /// `𝒫 = ½{X₂, H}`, current `½{∇₁H, H}`.
    ThermalGradient,
}

impl Perturbation {
    pub const ALL: [Perturbation; 4] = [
        Perturbation::Gravitational,
        Perturbation::Electric,
        Perturbation::Zeeman,
        Perturbation::ThermalGradient,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Perturbation::Gravitational => "gravitational",
            Perturbation::Electric => "electric",
            Perturbation::Zeeman => "zeeman",
            Perturbation::ThermalGradient => "thermal_gradient",
        }
    }
}

impl fmt::Display for Perturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Perturbation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Perturbation::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown perturbation '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KuboConfig {
    /// Inverse temperature in `(0, ∞]`.
    pub beta: f64,
    /// Dissipation rate, the inverse relaxation time.
    pub delta: f64,
    pub perturbation: Perturbation,
    /// Coupling constant; the induced current is `λ σ` to first order.
    pub lambda: f64,
}

impl KuboConfig {
    pub fn new(beta: f64, delta: f64, perturbation: Perturbation) -> Result<Self> {
        let cfg = KuboConfig {
            beta,
            delta,
            perturbation,
            lambda: 1.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) {
            return Err(Error::Parameter(format!("beta must lie in (0, inf], got {}", self.beta)));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::Parameter(format!("delta must be positive, got {}", self.delta)));
        }
        if !self.lambda.is_finite() {
            return Err(Error::Parameter("lambda must be finite".into()));
        }
        Ok(())
    }
}

/// `(δ + ℒ_H)⁻¹(J)` together with the residual of re-applying `δ + ℒ_H`.
#[derive(Debug, Clone)]
pub struct ResolventApplication {
    pub value: BlockOperator,
    pub inverse_residual: f64,
}

/// `ℒ_H(A) = i[A, H]`.
pub fn liouvillian(h: &BlockOperator, a: &BlockOperator) -> BlockOperator {
    a.commutator(h).scale(I)
}

/// Entries of `(δ + ℒ_H)⁻¹` in the eigenbasis of `H`: `ℒ_H` multiplies
/// `A_ab` by `−i(E_a − E_b)`.
fn resolvent_in_eigenbasis(es: &Eigensystem, delta: f64, j_eig: &Array2<C64>) -> Array2<C64> {
    let e = &es.values;
    Array2::from_shape_fn(j_eig.dim(), |(a, b)| j_eig[[a, b]] / C64::new(delta, -(e[a] - e[b])))
}

/// Applies `(δ + ℒ_H)⁻¹` to `J` and verifies the inverse.
pub fn liouvillian_resolvent_apply(h: &BlockOperator, delta: f64, j: &BlockOperator) -> Result<ResolventApplication> {
    if !(delta > 0.0) {
        return Err(Error::Parameter(format!("delta must be positive, got {delta}")));
    }
    let es = h.eigensystem()?;
    let r = es.from_eigenbasis(&resolvent_in_eigenbasis(&es, delta, &es.to_eigenbasis(j.data())));
    let value = BlockOperator::new(*h.spec(), r);
    let back = value.scale(C64::new(delta, 0.0)).add(&liouvillian(h, &value));
    let inverse_residual = back.max_abs_diff(j) / j.max_abs().max(1.0);
    Ok(ResolventApplication { value, inverse_residual })
}

fn check_commutes(h: &BlockOperator, op: &BlockOperator, name: &'static str) -> Result<()> {
    let residual = h.commutator(op).max_abs();
    if residual > SYMMETRY_TOL {
        return Err(Error::Symmetry { name, residual });
    }
    Ok(())
}

/// `∇_j f(H)` in the eigenbasis from the divided differences
/// `(f(E_a) − f(E_b)) / (E_a − E_b) (∇_j H)_ab`. Unlike the real-space
/// derivation of `f(H)`, this has no wrap-around errors on the torus.
fn derivation_of_function(es: &Eigensystem, dh_eig: &Array2<C64>, beta: f64) -> Array2<C64> {
    let e = &es.values;
    let f: Vec<f64> = e.iter().map(|&x| fermi_dirac(beta, x)).collect();
    Array2::from_shape_fn(dh_eig.dim(), |(a, b)| {
        let de = e[a] - e[b];
        let d = if de.abs() > 1e-12 {
            (f[a] - f[b]) / de
        } else if beta.is_finite() {
            fermi_derivative(beta, e[a])
        } else {
            0.0
        };
        dh_eig[[a, b]] * d
    })
}

/// `ℒ_𝒫(f_β(H))` and `𝒥` in the eigenbasis for a perturbation along
/// `along` and the current along `across`.
fn perturbation_pair(
    h: &BlockOperator,
    es: &Eigensystem,
    beta: f64,
    p: Perturbation,
    along: Direction,
    across: Direction,
) -> Result<(Array2<C64>, Array2<C64>)> {
    let df = derivation_of_function(es, &es.to_eigenbasis(derivation(h, along)?.data()), beta);
    let dh = es.to_eigenbasis(derivation(h, across)?.data());
    match p {
        Perturbation::Gravitational => Ok((df, dh)),
        Perturbation::Electric | Perturbation::Zeeman => {
            let ops = ChargeAndSpinOps::new(h.spec());
            let (op, name) = if p == Perturbation::Electric {
                (ops.q.clone(), "[H, Q]")
            } else {
                (ops.s3().clone(), "[H, S3]")
            };
            check_commutes(h, &op, name)?;
            let op = es.to_eigenbasis(op.data());
            Ok((df.dot(&op), dh.dot(&op)))
        }
        Perturbation::ThermalGradient => {
            let e = &es.values;
            let half = |m: &Array2<C64>| Array2::from_shape_fn(m.dim(), |(a, b)| m[[a, b]] * 0.5 * (e[a] + e[b]));
            Ok((half(&df), half(&dh)))
        }
    }
}

/// `σ_{𝒫,𝒥}(β, δ) = ½ 𝒯(ℒ_𝒫(f_β(H)) (δ + ℒ_H)⁻¹(𝒥))` with `𝒫` along
/// `along` and the current along `across`.
fn kubo_general(h: &BlockOperator, cfg: &KuboConfig, along: Direction, across: Direction) -> Result<C64> {
    cfg.validate()?;
    let spec = h.spec();
    if spec.geometry != Geometry::Torus {
        return Err(Error::NotTorus);
    }
    let es = h.eigensystem()?;
    let (lp, j) = perturbation_pair(h, &es, cfg.beta, cfg.perturbation, along, across)?;
    let r = resolvent_in_eigenbasis(&es, cfg.delta, &j);
    Ok(linalg::trace_product(&lp, &r) * 0.5 / spec.sites() as f64)
}

/// Symmetric part `σ_{X₂,∇₁H} + σ_{X₁,∇₂H}`, which only the Hall part of
/// the response is free of: `½ 𝒯` of `d_ab (∇₂H)_ba (∇₁H)_ab 2δ/(δ² + ω_ab²)`.
fn kubo_symmetric_part(h: &BlockOperator, cfg: &KuboConfig) -> Result<f64> {
    let es = h.eigensystem()?;
    let v1 = es.to_eigenbasis(derivation(h, Direction::One)?.data());
    let v2 = es.to_eigenbasis(derivation(h, Direction::Two)?.data());
    let d2f = derivation_of_function(&es, &v2, cfg.beta);
    let e = &es.values;
    let n = e.len();
    let mut acc = C64::new(0.0, 0.0);
    for a in 0..n {
        for b in 0..n {
            let w = e[a] - e[b];
            acc += d2f[[b, a]] * v1[[a, b]] * (2.0 * cfg.delta / (cfg.delta * cfg.delta + w * w));
        }
    }
    Ok((acc * 0.5 / h.spec().sites() as f64).re)
}

/// Kubo coefficient for a perturbation along direction 2 and the current
/// along direction 1.
pub fn kubo_sigma(m: &BdGModel, cfg: &KuboConfig) -> Result<f64> {
    Ok(kubo_general(&m.hamiltonian, cfg, Direction::Two, Direction::One)?.re)
}

/// Induced current `λ σ` to first order in the coupling.
pub fn kubo_current(m: &BdGModel, cfg: &KuboConfig) -> Result<f64> {
    Ok(cfg.lambda * kubo_sigma(m, cfg)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnsagerCheck {
    /// `σ_{X₂, ∇₁H}`.
    pub forward: f64,
    /// `σ_{X₁, ∇₂H}`.
    pub reversed: f64,
    /// `|forward + reversed|`.
    pub residual: f64,
    /// Independently evaluated dissipative symmetric part, which the sum
    /// must reproduce. It vanishes for rotation-invariant models and is
    /// `O(δ)` in a gap otherwise.
    pub symmetric_part: f64,
}

impl OnsagerCheck {
    /// `|forward + reversed − symmetric_part|`.
    pub fn identity_residual(&self) -> f64 {
        (self.forward + self.reversed - self.symmetric_part).abs()
    }
}

/// Compares `σ_{X₂,∇₁H}` with `−σ_{X₁,∇₂H}`.
pub fn onsager_check(m: &BdGModel, cfg: &KuboConfig) -> Result<OnsagerCheck> {
    let a = kubo_general(&m.hamiltonian, cfg, Direction::Two, Direction::One)?;
    let b = kubo_general(&m.hamiltonian, cfg, Direction::One, Direction::Two)?;
    Ok(OnsagerCheck {
        forward: a.re,
        reversed: b.re,
        residual: (a + b).norm(),
        symmetric_part: kubo_symmetric_part(&m.hamiltonian, cfg)?,
    })
}

/// Zero-temperature, dissipationless limit `½ i 𝒯(P[∇₁P, ∇₂P]) = Ch(P)/4π`.
pub fn sigma_zero_temperature(fp: &FermiProjection) -> Result<f64> {
    Ok(chern_trace(&fp.p)?.re / (4.0 * PI))
}

/// Charge Hall conductance `Ch(p)/2π` of a charge-conserving model.
pub fn sigma_charge(m: &BdGModel) -> Result<f64> {
    let rel = chern_relations(m)?;
    let (cp, _) = rel.charge.ok_or_else(|| Error::Symmetry {
        name: "[H, Q]",
        residual: classify_symmetries(m).charge_residual,
    })?;
    Ok(cp / (2.0 * PI))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpinHall {
    /// `(1/16π) Σ_l (L + 1 − 2l)² Ch(P_l)` with the computed sector values.
    pub sigma: f64,
    /// `½ i 𝒯(P[∇₁P S³, ∇₂P S³])` on the full space.
    pub direct: f64,
    pub sector_chern: Vec<f64>,
    /// `(L + 1 − 2l)²` for `l = 1..L`.
    pub weights: Vec<f64>,
    /// Sector sum evaluated on the snapped sector integers.
    pub sector_sum_snapped: f64,
    /// SU(2) data when it applies: `Ch(P_red)`, the closed form
    /// `L(L² − 1)/48π · snap(Ch(P_red))` and whether the snap is even.
    pub ch_red: Option<f64>,
    pub closed_form_snapped: Option<f64>,
    pub ch_red_even: Option<bool>,
}

/// Spin Hall conductance of a U(1)-invariant model via its sectors.
pub fn sigma_spin(m: &BdGModel) -> Result<SpinHall> {
    let report = classify_symmetries(m);
    if !report.u1 {
        return Err(Error::Symmetry {
            name: "U(1)",
            residual: report.u1_residual,
        });
    }
    let l = m.spec.fiber_l;
    let sectors = reduce_u1(m)?;
    let sector_chern = sectors
        .iter()
        .map(|h| Ok(chern_trace(&fermi_projection(h)?.p)?.re))
        .collect::<Result<Vec<f64>>>()?;
    let weights: Vec<f64> = (1..=l).map(|k| ((l + 1) as f64 - 2.0 * k as f64).powi(2)).collect();
    let weighted = |v: &mut dyn Iterator<Item = f64>| -> f64 {
        v.zip(&weights).map(|(c, w)| c * w).sum::<f64>() / (16.0 * PI)
    };
    let sigma = weighted(&mut sector_chern.iter().cloned());
    let sector_sum_snapped = weighted(&mut sector_chern.iter().map(|c| c.round()));

    let fp = fermi_projection(&m.hamiltonian)?;
    let s3 = ChargeAndSpinOps::new(&m.spec).s3().clone();
    let d1 = derivation(&fp.p, Direction::One)?.matmul(&s3);
    let d2 = derivation(&fp.p, Direction::Two)?.matmul(&s3);
    let comm = d1.commutator(&d2);
    let direct = (linalg::trace_product(fp.p.data(), comm.data()) * I * 0.5 / m.spec.sites() as f64).re;

    let (ch_red, closed_form_snapped, ch_red_even) = if report.su2 {
        let red = reduce_su2(m)?;
        let c = chern_trace(&fermi_projection(&red.h_red)?.p)?.re;
        let lf = l as f64;
        let snap = c.round();
        (
            Some(c),
            Some(lf * (lf * lf - 1.0) / (48.0 * PI) * snap),
            Some(snap as i64 % 2 == 0),
        )
    } else {
        (None, None, None)
    };
    Ok(SpinHall {
        sigma,
        direct,
        sector_chern,
        weights,
        sector_sum_snapped,
        ch_red,
        closed_form_snapped,
        ch_red_even,
    })
}

/// `f'_β(E) = −β f_β(E)(1 − f_β(E))`.
pub fn fermi_derivative(beta: f64, e: f64) -> f64 {
    let f = fermi_dirac(beta, e);
    -beta * f * (1.0 - f)
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(a, b)| 0.5 * (a[1] - a[0]) * (b[0] + b[1])).sum()
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[1] > w[0])) || grid.iter().any(|e| !e.is_finite()) {
        return Err(Error::Parameter("energy grid must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// `κ(β) = −½ β ∫ dE E² f'_β(E) Ch(E)/2π` by trapezoidal quadrature.
pub fn kappa_from_profile(beta: f64, grid: &[f64], ch: &[f64]) -> Result<f64> {
    moment(beta, grid, ch, 2).map(|v| -0.5 * beta * v)
}

/// `α(β) = ½ β ∫ dE E f'_β(E) Ch(E)/2π` by trapezoidal quadrature.
pub fn alpha_from_profile(beta: f64, grid: &[f64], ch: &[f64]) -> Result<f64> {
    moment(beta, grid, ch, 1).map(|v| 0.5 * beta * v)
}

fn moment(beta: f64, grid: &[f64], ch: &[f64], power: i32) -> Result<f64> {
    check_grid(grid)?;
    if ch.len() != grid.len() {
        return Err(Error::Parameter("profile and grid lengths differ".into()));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Parameter(format!("beta must be positive and finite, got {beta}")));
    }
    let y: Vec<f64> = grid
        .iter()
        .zip(ch)
        .map(|(&e, &c)| e.powi(power) * fermi_derivative(beta, e) * c / (2.0 * PI))
        .collect();
    Ok(trapezoid(grid, &y))
}

/// Symmetric grid on `[−40/β, 40/β]` with spacing at most `T/4` and at
/// least `MIN_GAP_POINTS` intervals across `(−gap, gap)`.
pub fn default_energy_grid(beta: f64, gap: f64) -> Vec<f64> {
    let span = 40.0 / beta;
    let h = (0.25 / beta).min(gap / MIN_GAP_POINTS as f64);
    let half = (span / h).ceil() as usize;
    (0..=2 * half).map(|k| (k as f64 - half as f64) * span / half as f64).collect()
}

/// Grid with every interval bisected.
fn refine(grid: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * grid.len());
    for w in grid.windows(2) {
        out.push(w[0]);
        out.push(0.5 * (w[0] + w[1]));
    }
    out.push(*grid.last().expect("grid is nonempty"));
    out
}

/// Energy-resolved Chern numbers on a grid together with a flag per point
/// marking energies where `P_E` fails the localization monitor.
#[derive(Debug, Clone)]
pub struct ChernProfile {
    pub energies: Vec<f64>,
    pub chern: Vec<f64>,
    pub unreliable: Vec<bool>,
}

/// `Ch(χ(H ≤ E))` on a grid. Energies inside the gap around zero share the
/// projection `P` and use its trace formula value; the others use the
/// eigenbasis representation from one diagonalization.
pub fn chern_profile(h: &BlockOperator, grid: &[f64]) -> Result<ChernProfile> {
    check_grid(grid)?;
    let es = h.eigensystem()?;
    let below = |e: f64| es.values.iter().take_while(|&&x| x <= e).count();
    let k0 = below(0.0);
    let fp = fermi_projection(h)?;
    let ch0 = chern_trace(&fp.p)?.re;
    let mut chern = chern_energy_resolved(h, grid)?;
    let mut unreliable = vec![false; grid.len()];
    for (k, &e) in grid.iter().enumerate() {
        if below(e) == k0 {
            chern[k] = ch0;
            unreliable[k] = fp.loc_metric > crate::invariants::LOC_METRIC_THRESHOLD;
        } else {
            // inside a band the finite-volume value is not an invariant
            unreliable[k] = (chern[k] - chern[k].round()).abs() > 0.1;
        }
    }
    Ok(ChernProfile {
        energies: grid.to_vec(),
        chern,
        unreliable,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThermalCoefficient {
    pub value: f64,
    /// Value divided by the temperature.
    pub over_t: f64,
    /// Same quadrature on the bisected grid.
    pub refined: f64,
    pub unreliable_points: usize,
}

fn thermal_coefficient<F>(m: &BdGModel, beta: f64, grid: &[f64], rule: F, dimension_t: bool) -> Result<ThermalCoefficient>
where
    F: Fn(f64, &[f64], &[f64]) -> Result<f64>,
{
    check_grid(grid)?;
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Parameter(format!("beta must be positive and finite, got {beta}")));
    }
    let h = &m.hamiltonian;
    let gap = m.gap()?;
    let inside = grid.iter().filter(|e| e.abs() < gap).count();
    if inside < MIN_GAP_POINTS {
        return Err(Error::Parameter(format!(
            "energy grid has {inside} points inside the gap, at least {MIN_GAP_POINTS} needed"
        )));
    }
    let reach = beta * grid[0].abs().min(grid[grid.len() - 1].abs());
    if reach < 30.0 {
        return Err(Error::Parameter(format!(
            "energy grid ends at beta*|E| = {reach:.1}; f' is not negligible there"
        )));
    }
    let coarse = chern_profile(h, grid)?;
    let value = rule(beta, grid, &coarse.chern)?;
    let fine_grid = refine(grid);
    let fine = chern_profile(h, &fine_grid)?;
    let refined = rule(beta, &fine_grid, &fine.chern)?;
    // κ carries a factor T, α is dimensionless
    let unit = if dimension_t { beta } else { 1.0 };
    if ((value - refined) * unit).abs() > QUADRATURE_TOL * (refined * unit).abs() + QUADRATURE_FLOOR {
        return Err(Error::Parameter(format!(
            "energy grid too coarse: {value:.6e} vs refined {refined:.6e}"
        )));
    }
    // only points carrying weight matter for reliability
    let weight = |e: f64| (e * e * fermi_derivative(beta, e)).abs();
    let wmax = grid.iter().fold(0.0f64, |m, &e| m.max(weight(e)));
    let unreliable_points = coarse
        .unreliable
        .iter()
        .zip(grid)
        .filter(|(u, e)| **u && weight(**e) > 1e-4 * wmax)
        .count();
    Ok(ThermalCoefficient {
        value,
        over_t: value * beta,
        refined,
        unreliable_points,
    })
}

/// Thermal Hall conductance `κ(β)` and `κ/T`.
pub fn kappa_thermal(m: &BdGModel, beta: f64, grid: &[f64]) -> Result<ThermalCoefficient> {
    thermal_coefficient(m, beta, grid, kappa_from_profile, true)
}

/// Thermoelectric coefficient `α(β)` of a charge-conserving model.
pub fn alpha_thermoelectric(m: &BdGModel, beta: f64, grid: &[f64]) -> Result<ThermalCoefficient> {
    let report = classify_symmetries(m);
    if !report.charge {
        return Err(Error::Symmetry {
            name: "[H, Q]",
            residual: report.charge_residual,
        });
    }
    thermal_coefficient(m, beta, grid, alpha_from_profile, false)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WiedemannFranz {
    pub kappa: f64,
    pub sigma_q: f64,
    /// `κ / σ_Q`.
    pub ratio: f64,
    /// `(π²/3) T`.
    pub expected: f64,
}

pub fn wiedemann_franz(m: &BdGModel, beta: f64, grid: &[f64]) -> Result<WiedemannFranz> {
    let sigma_q = sigma_charge(m)?;
    let kappa = kappa_thermal(m, beta, grid)?.value;
    Ok(WiedemannFranz {
        kappa,
        sigma_q,
        ratio: kappa / sigma_q,
        expected: PI * PI / (3.0 * beta),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportResult {
    /// Matter Hall conductance `Ch(P)/4π`.
    pub sigma: f64,
    pub sigma_q: Option<f64>,
    pub sigma_s3: Option<f64>,
    pub kappa_over_t: f64,
    pub alpha: Option<f64>,
    pub method: &'static str,
    pub tolerance: f64,
}

/// Zero-temperature Hall coefficients and the thermal coefficients at `β`.
pub fn transport_result(m: &BdGModel, beta: f64, grid: &[f64]) -> Result<TransportResult> {
    let report = classify_symmetries(m);
    let sigma = sigma_zero_temperature(&fermi_projection(&m.hamiltonian)?)?;
    let sigma_q = if report.charge { Some(sigma_charge(m)?) } else { None };
    let sigma_s3 = if report.u1 { Some(sigma_spin(m)?.sigma) } else { None };
    let kappa_over_t = kappa_thermal(m, beta, grid)?.over_t;
    let alpha = if report.charge {
        Some(alpha_thermoelectric(m, beta, grid)?.value)
    } else {
        None
    };
    Ok(TransportResult {
        sigma,
        sigma_q,
        sigma_s3,
        kappa_over_t,
        alpha,
        method: "trace formula; trapezoid over energy-resolved Chern",
        tolerance: QUADRATURE_TOL,
    })
}
