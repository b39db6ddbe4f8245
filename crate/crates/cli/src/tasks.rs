//! One function per task. Each returns named scalars, tabulated curves and
//! the checks it can decide, or the diagnostic of the failing module.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use bdglab::boundary::{self, build_half_space, EdgeWindow, HalfSpaceModel};
use bdglab::currents::{continuity_residual, equilibrium_current, Conserved};
use bdglab::fock::{self, FockSpace};
use bdglab::invariants::{chern_index, chern_realspace, chern_relations, model_fermi_projection};
use bdglab::linalg;
use bdglab::models::{classify_symmetries, DisorderRealization};
use bdglab::transport::{self, KuboConfig, Perturbation};
use bdglab::{build_model, BdGModel, LatticeSpec, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::Value;

use crate::config::{ExperimentConfig, Task};

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: Value,
    pub tolerance: Value,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub module: &'static str,
    pub method: String,
    pub outputs: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
}

/// JSON number, with non-finite values written as strings.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or_else(|| Value::String(x.to_string()))
}

impl Outcome {
    fn new(module: &'static str, method: impl Into<String>) -> Self {
        Outcome {
            module,
            method: method.into(),
            ..Default::default()
        }
    }

    fn put(&mut self, key: &str, v: impl Into<Value>) {
        self.outputs.insert(key.to_string(), v.into());
    }

    fn put_f(&mut self, key: &str, x: f64) {
        self.outputs.insert(key.to_string(), num(x));
    }

    /// Records `|value − target| ≤ tol`.
    fn check_close(&mut self, name: &str, value: f64, target: f64, tol: f64) {
        self.checks.push(Check {
            name: name.to_string(),
            value: num(value),
            tolerance: num(tol),
            pass: (value - target).abs() <= tol,
        });
    }

    fn check_bool(&mut self, name: &str, pass: bool) {
        self.checks.push(Check {
            name: name.to_string(),
            value: Value::Bool(pass),
            tolerance: Value::Null,
            pass,
        });
    }

    fn table(&mut self, name: &str, columns: &[&str], rows: Vec<Vec<f64>>) {
        self.tables.push(Table {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows,
        });
    }
}

pub fn build(cfg: &ExperimentConfig, seed: Option<u64>) -> Result<BdGModel> {
    let bad = |e: crate::config::ConfigError| bdglab::Error::Parameter(e.0);
    let spec = LatticeSpec::torus(cfg.lattice.n1, cfg.lattice.n2, cfg.fiber_l().map_err(bad)?)?
        .with_flux(cfg.flux().map_err(bad)?)?;
    let disorder = match seed {
        Some(s) => DisorderRealization::generate(&spec, cfg.disorder.w, s, "cli")?,
        None => DisorderRealization::clean(&spec),
    };
    build_model(&spec, cfg.pairing().map_err(bad)?, cfg.model.mu, &disorder, cfg.kinetic().map_err(bad)?)
}

pub fn run_task(task: Task, cfg: &ExperimentConfig, seed: Option<u64>) -> Result<Outcome> {
    let m = build(cfg, seed)?;
    match task {
        Task::ChernRealspace => chern_task(&m),
        Task::ChernIndex => index_task(&m),
        Task::SymmetryReport => symmetry_task(&m),
        Task::EdgeCurrent => edge_task(&m, cfg),
        Task::Winding => winding_task(&m, cfg),
        Task::KuboSweep => kubo_task(&m, cfg),
        Task::Thermal => thermal_task(&m, cfg),
        Task::SpinHall => spin_task(&m),
        Task::OracleCheck => oracle_task(&m, seed.unwrap_or(0)),
        Task::ContinuityCheck => continuity_task(&m, cfg),
    }
}

fn bulk_chern(m: &BdGModel) -> Result<f64> {
    Ok(chern_realspace(&model_fermi_projection(m)?)?.value)
}

fn chern_task(m: &BdGModel) -> Result<Outcome> {
    let mut o = Outcome::new("invariants", "realspace_trace");
    let fp = model_fermi_projection(m)?;
    let r = chern_realspace(&fp)?;
    o.put_f("chern", r.value);
    o.put("snap", r.snap);
    o.put_f("imaginary_residue", r.imaginary_residue);
    o.put_f("gap", fp.gap);
    o.put_f("localization_metric", fp.loc_metric);
    o.put("reliable", r.reliable);
    o.put("caz_class", m.caz_class.to_string());
    o.check_close("near_integer", r.deviation, 0.0, 1e-2);
    Ok(o)
}

fn index_task(m: &BdGModel) -> Result<Outcome> {
    let mut o = Outcome::new("invariants", "fredholm_index");
    let fp = model_fermi_projection(m)?;
    let trace = chern_realspace(&fp)?;
    let d = chern_index(&fp, (0.5, 0.5))?;
    o.put("index", d.result.snap);
    o.put("reliable", d.result.reliable);
    o.put_f("threshold_margin", d.threshold_margin);
    o.put("small_singular_values", d.small_singular_values.len());
    o.put_f("chern", trace.value);
    o.check_bool("index_equals_trace_snap", d.result.snap == trace.snap);
    Ok(o)
}

fn symmetry_task(m: &BdGModel) -> Result<Outcome> {
    let mut o = Outcome::new("models", "residuals");
    let r = classify_symmetries(m);
    o.put("caz_class", r.caz_class.to_string());
    o.put_f("phs_residual", r.phs_residual);
    o.put_f("trs_residual", r.trs_residual);
    o.put_f("u1_residual", r.u1_residual);
    o.put_f("su2_residual", r.su2_residuals.iter().fold(0.0, |a: f64, b| a.max(*b)));
    o.put_f("charge_residual", r.charge_residual);
    for (k, v) in [("phs", r.phs), ("u1", r.u1), ("su2", r.su2), ("charge", r.charge)] {
        o.put(k, v);
    }
    let rel = match chern_relations(m) {
        Ok(rel) => rel,
        Err(e @ bdglab::Error::ZeroModes(_)) => {
            o.put("chern_relations", format!("skipped: {e}"));
            return Ok(o);
        }
        Err(e) => return Err(e),
    };
    o.put_f("chern", rel.ch);
    if let Some((cp, res)) = rel.charge {
        o.put_f("chern_particle", cp);
        o.check_close("chern_twice_particle", res, 0.0, 1e-10);
    }
    if let Some((sectors, res)) = &rel.u1 {
        o.put("chern_sectors", sectors.iter().map(|x| num(*x)).collect::<Vec<_>>());
        o.check_close("chern_sector_sum", *res, 0.0, 1e-10);
    }
    if let Some((red, res)) = rel.su2 {
        o.put_f("chern_reduced", red);
        o.check_close("chern_fiber_times_reduced", res, 0.0, 1e-10);
    }
    if let Some(t) = rel.trs {
        o.check_close("chern_vanishes_with_trs", t, 0.0, 1e-2);
    }
    Ok(o)
}

fn half_space(m: &BdGModel, cfg: &ExperimentConfig) -> Result<HalfSpaceModel> {
    let width = cfg
        .lattice
        .width
        .ok_or_else(|| bdglab::Error::Parameter("lattice.width is required".into()))?;
    let hs = build_half_space(m, width)?.with_twists(cfg.lattice.twists);
    match cfg.lattice.depth {
        Some(d) => hs.with_depth(d),
        None => Ok(hs),
    }
}

fn edge_task(m: &BdGModel, cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut o = Outcome::new("boundary", "twisted_cylinder_trace");
    let hs = half_space(m, cfg)?;
    let ch = bulk_chern(m)?;
    o.put_f("bulk_gap", hs.bulk_gap);
    o.put_f("bulk_chern", ch);
    let mut values = Vec::new();
    for (k, a) in cfg.edge.windows.iter().enumerate() {
        let w = EdgeWindow::bump(a * hs.bulk_gap)?;
        let j = boundary::edge_current(&hs, &w)?;
        o.put_f(&format!("edge_current_{k}"), j);
        values.push(j);
    }
    let four_pi = 4.0 * PI * values[0];
    o.put_f("four_pi_edge_current", four_pi);
    o.check_close("edge_current_matches_chern", four_pi, ch.round(), 0.05);
    if let Some(&j1) = values.get(1) {
        let rel = if values[0] != 0.0 { ((j1 - values[0]) / values[0]).abs() } else { j1.abs() };
        o.check_close("window_independence", rel, 0.0, 1e-2);
    }
    let w = EdgeWindow::bump(cfg.edge.windows[0] * hs.bulk_gap)?;
    let profile = boundary::edge_current_profile(&hs, &w)?;
    o.table(
        "profile",
        &["row", "current_density"],
        profile.iter().enumerate().map(|(r, x)| vec![r as f64, *x]).collect(),
    );
    let sp = boundary::edge_spectrum(&hs)?;
    o.put_f("chiral_branches", sp.chiral_branches);
    let mut rows = Vec::new();
    for (t, (es, ws)) in sp.thetas.iter().zip(sp.energies.iter().zip(&sp.lower_weight)) {
        for (e, lw) in es.iter().zip(ws) {
            rows.push(vec![*t, *e, *lw]);
        }
    }
    o.table("spectrum", &["theta", "energy", "lower_weight"], rows);
    Ok(o)
}

fn winding_task(m: &BdGModel, cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut o = Outcome::new("boundary", "winding_and_quarter_plane_index");
    let hs = half_space(m, cfg)?;
    let ch = bulk_chern(m)?;
    let w = EdgeWindow::bump(cfg.edge.windows[0] * hs.bulk_gap)?;
    let wn = boundary::winding_number(&hs, &w)?;
    o.put_f("bulk_chern", ch);
    o.put_f("winding", wn.value);
    o.put("winding_snap", wn.snap);
    o.put_f("imaginary_residue", wn.imaginary_residue);
    o.check_bool("winding_equals_bulk_snap", wn.snap == ch.round() as i64);
    let q = boundary::quarter_plane_index(&hs, &w)?;
    o.put("index", q.result.snap);
    o.put("index_reliable", q.result.reliable);
    o.put_f("index_threshold_margin", q.threshold_margin);
    o.check_bool("index_equals_winding", q.result.snap == wn.snap);
    Ok(o)
}

fn kubo_reference(m: &BdGModel, p: Perturbation) -> Result<Option<f64>> {
    Ok(match p {
        Perturbation::Gravitational => Some(bulk_chern(m)?.round() / (4.0 * PI)),
        Perturbation::Electric => Some(transport::sigma_charge(m)?),
        Perturbation::Zeeman => Some(transport::sigma_spin(m)?.sigma),
        Perturbation::ThermalGradient => None,
    })
}

fn kubo_task(m: &BdGModel, cfg: &ExperimentConfig) -> Result<Outcome> {
    let p = cfg.perturbation().map_err(|e| bdglab::Error::Parameter(e.0))?;
    let mut o = Outcome::new("transport", format!("dissipative_kubo_{}", p.name()));
    let mut deltas = cfg.kubo.deltas.clone();
    deltas.sort_by(|a, b| b.total_cmp(a));
    let mut rows = Vec::new();
    for &d in &deltas {
        let k = KuboConfig::new(cfg.kubo.beta, d, p)?;
        rows.push(vec![d, transport::kubo_sigma(m, &k)?]);
    }
    let last = rows.last().map(|r| r[1]).unwrap_or(f64::NAN);
    o.put_f("beta", cfg.kubo.beta);
    o.put_f("sigma", last);
    o.put_f("delta", *deltas.last().unwrap());
    if let Some(target) = kubo_reference(m, p)? {
        o.put_f("sigma_reference", target);
        let tol = if target != 0.0 { 2e-2 * target.abs() } else { 1e-3 };
        o.check_close("sigma_matches_reference", last, target, tol);
    }
    if p == Perturbation::Gravitational {
        let k = KuboConfig::new(cfg.kubo.beta, *deltas.last().unwrap(), p)?;
        let on = transport::onsager_check(m, &k)?;
        o.put_f("onsager_residual", on.residual);
        o.put_f("onsager_symmetric_part", on.symmetric_part);
        o.check_close("onsager_identity", on.identity_residual(), 0.0, 1e-10);
    }
    o.table("sigma_vs_delta", &["delta", "sigma"], rows);
    Ok(o)
}

fn thermal_task(m: &BdGModel, cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut o = Outcome::new("transport", "energy_resolved_chern_quadrature");
    let gap = m.gap()?;
    let ch = bulk_chern(m)?;
    let charge = classify_symmetries(m).charge;
    let target = PI / 12.0 * ch.round();
    o.put_f("gap", gap);
    o.put_f("kappa_over_t_reference", target);
    let mut rows = Vec::new();
    for &t in &cfg.thermal.t_over_gap {
        let beta = 1.0 / (t * gap);
        let grid = transport::default_energy_grid(beta, gap);
        let k = transport::kappa_thermal(m, beta, &grid)?;
        let mut row = vec![t, t * gap, k.over_t, k.unreliable_points as f64];
        if charge {
            let a = transport::alpha_thermoelectric(m, beta, &grid)?;
            let wf = transport::wiedemann_franz(m, beta, &grid)?;
            row.extend([a.value, wf.ratio, wf.expected]);
        }
        rows.push(row);
    }
    let kt: Vec<f64> = rows.iter().map(|r| r[2]).collect();
    let (lo, hi) = kt.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(*x), b.max(*x)));
    let scale = target.abs().max(1e-12);
    o.check_close("plateau_flatness", (hi - lo) / scale, 0.0, 2e-2);
    for (r, t) in rows.iter().zip(&cfg.thermal.t_over_gap) {
        o.check_close(&format!("kappa_over_t_at_{t}"), r[2], target, 2e-2 * scale);
        if charge {
            o.check_close(&format!("alpha_at_{t}"), r[4], 0.0, 1e-6);
            o.check_close(&format!("wiedemann_franz_at_{t}"), r[5] / r[6], 1.0, 2e-2);
        }
    }
    let columns: &[&str] = if charge {
        &["t_over_gap", "t", "kappa_over_t", "unreliable_points", "alpha", "wf_ratio", "wf_expected"]
    } else {
        &["t_over_gap", "t", "kappa_over_t", "unreliable_points"]
    };
    o.table("kappa_vs_t", columns, rows);
    Ok(o)
}

fn spin_task(m: &BdGModel) -> Result<Outcome> {
    let mut o = Outcome::new("transport", "u1_sector_sum");
    let s = transport::sigma_spin(m)?;
    o.put_f("sigma_s3", s.sigma);
    o.put_f("direct", s.direct);
    o.put("sector_chern", s.sector_chern.iter().map(|x| num(*x)).collect::<Vec<_>>());
    o.put_f("sector_sum_snapped", s.sector_sum_snapped);
    o.check_close("direct_equals_sector_sum", s.direct, s.sigma, 1e-8);
    if let (Some(red), Some(closed), Some(even)) = (s.ch_red, s.closed_form_snapped, s.ch_red_even) {
        o.put_f("chern_reduced", red);
        o.put_f("closed_form_snapped", closed);
        o.put("chern_reduced_even", even);
        o.check_close("closed_form", s.sector_sum_snapped, closed, 1e-10);
        o.check_bool("chern_reduced_even", even);
    }
    Ok(o)
}

/// Largest number of modes the Fock-space check accepts.
pub const ORACLE_MAX_MODES: usize = 10;

fn oracle_task(m: &BdGModel, seed: u64) -> Result<Outcome> {
    let mut o = Outcome::new("fock", "exact_fock_space");
    let h = fock::to_block_grading(&m.hamiltonian);
    let modes = h.nrows() / 2;
    if modes > ORACLE_MAX_MODES {
        return Err(bdglab::Error::Parameter(format!(
            "oracle_check needs at most {ORACLE_MAX_MODES} modes, the model has {modes}"
        )));
    }
    let f = FockSpace::new(modes)?;
    let mut gibbs = 0.0f64;
    for beta in [0.5, 5.0] {
        let g = fock::gibbs_two_point(&h, beta, &f)?;
        gibbs = gibbs.max(linalg::max_abs_diff(&g, &fock::fermi_function(&h, beta)?));
    }
    o.put_f("gibbs_residual", gibbs);
    o.check_close("gibbs_equals_fermi_function", gibbs, 0.0, 1e-10);
    let small = modes.min(6);
    let fs = FockSpace::new(small)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lie = 0.0f64;
    for _ in 0..20 {
        let a = fock::random_graded(small, &mut rng);
        let b = fock::random_graded(small, &mut rng);
        lie = lie.max(fock::commutator_identity_check(&a, &b, &fs)?);
    }
    o.put_f("commutator_residual", lie);
    o.check_close("commutator_identity", lie, 0.0, 1e-12);
    let (unit, ph) = fock::bogoliubov_diagonalize(&h)?.group_residuals();
    o.put_f("bogoliubov_residual", unit.max(ph));
    o.check_close("bogoliubov_in_group", unit.max(ph), 0.0, 1e-10);
    Ok(o)
}

fn continuity_task(m: &BdGModel, cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut o = Outcome::new("currents", "local_densities");
    for (name, which) in [
        ("matter", Conserved::Matter),
        ("charge", Conserved::Charge),
        ("spin", Conserved::Spin),
        ("energy", Conserved::Energy),
    ] {
        let r = continuity_residual(m, which)?;
        o.put_f(&format!("{name}_residual"), r.residual);
        o.put(&format!("{name}_conserved"), r.conserved);
        if r.conserved {
            o.check_close(&format!("{name}_continuity"), r.residual, 0.0, 1e-11);
        }
    }
    let beta = if cfg.kubo.beta.is_finite() { cfg.kubo.beta } else { 5.0 };
    let eq = equilibrium_current(m, beta)?;
    o.put_f("equilibrium_current", eq);
    o.check_close("equilibrium_current_vanishes", eq, 0.0, 1e-12);
    Ok(o)
}
