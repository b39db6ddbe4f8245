//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

use std::f64::consts::PI;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use bdglab::boundary::{self, build_half_space, EdgeWindow};
use bdglab::currents::{continuity_residual, equilibrium_current, Conserved};
use bdglab::fock::{self, FockSpace};
use bdglab::invariants::{chern_index, chern_realspace, chern_relations, model_fermi_projection};
use bdglab::lattice::{derivation, random_local_operator, trace_per_volume, Flux};
use bdglab::linalg;
use bdglab::models::random_local_model;
use bdglab::transport::{self, KuboConfig, Perturbation};
use bdglab::{build_model, BdGModel, BlockOperator, Direction, DisorderRealization, Kinetic, LatticeSpec};
use bdglab::{PairingKind, PairingSpec};
use bdglab_cli::config::ExperimentConfig;
use bdglab_cli::{run, RunOptions};
use ndarray::Array2;
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Verdict = Result<(bool, String), Box<dyn std::error::Error>>;

fn preset(kind: PairingKind, n: usize, mu: f64, w: f64, seed: u64) -> bdglab::Result<BdGModel> {
    preset_rect(kind, n, n, mu, w, seed)
}

fn preset_rect(kind: PairingKind, n1: usize, n2: usize, mu: f64, w: f64, seed: u64) -> bdglab::Result<BdGModel> {
    let s = LatticeSpec::torus(n1, n2, kind.fiber_dim())?;
    let d = if w > 0.0 {
        DisorderRealization::generate(&s, w, seed, "acceptance")?
    } else {
        DisorderRealization::clean(&s)
    };
    build_model(&s, Some(PairingSpec::new(kind, 1.0)), mu, &d, Kinetic::Laplacian)
}

fn pip(n: usize, mu: f64) -> bdglab::Result<BdGModel> {
    preset(PairingKind::PPlusIP, n, mu, 0.0, 0)
}

/// Normal metal at flux 1/4 per plaquette on an `n1 × n2` torus.
fn hofstadter(n1: usize, n2: usize) -> bdglab::Result<BdGModel> {
    let s = LatticeSpec::torus(n1, n2, 1)?.with_flux(Flux::new(1, 4)?)?;
    build_model(&s, None, -2.0, &DisorderRealization::clean(&s), Kinetic::MagneticLaplacian)
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn c1_chern_quantization() -> Verdict {
    let t = Instant::now();
    let top = chern_realspace(&model_fermi_projection(&pip(16, -1.0)?)?)?;
    let triv = chern_realspace(&model_fermi_projection(&pip(16, -6.0)?)?)?;
    let secs = t.elapsed().as_secs_f64();
    let pass = (top.value.abs() - 1.0).abs() <= 1e-2 && triv.value.abs() <= 1e-2 && secs <= 30.0;
    Ok((pass, format!("Ch(topological) = {:.6}, Ch(trivial) = {:.2e}, {secs:.1} s", top.value, triv.value)))
}

fn c2_index_theorem() -> Verdict {
    let t = Instant::now();
    let mut cases: Vec<(String, BdGModel)> = Vec::new();
    // nodal presets (p_x, d_xy, d_x2y2) close their gap in infinite volume
    for kind in [
        PairingKind::SWave,
        PairingKind::ExtendedS,
        PairingKind::PPlusIP,
        PairingKind::PMinusIP,
        PairingKind::SpinfulP,
        PairingKind::TripletP,
        PairingKind::DPlusID,
        PairingKind::DMinusID,
    ] {
        cases.push((format!("{kind} mu=-2"), preset(kind, 16, -2.0, 0.0, 0)?));
    }
    cases.push(("p_plus_ip mu=-6".into(), pip(16, -6.0)?));
    cases.push(("hofstadter 1/4".into(), hofstadter(16, 16)?));
    for seed in 1..=5 {
        cases.push((format!("p_plus_ip mu=-1 W=0.5 seed {seed}"), preset(PairingKind::PPlusIP, 16, -1.0, 0.5, seed)?));
    }
    let mut mismatches = Vec::new();
    let mut min_gap = f64::INFINITY;
    for (name, m) in &cases {
        let fp = model_fermi_projection(m)?;
        min_gap = min_gap.min(fp.gap);
        let a = chern_realspace(&fp)?;
        let b = chern_index(&fp, (0.5, 0.5))?;
        if a.snap != b.result.snap {
            mismatches.push(format!("{name}: trace {} index {}", a.snap, b.result.snap));
        }
    }
    let secs = t.elapsed().as_secs_f64();
    let pass = mismatches.is_empty() && min_gap >= 0.4 && secs <= 300.0;
    let detail = if mismatches.is_empty() {
        format!("{} models agree, smallest gap {min_gap:.3}, {secs:.1} s", cases.len())
    } else {
        mismatches.join("; ")
    };
    Ok((pass, detail))
}

fn c3_symmetry_relations() -> Verdict {
    let charge = chern_relations(&hofstadter(16, 16)?)?.charge.ok_or("Hofstadter model lost charge symmetry")?;
    let su2 = chern_relations(&preset(PairingKind::DPlusID, 12, -1.0, 0.0, 0)?)?
        .su2
        .ok_or("d_plus_id lost SU(2)")?;
    let red_snap = su2.0.round() as i64;
    let mut trs = 0.0f64;
    for kind in [PairingKind::SWave, PairingKind::TripletP] {
        trs = trs.max(chern_relations(&preset(kind, 12, -2.0, 0.0, 0)?)?.trs.ok_or("preset lost time reversal")?);
    }
    let pass = charge.1 <= 1e-10 && su2.1 <= 1e-10 && red_snap % 2 == 0 && red_snap != 0 && trs <= 1e-2;
    Ok((
        pass,
        format!(
            "|Ch(P) - 2Ch(p)| = {:.1e}, |Ch(P) - 2Ch(P_red)| = {:.1e}, Ch(P_red) = {:.4} (snap {red_snap}), max |Ch| with TRS = {trs:.1e}",
            charge.1, su2.1, su2.0
        ),
    ))
}

fn c4_bulk_boundary() -> Verdict {
    let t = Instant::now();
    let ch = chern_realspace(&model_fermi_projection(&pip(16, -1.0)?)?)?;
    let hs = build_half_space(&preset_rect(PairingKind::PPlusIP, 8, 24, -1.0, 0.0, 0)?, 24)?.with_twists(32);
    let w = EdgeWindow::bump(0.5 * hs.bulk_gap)?;
    let j0 = boundary::edge_current(&hs, &w)?;
    let j1 = boundary::edge_current(&hs, &EdgeWindow::bump(0.3 * hs.bulk_gap)?)?;
    let wn = boundary::winding_number(&hs, &w)?;
    let q = boundary::quarter_plane_index(&hs, &w)?;
    let secs = t.elapsed().as_secs_f64();
    let four_pi = 4.0 * PI * j0;
    let pass = wn.snap == 1
        && ch.snap == 1
        && (four_pi - 1.0).abs() <= 0.05
        && rel(j1, j0) <= 1e-2
        && q.result.snap == 1
        && secs <= 120.0;
    Ok((
        pass,
        format!(
            "winding {:.5} (snap {}), bulk snap {}, 4pi j = {four_pi:.5}, window spread {:.1e}, quarter-plane index {}, {secs:.1} s",
            wn.value,
            wn.snap,
            ch.snap,
            rel(j1, j0),
            q.result.snap
        ),
    ))
}

fn c5_kubo() -> Verdict {
    let m = pip(16, -1.0)?;
    let ch = chern_realspace(&model_fermi_projection(&m)?)?.snap as f64;
    let cfg = KuboConfig::new(f64::INFINITY, 1e-3, Perturbation::Gravitational)?;
    let sigma = transport::kubo_sigma(&m, &cfg)?;
    let on = transport::onsager_check(&m, &cfg)?;
    let target = ch / (4.0 * PI);
    let pass = rel(sigma, target) <= 2e-2 && on.residual <= 1e-8;
    Ok((
        pass,
        format!(
            "sigma = {sigma:.6} vs Ch/4pi = {target:.6} ({:.2}%), Onsager residual {:.1e}",
            100.0 * rel(sigma, target),
            on.residual
        ),
    ))
}

fn c6_spin_hall() -> Verdict {
    let s = transport::sigma_spin(&preset(PairingKind::DMinusID, 12, -1.0, 0.0, 0)?)?;
    let red = s.ch_red.ok_or("no SU(2) reduction")?;
    let closed = s.closed_form_snapped.ok_or("no closed form")?;
    let target = 1.0 / (4.0 * PI);
    let pass = red.round() == 2.0 && rel(s.sigma, target) <= 2e-2 && (s.sector_sum_snapped - closed).abs() <= 1e-10;
    Ok((
        pass,
        format!(
            "Ch_red = {red:.4}, sigma_S3 = {:.6} vs 1/4pi = {target:.6} ({:.2}%), sector sum - closed form = {:.1e}",
            s.sigma,
            100.0 * rel(s.sigma, target),
            s.sector_sum_snapped - closed
        ),
    ))
}

const T_OVER_GAP: [f64; 3] = [1.0 / 40.0, 1.0 / 20.0, 1.0 / 10.0];

fn c7_thermal_hall() -> Verdict {
    let m = pip(16, -1.0)?;
    let gap = m.gap()?;
    let ch = chern_realspace(&model_fermi_projection(&m)?)?.snap as f64;
    let target = PI / 12.0 * ch;
    let mut kt = Vec::new();
    for t in T_OVER_GAP {
        let beta = 1.0 / (t * gap);
        let k = transport::kappa_thermal(&m, beta, &transport::default_energy_grid(beta, gap))?;
        kt.push(k.over_t);
    }
    let (lo, hi) = kt.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(*x), b.max(*x)));
    let plateau = (hi - lo) / target.abs();
    let at_mid = rel(kt[1], target);

    let hof = hofstadter(16, 16)?;
    let hgap = hof.gap()?;
    let mut wf = 0.0f64;
    for t in T_OVER_GAP {
        let beta = 1.0 / (t * hgap);
        let r = transport::wiedemann_franz(&hof, beta, &transport::default_energy_grid(beta, hgap))?;
        wf = wf.max(rel(r.ratio, r.expected));
    }

    let hs = build_half_space(&preset_rect(PairingKind::PPlusIP, 8, 24, -1.0, 0.0, 0)?, 24)?.with_twists(128);
    let beta = 20.0 / hs.bulk_gap;
    let edge = boundary::thermal_edge_current(&hs, beta, 0.5, 0.9)?;
    let bulk = transport::kappa_thermal(&m, beta, &transport::default_energy_grid(beta, gap))?;
    let jt = rel(edge.j_h_over_t2, PI / 24.0 * ch);
    let kk = rel(edge.kappa_hat, bulk.value);
    let pass = at_mid <= 2e-2 && plateau <= 2e-2 && wf <= 2e-2 && jt <= 3e-2 && kk <= 3e-2;
    Ok((
        pass,
        format!(
            "kappa/T at gap/20 off by {:.3}%, plateau spread {:.3}%, WF off by {:.3}%, edge j_H/T^2 off by {:.2}%, edge kappa off by {:.2}%",
            100.0 * at_mid,
            100.0 * plateau,
            100.0 * wf,
            100.0 * jt,
            100.0 * kk
        ),
    ))
}

fn c8_thermoelectric() -> Verdict {
    let hof = hofstadter(16, 16)?;
    let gap = hof.gap()?;
    let mut alpha = 0.0f64;
    for t in T_OVER_GAP {
        let beta = 1.0 / (t * gap);
        alpha = alpha.max(transport::alpha_thermoelectric(&hof, beta, &transport::default_energy_grid(beta, gap))?.value.abs());
    }
    let hs = build_half_space(&hofstadter(4, 16)?, 16)?.with_twists(128);
    let delta = 0.25 * hs.bulk_gap;
    let edge = boundary::thermoelectric_edge_check(&hs, delta, delta, 0.0)?;
    let pass = alpha <= 1e-6 && edge.value.abs() <= 1e-6;
    Ok((pass, format!("max |alpha| = {alpha:.1e}, boundary response = {:.1e}", edge.value.abs())))
}

fn c9_oracle() -> Verdict {
    let t = Instant::now();
    let fs = FockSpace::new(6)?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut lie = 0.0f64;
    for _ in 0..200 {
        let a = fock::random_graded(6, &mut rng);
        let b = fock::random_graded(6, &mut rng);
        lie = lie.max(fock::commutator_identity_check(&a, &b, &fs)?);
    }
    let m = preset(PairingKind::PPlusIP, 2, -0.5, 0.3, 7)?;
    let h = fock::to_block_grading(&m.hamiltonian);
    let f = FockSpace::new(h.nrows() / 2)?;
    let mut gibbs = 0.0f64;
    for beta in [0.5, 5.0] {
        let g = fock::gibbs_two_point(&h, beta, &f)?;
        gibbs = gibbs.max(linalg::max_abs_diff(&g, &fock::fermi_function(&h, beta)?));
    }
    let (unit, ph) = fock::bogoliubov_diagonalize(&h)?.group_residuals();
    let secs = t.elapsed().as_secs_f64();
    let pass = lie <= 1e-12 && gibbs <= 1e-10 && unit.max(ph) <= 1e-10 && secs <= 60.0;
    Ok((
        pass,
        format!(
            "commutator identity {lie:.1e}, Gibbs vs f(H) {gibbs:.1e}, Bogoliubov {:.1e}, {secs:.1} s",
            unit.max(ph)
        ),
    ))
}

/// Keeps the entries of `h` and `Δ` that preserve `S³`: spin-diagonal
/// hoppings and pairing between opposite spins.
fn spin_conserving(m: &BdGModel) -> bdglab::Result<BdGModel> {
    let h = ndarray_mask(&m.h, |a, b| a % 2 == b % 2);
    let d = ndarray_mask(&m.delta, |a, b| a % 2 != b % 2);
    BdGModel::from_parts(m.spec, h, d)
}

fn ndarray_mask(a: &Array2<C64>, keep: impl Fn(usize, usize) -> bool) -> Array2<C64> {
    let mut out = a.clone();
    for ((r, c), x) in out.indexed_iter_mut() {
        if !keep(r, c) {
            *x = linalg::ZERO;
        }
    }
    out
}

fn c10_continuity() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let general = random_local_model(LatticeSpec::torus(8, 8, 1)?, 2, &mut rng)?;
    let normal = {
        let m = random_local_model(LatticeSpec::torus(8, 8, 1)?, 2, &mut rng)?;
        let zero = m.delta.mapv(|_| linalg::ZERO);
        BdGModel::from_parts(m.spec, m.h.clone(), zero)?
    };
    let spinful = spin_conserving(&random_local_model(LatticeSpec::torus(8, 8, 2)?, 2, &mut rng)?)?;
    let mut worst = [f64::NAN; 4];
    let mut eq = 0.0f64;
    for m in [&general, &normal, &spinful] {
        for (k, which) in [Conserved::Matter, Conserved::Charge, Conserved::Spin, Conserved::Energy]
            .into_iter()
            .enumerate()
        {
            let r = continuity_residual(m, which)?;
            if r.conserved {
                worst[k] = if worst[k].is_nan() { r.residual } else { worst[k].max(r.residual) };
            }
        }
        for beta in [1.0, 5.0] {
            eq = eq.max(equilibrium_current(m, beta)?);
        }
    }
    let pass = worst.iter().all(|r| *r <= 1e-11) && eq <= 1e-12;
    Ok((
        pass,
        format!(
            "matter {:.1e}, charge {:.1e}, spin {:.1e}, energy {:.1e}, equilibrium current {eq:.1e}",
            worst[0], worst[1], worst[2], worst[3]
        ),
    ))
}

fn tau(a: &BlockOperator) -> bdglab::Result<C64> {
    trace_per_volume(a)
}

fn trace_norm(a: &BlockOperator) -> bdglab::Result<f64> {
    Ok(linalg::singular_values(a.data())?.iter().sum::<f64>() / a.spec().sites() as f64)
}

fn operator_norm(a: &BlockOperator) -> bdglab::Result<f64> {
    Ok(linalg::singular_values(a.data())?.last().copied().unwrap_or(0.0))
}

/// Trace and derivation identities on random local operators,
/// worst residual over several draws.
fn trace_properties() -> bdglab::Result<(f64, f64, f64)> {
    let spec = LatticeSpec::torus(8, 8, 2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut trace_worst = (tau(&BlockOperator::identity(spec))? - 2.0 * spec.fiber_l as f64).norm();
    let mut derivation_worst = 0.0f64;
    let mut norm_excess = f64::NEG_INFINITY;
    for _ in 0..4 {
        let a = random_local_operator(&spec, 1, &mut rng);
        let b = random_local_operator(&spec, 2, &mut rng);
        let pos = tau(&a.adjoint().matmul(&a))?;
        trace_worst = trace_worst.max(pos.im.abs()).max((-pos.re).max(0.0));
        trace_worst = trace_worst.max((tau(&a.adjoint())? - tau(&a)?.conj()).norm());
        trace_worst = trace_worst.max((tau(&a.matmul(&b))? - tau(&b.matmul(&a))?).norm());
        let lhs = trace_norm(&a.matmul(&b))?;
        let rhs = operator_norm(&a)? * trace_norm(&b)?;
        norm_excess = norm_excess.max((lhs - rhs) / rhs);
        for j in [Direction::One, Direction::Two] {
            let da = derivation(&a, j)?;
            let db = derivation(&b, j)?;
            trace_worst = trace_worst.max(tau(&da)?.norm());
            trace_worst = trace_worst.max((tau(&a.matmul(&db))? + tau(&da.matmul(&b))?).norm());
            let ab = a.matmul(&b).with_range(3);
            let leibniz = derivation(&ab, j)?.sub(&da.matmul(&b)).sub(&a.matmul(&db));
            derivation_worst = derivation_worst.max(leibniz.max_abs());
            derivation_worst = derivation_worst.max(derivation(&a.adjoint(), j)?.max_abs_diff(&da.adjoint()));
        }
    }
    Ok((trace_worst, norm_excess, derivation_worst))
}

const SMALL: &str = r#"
tasks = ["chern_realspace", "kubo_sweep", "symmetry_report"]

[model]
preset = "p_plus_ip"
mu = -1.0

[lattice]
n1 = 10
n2 = 10

[disorder]
w = 0.5
seed_count = 2

[kubo]
deltas = [0.1, 0.01]
"#;

fn strip_wall_time(path: &Path) -> Result<serde_json::Value, Box<dyn std::error::Error>> {
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path)?)?;
    if let Some(o) = v.as_object_mut() {
        o.remove("wall_time_s");
    }
    Ok(v)
}

/// Two runs with different worker counts; JSON compared without wall times,
/// everything else byte for byte.
fn cli_reruns_identical() -> Result<bool, Box<dyn std::error::Error>> {
    let cfg = ExperimentConfig::from_toml(SMALL)?;
    let a = tempfile::tempdir()?;
    let b = tempfile::tempdir()?;
    for (dir, workers) in [(a.path(), 1), (b.path(), 2)] {
        let opts = RunOptions {
            workers,
            out: Some(dir.to_path_buf()),
            seed_base: 0,
        };
        run(&cfg, &opts)?;
    }
    let mut names: Vec<_> = fs::read_dir(a.path())?.map(|e| e.map(|e| e.file_name())).collect::<Result<_, _>>()?;
    names.sort();
    let mut other: Vec<_> = fs::read_dir(b.path())?.map(|e| e.map(|e| e.file_name())).collect::<Result<_, _>>()?;
    other.sort();
    if names != other || names.is_empty() {
        return Ok(false);
    }
    for n in names {
        let (pa, pb) = (a.path().join(&n), b.path().join(&n));
        let same = if pa.extension().is_some_and(|e| e == "json") {
            strip_wall_time(&pa)? == strip_wall_time(&pb)?
        } else {
            fs::read(&pa)? == fs::read(&pb)?
        };
        if !same {
            return Ok(false);
        }
    }
    Ok(true)
}

fn c11_property_suites() -> Verdict {
    let (trace, norm_excess, deriv) = trace_properties()?;
    let cli = cli_reruns_identical()?;
    let pass = trace <= 1e-12 && norm_excess <= 1e-12 && deriv <= 1e-12 && cli;
    Ok((
        pass,
        format!(
            "trace identities {trace:.1e}, norm bound excess {norm_excess:.2e}, Leibniz and *-derivation {deriv:.1e}, CLI reruns identical: {cli}"
        ),
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 11] = [
        ("Chern quantization", c1_chern_quantization),
        ("index theorem", c2_index_theorem),
        ("symmetry relations", c3_symmetry_relations),
        ("bulk-boundary correspondence", c4_bulk_boundary),
        ("Kubo delta limit", c5_kubo),
        ("spin Hall", c6_spin_hall),
        ("thermal Hall", c7_thermal_hall),
        ("thermoelectric", c8_thermoelectric),
        ("Fock oracle", c9_oracle),
        ("continuity equations", c10_continuity),
        ("property suites", c11_property_suites),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let id = k + 1;
        if !filter.is_empty() && !filter.iter().any(|x| x == &id.to_string()) {
            continue;
        }
        let (pass, detail) = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(Ok(v)) => v,
            Ok(Err(e)) => (false, format!("error: {e}")),
            Err(_) => (false, "panicked".to_string()),
        };
        if !pass {
            failed += 1;
        }
        println!("criterion {id:>2} {name}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
