//! Partition invariants, the conjugation identity on sampled caps, and the
//! derivative certificates of the rescaled phases.

use std::path::PathBuf;

use clap::Args;
use decoupling_core::caps::{
    axis_intervals, cap_family, flatness, flatness_envelope, omega_regions, tau_decompose, verify_disjoint,
    verify_tiling, AxisInterval, AxisTag, Cap, FamilyId, FamilyKind, Scale,
};
use decoupling_core::oscillo::{Atom, FrequencyFunction, PhaseSpec, SpacePointSet};
use decoupling_core::rescale::{
    check_phase_conditions, conjugate, conjugate_box, conjugate_with, verify_conjugation_with, MapVariant,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::config::{config_hash, output_dir, parse_f64, parse_u64, parse_usize, Layer};
use crate::error::{CliError, CliResult};
use crate::{out, Global};

/// `φ'' ∈ [6, 48]`, `|φ'''| ≤ 48`, `|φ''''| ≤ 24` on the rescaled corner pieces.
const PHASE_BOUNDS: (f64, f64, f64, f64) = (6.0, 48.0, 48.0, 24.0);
const PHASE_SLACK: f64 = 1e-9;
const FLAT_R_MAX: f64 = 8.0;
const CAPS_PER_KIND: usize = 20;
const ATOMS: usize = 8;
const POINTS: usize = 100;

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long = "R")]
    pub r: Option<String>,
    /// Intermediate scale of the eight-region split.
    #[arg(long = "K")]
    pub k: Option<String>,
    #[arg(long)]
    pub m: Option<String>,
    /// Largest accepted relative error of the conjugation identity.
    #[arg(long)]
    pub tolerance: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// Build the space map with `a_j² w_j` on the diagonal instead of `w_j`.
    #[arg(long = "swapped-map", alias = "paper-printed-map")]
    pub swapped_map: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct VerifyConfig {
    #[serde(rename = "R")]
    r: u64,
    #[serde(rename = "K")]
    k: u64,
    m: u32,
    tolerance: f64,
    seed: u64,
    map: MapVariant,
}

#[derive(Debug, Serialize)]
struct Row {
    check: &'static str,
    subject: String,
    value: f64,
    threshold: f64,
    pass: bool,
}

#[derive(Default)]
struct Table {
    rows: Vec<Row>,
    failures: Vec<serde_json::Value>,
}

impl Table {
    fn push(&mut self, check: &'static str, subject: String, value: f64, threshold: f64, pass: bool) -> bool {
        self.rows.push(Row { check, subject, value, threshold, pass });
        pass
    }

    fn fail(&mut self, detail: serde_json::Value) {
        self.failures.push(detail);
    }
}

fn ok_or_fail(t: &mut Table, check: &'static str, subject: String, res: Result<(), impl ToString>) {
    let msg = res.err().map(|e| e.to_string());
    if !t.push(check, subject.clone(), msg.is_some() as u8 as f64, 0.0, msg.is_none()) {
        t.fail(json!({ "check": check, "subject": subject, "error": msg }));
    }
}

/// `1 + Σ_{k=1}^{n} 2^{(2m−2)(k−1)}` intervals with `2^n = R^{1/(2m)}`.
fn expected_axis_count(n: u32, m: u32) -> u64 {
    1 + (0..n).map(|k| 1u64 << ((2 * m - 2) * k)).sum::<u64>()
}

fn partition_checks(t: &mut Table, r: u64, m: u32) -> CliResult<()> {
    let n = Scale::new(r)?.root_log2(2 * m)?;
    let ivs = axis_intervals(r, m)?;
    let want = expected_axis_count(n, m);
    t.push("axis_count", format!("R={r} m={m}"), ivs.len() as f64, want as f64, ivs.len() as u64 == want);
    // flat piece 2^{-n}, last shell piece 2^{-1-(2m-2)(n-1)}
    let shortest = if n == 0 { 1.0 } else { 2f64.powi(-(n as i32)).min(2f64.powi(-1 - (2 * m as i32 - 2) * (n as i32 - 1))) };
    let min_len = ivs.iter().map(|iv| iv.len().to_f64()).fold(f64::INFINITY, f64::min);
    t.push("min_length", format!("R={r} m={m}"), min_len, shortest, min_len == shortest);
    let rf = r as f64;
    for iv in &ivs {
        let fl = flatness(iv, m);
        let (lo, hi) = flatness_envelope(iv, m);
        let inside = fl >= lo * (1.0 - 1e-12) && fl <= hi * (1.0 + 1e-12);
        let pass = inside && fl * rf <= FLAT_R_MAX;
        if !t.push("flatness", format!("{iv}"), fl * rf, FLAT_R_MAX, pass) {
            t.fail(json!({ "check": "flatness", "interval": iv.to_string(), "flatness": fl, "envelope": [lo, hi] }));
        }
    }
    for kind in [FamilyKind::F4, FamilyKind::mixed(&[1]), FamilyKind::F4Tilde, FamilyKind::UniformGrid] {
        let fam = cap_family(r, m, 3, kind)?;
        ok_or_fail(t, "tiling", format!("{kind} R={r} d=3 ({} caps)", fam.len()), verify_tiling(fam.caps(), 3));
    }
    Ok(())
}

fn region_cap(lo: [decoupling_core::caps::DyadicRational; 3], hi: [decoupling_core::caps::DyadicRational; 3], family: FamilyId) -> Cap {
    Cap {
        axes: (0..3).map(|j| AxisInterval::new(lo[j], hi[j], AxisTag::Flat)).collect(),
        family,
    }
}

fn omega_checks(t: &mut Table, k: u64) -> CliResult<Vec<Cap>> {
    let regions = omega_regions(k)?;
    let scale = Scale::new(k)?;
    let boxes: Vec<Cap> = regions
        .iter()
        .map(|reg| {
            let id = FamilyId { scale, m: 2, d: 3, kind: FamilyKind::Tau { region: reg.index as u8 } };
            region_cap(reg.lo, reg.hi, id)
        })
        .collect();
    ok_or_fail(t, "omega_tiling", format!("K={k}"), verify_tiling(&boxes, 3));
    let mut taus = Vec::new();
    for (reg, outer) in regions.iter().zip(&boxes).skip(1) {
        let fam = tau_decompose(reg)?;
        let res = (|| {
            if let Some(c) = fam.caps().iter().find(|c| !outer.contains_cap(c)) {
                return Err(format!("piece {c} leaves the region"));
            }
            let vol = fam.caps().iter().fold(decoupling_core::caps::DyadicRational::ZERO, |v, c| v + c.volume());
            if vol != reg.volume() {
                return Err(format!("piece volumes sum to {vol}, region has {}", reg.volume()));
            }
            verify_disjoint(fam.caps()).map_err(|e| e.to_string())
        })();
        ok_or_fail(t, "tau_tiling", format!("K={k} region {} ({} pieces)", reg.index, fam.len()), res);
        taus.extend(fam.caps().iter().cloned());
    }
    Ok(taus)
}

fn random_atoms(cap: &Cap, rng: &mut ChaCha8Rng) -> FrequencyFunction {
    let b = cap.bounds_f64();
    let atoms = (0..ATOMS)
        .map(|_| Atom {
            xi: b.iter().map(|[lo, hi]| lo + (hi - lo) * rng.random::<f64>()).collect(),
            amp: Complex64::from_polar(0.5 + rng.random::<f64>(), std::f64::consts::TAU * rng.random::<f64>()),
        })
        .collect();
    FrequencyFunction::atomic(cap.dim(), atoms)
}

fn conjugation_checks(t: &mut Table, cfg: &VerifyConfig, taus: &[Cap]) -> CliResult<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pts = SpacePointSet::monte_carlo_ball(&[0.0; 4], cfg.r as f64, POINTS, cfg.seed);
    let mut subjects: Vec<(String, Cap, u32)> = Vec::new();
    for kind in [FamilyKind::F4, FamilyKind::mixed(&[1]), FamilyKind::F4Tilde] {
        let fam = cap_family(cfg.r, cfg.m, 3, kind)?;
        for _ in 0..CAPS_PER_KIND {
            let cap = fam.caps()[rng.random_range(0..fam.len())].clone();
            subjects.push((kind.label(), cap, cfg.m));
        }
    }
    for _ in 0..CAPS_PER_KIND {
        let cap = taus[rng.random_range(0..taus.len())].clone();
        subjects.push((format!("tau(K={})", cfg.k), cap, 2));
    }
    for (label, cap, m) in subjects {
        let f = random_atoms(&cap, &mut rng);
        let phase = PhaseSpec::pure_power(3, 2 * m);
        let conj = conjugate_with(&cap, &phase, cfg.map, None)?;
        let chk = verify_conjugation_with(&f, &cap, &phase, &conj, &pts, cfg.tolerance)?;
        let subject = format!("{label} {cap}");
        if !t.push("conjugation", subject.clone(), chk.max_rel_error, cfg.tolerance, !chk.exceeded) {
            t.fail(json!({
                "check": "conjugation",
                "subject": subject,
                "cap": cap.bounds_f64(),
                "m": m,
                "map": conj,
                "function": f,
                "max_rel_error": chk.max_rel_error,
                "worst_point": pts.point(chk.worst_point),
                "floor": chk.floor,
            }));
        }
    }
    Ok(())
}

fn phase_checks(t: &mut Table, r: u64, k: u64) -> CliResult<()> {
    let (lo, hi, d3, d4) = PHASE_BOUNDS;
    let fam = tau_decompose(&omega_regions(k)?[7])?;
    for tau in fam.caps() {
        let rep = check_phase_conditions(&conjugate(tau, 2)?.phase_out);
        let pass = rep.within(lo, hi + PHASE_SLACK, d3 + PHASE_SLACK, d4 + PHASE_SLACK);
        let min_d2 = rep.axes.iter().map(|a| a.min_d2).fold(f64::INFINITY, f64::min);
        if !t.push("phase_certificate", format!("K={k} {tau}"), min_d2, lo, pass) {
            t.fail(json!({ "check": "phase_certificate", "tau": tau.to_string(), "report": rep }));
        }
    }
    // the flat corner keeps a degenerate axis: min φ'' is exactly 0
    let theta0 = axis_intervals(r, 2)?[0];
    let [a, b] = theta0.bounds_f64();
    let c = conjugate_box(&[a; 3], &[b - a; 3], &PhaseSpec::quartic(3), MapVariant::Exact, None)?;
    let rep = check_phase_conditions(&c.phase_out);
    let worst = rep.axes.iter().map(|ax| ax.min_d2.abs()).fold(0.0, f64::max);
    if !t.push("theta0_degenerate", format!("R={r} {theta0}^3"), worst, 0.0, worst == 0.0) {
        t.fail(json!({ "check": "theta0_degenerate", "report": rep }));
    }
    Ok(())
}

pub fn run(g: &Global, args: &VerifyArgs) -> CliResult<()> {
    let layer = Layer::load(g.config.as_deref(), "verify")?;
    let swapped = layer.flag(args.swapped_map, "swapped_map")? || layer.flag(false, "paper_printed_map")?;
    let cfg = VerifyConfig {
        r: parse_u64("R", layer.pick(&args.r, "r").unwrap_or("256"))?,
        k: parse_u64("K", layer.pick(&args.k, "k").unwrap_or("16"))?,
        m: parse_usize("m", layer.pick(&args.m, "m").unwrap_or("2"))? as u32,
        tolerance: parse_f64("tolerance", layer.pick(&args.tolerance, "tolerance").unwrap_or("1e-9"))?,
        seed: parse_u64("seed", layer.pick(&args.seed, "seed").unwrap_or("0"))?,
        map: if swapped { MapVariant::SwappedScale } else { MapVariant::Exact },
    };
    if cfg.tolerance < 0.0 {
        return Err(CliError::Config(format!("tolerance {} is negative", cfg.tolerance)));
    }
    // validate scales before anything is written
    Scale::new(cfg.r)?.root_log2(2 * cfg.m)?;
    omega_regions(cfg.k)?;

    let mut t = Table::default();
    partition_checks(&mut t, cfg.r, cfg.m)?;
    let taus = omega_checks(&mut t, cfg.k)?;
    conjugation_checks(&mut t, &cfg, &taus)?;
    phase_checks(&mut t, cfg.r, cfg.k)?;

    let hash = config_hash("verify", &cfg);
    let dir = output_dir(args.out.as_deref(), g.results_dir.as_deref(), &hash);
    out::ensure_dir(&dir)?;
    out::write_json(&dir.join("config.json"), &crate::tagged("verify", &hash, &cfg))?;
    out::write_csv(&dir.join("verify.csv"), &t.rows)?;
    out::write_json(&dir.join("failures.json"), &t.failures)?;

    let failed: Vec<&Row> = t.rows.iter().filter(|r| !r.pass).collect();
    let mut by_check: Vec<(&str, usize, usize)> = Vec::new();
    for r in &t.rows {
        match by_check.iter_mut().find(|(c, _, _)| *c == r.check) {
            Some(e) => {
                e.1 += 1;
                e.2 += r.pass as usize;
            }
            None => by_check.push((r.check, 1, r.pass as usize)),
        }
    }
    for (check, n, passed) in &by_check {
        println!("{check:<18} {passed}/{n} pass");
    }
    println!("results in {}", dir.display());
    if failed.is_empty() {
        return Ok(());
    }
    let worst_conj = failed
        .iter()
        .filter(|r| r.check == "conjugation")
        .map(|r| r.value)
        .fold(0.0, f64::max);
    let mut msg = format!("{} of {} checks failed, first: {} {}", failed.len(), t.rows.len(), failed[0].check, failed[0].subject);
    if cfg.map == MapVariant::SwappedScale {
        msg.push_str(&format!(
            "; with the swapped space map |E_tau f(x)| and |E^psi f~(Tx)| differ by a relative {worst_conj:.3e}"
        ));
    }
    Err(CliError::Check(msg))
}
