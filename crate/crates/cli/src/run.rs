//! `ratio`, `sweep` and `plot`. Records are cached per config hash; a
//! re-run reuses every finished cell unless `--force` is given.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use clap::Args;
use decoupling_core::caps::{CapFamily, FamilyKind};
use decoupling_core::harness::{
    check_p, curve_ratio, fit_growth, run_cell, CurveMode, Ensemble, GrowthFit, HarnessError, RatioRecord, RhsWeight, SweepCell,
    SweepConfig, MIN_BUDGET,
};
use serde::{Deserialize, Serialize};

use crate::config::{
    config_hash, output_dir, parse_dyadic, parse_ensembles, parse_f64, parse_kind, parse_list, parse_u64, parse_usize,
    parse_weight, Layer,
};
use crate::error::{CliError, CliResult};
use crate::{out, svg, Global};

pub const RECORDS: &str = "records.jsonl";
pub const SUMMARY_JSON: &str = "summary.json";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const PLOT: &str = "ratio_vs_R.svg";

/// Flags shared by `ratio` and `sweep`.
#[derive(Debug, Args)]
pub struct MeasureArgs {
    #[arg(long)]
    pub d: Option<String>,
    /// Half-degree of the phase; 3 gives the sextic surface.
    #[arg(long)]
    pub m: Option<String>,
    #[arg(long)]
    pub kind: Option<String>,
    /// Monte Carlo points per integral.
    #[arg(long)]
    pub budget: Option<String>,
    /// `paper` (the decaying weight, default) or `indicator`.
    #[arg(long)]
    pub weight: Option<String>,
    /// Recompute cells already present in the results directory.
    #[arg(long)]
    pub force: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Comma-separated scales, at least three distinct.
    #[arg(long = "R")]
    pub r: Option<String>,
    /// Comma-separated exponents, fractions allowed (`10/3`).
    #[arg(long)]
    pub p: Option<String>,
    /// Comma-separated ensembles: single, single[i], one, random_phase, lattice(n=N).
    #[arg(long)]
    pub ensembles: Option<String>,
    #[arg(long)]
    pub seeds: Option<String>,
    #[command(flatten)]
    pub common: MeasureArgs,
}

#[derive(Debug, Args)]
pub struct RatioArgs {
    #[arg(long = "R")]
    pub r: Option<String>,
    #[arg(long)]
    pub p: Option<String>,
    #[arg(long)]
    pub ensemble: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// Measure the planar curve model on the block [lambda, 2 lambda] instead.
    #[arg(long)]
    pub lambda: Option<String>,
    /// Piece scale of the curve model (defaults to R).
    #[arg(long = "K")]
    pub k: Option<String>,
    /// Use a midpoint grid with this many steps per axis instead of Monte Carlo.
    #[arg(long)]
    pub grid: Option<String>,
    #[command(flatten)]
    pub common: MeasureArgs,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Results directory holding records.jsonl.
    pub dir: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
struct CurveConfig {
    #[serde(rename = "R")]
    r: u64,
    p: f64,
    ensemble: Ensemble,
    seed: u64,
    lambda: String,
    #[serde(rename = "K")]
    k: Option<u64>,
    grid: Option<usize>,
    budget: usize,
    rhs_weight: RhsWeight,
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
enum RatioConfig {
    Surface(SweepConfig),
    Curve(CurveConfig),
}

/// One planned measurement.
struct Job<'a> {
    key: String,
    run: Box<dyn Fn() -> Result<RatioRecord, HarnessError> + 'a>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct FailureEntry {
    pub cell: String,
    pub error: String,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct Summary {
    pub hash: String,
    pub command: String,
    pub cells: usize,
    pub completed: usize,
    pub failures: Vec<FailureEntry>,
    pub fits: Vec<GrowthFit>,
    pub fit_error: Option<String>,
}

#[derive(Debug, Serialize)]
struct SummaryRow<'a> {
    cell: &'a str,
    status: &'static str,
    #[serde(rename = "R")]
    r: Option<u64>,
    p: Option<f64>,
    ensemble: Option<&'a str>,
    seed: Option<u64>,
    ratio: Option<f64>,
    ratio_stderr: Option<f64>,
    lhs: Option<f64>,
    rhs: Option<f64>,
    error: Option<&'a str>,
}

/// Same format as [`SweepCell::key`], rebuilt from a stored record.
fn record_key(r: &RatioRecord) -> String {
    format!("R={};p={};ens={};seed={}", r.r, r.p, r.ensemble, r.seed)
}

fn common_fields(layer: &Layer, a: &MeasureArgs) -> CliResult<(usize, u32, FamilyKind, usize, RhsWeight)> {
    Ok((
        parse_usize("d", layer.pick(&a.d, "d").unwrap_or("1"))?,
        parse_usize("m", layer.pick(&a.m, "m").unwrap_or("2"))? as u32,
        parse_kind(layer.pick(&a.kind, "kind").unwrap_or("f4"))?,
        parse_usize("budget", layer.pick(&a.budget, "budget").unwrap_or("20000"))?,
        parse_weight(layer.pick(&a.weight, "weight").unwrap_or("paper"))?,
    ))
}

fn surface_jobs(cfg: &SweepConfig) -> CliResult<Vec<Job<'_>>> {
    let mut families: BTreeMap<u64, Result<CapFamily, HarnessError>> = BTreeMap::new();
    for &r in &cfg.r_values {
        families.entry(r).or_insert_with(|| cfg.family(r));
    }
    let families = std::rc::Rc::new(families);
    Ok(cfg
        .cells()
        .into_iter()
        .map(|cell: SweepCell| {
            let fams = families.clone();
            Job {
                key: cell.key(),
                run: Box::new(move || match &fams[&cell.r] {
                    Ok(f) => run_cell(cfg, f, &cell),
                    Err(e) => Err(e.clone()),
                }),
            }
        })
        .collect())
}

pub fn sweep(g: &Global, a: &SweepArgs) -> CliResult<()> {
    let layer = Layer::load(g.config.as_deref(), "sweep")?;
    let (d, m, kind, budget, rhs_weight) = common_fields(&layer, &a.common)?;
    let cfg = SweepConfig {
        r_values: parse_list("R", layer.pick(&a.r, "r").unwrap_or("16,256,4096"), parse_u64)?,
        p_values: parse_list("p", layer.pick(&a.p, "p").unwrap_or("2"), parse_f64)?,
        d,
        m,
        kind,
        ensembles: parse_ensembles(layer.pick(&a.ensembles, "ensembles").unwrap_or("random_phase"))?,
        budget,
        seeds: parse_list("seeds", layer.pick(&a.seeds, "seeds").unwrap_or("0,1,2"), parse_u64)?,
        rhs_weight,
    };
    cfg.validate()?;
    for &r in &cfg.r_values {
        cfg.family(r)?;
    }
    let hash = config_hash("sweep", &cfg);
    let dir = output_dir(a.common.out.as_deref(), g.results_dir.as_deref(), &hash);
    let jobs = surface_jobs(&cfg)?;
    execute(&dir, "sweep", &hash, &cfg, jobs, a.common.force)
}

pub fn ratio(g: &Global, a: &RatioArgs) -> CliResult<()> {
    let layer = Layer::load(g.config.as_deref(), "ratio")?;
    let (d, m, kind, budget, rhs_weight) = common_fields(&layer, &a.common)?;
    let r = parse_u64("R", layer.pick(&a.r, "r").unwrap_or("256"))?;
    let p = parse_f64("p", layer.pick(&a.p, "p").unwrap_or("4"))?;
    let seed = parse_u64("seed", layer.pick(&a.seed, "seed").unwrap_or("0"))?;
    let ens = Ensemble::parse(layer.pick(&a.ensemble, "ensemble").unwrap_or("random_phase"), seed)?;
    check_p(p)?;
    if budget < MIN_BUDGET && layer.pick(&a.grid, "grid").is_none() {
        return Err(HarnessError::BudgetTooSmall(budget).into());
    }
    let cfg = match layer.pick(&a.lambda, "lambda") {
        None => RatioConfig::Surface(SweepConfig {
            r_values: vec![r],
            p_values: vec![p],
            d,
            m,
            kind,
            ensembles: vec![ens],
            budget,
            seeds: vec![seed],
            rhs_weight,
        }),
        Some(l) => RatioConfig::Curve(CurveConfig {
            r,
            p,
            ensemble: ens,
            seed,
            lambda: parse_dyadic("lambda", l)?.to_f64().to_string(),
            k: layer.pick(&a.k, "k").map(|v| parse_u64("K", v)).transpose()?,
            grid: layer.pick(&a.grid, "grid").map(|v| parse_usize("grid", v)).transpose()?,
            budget,
            rhs_weight,
        }),
    };
    let hash = config_hash("ratio", &cfg);
    let dir = output_dir(a.common.out.as_deref(), g.results_dir.as_deref(), &hash);
    match &cfg {
        RatioConfig::Surface(s) => {
            // a single scale: the sweep's "three scales" rule does not apply
            let fam = s.family(r)?;
            let cell = s.cells().remove(0);
            let job = Job {
                key: cell.key(),
                run: Box::new(move || run_cell(s, &fam, &cell)),
            };
            execute(&dir, "ratio", &hash, &cfg, vec![job], a.common.force)
        }
        RatioConfig::Curve(c) => {
            let lambda = parse_dyadic("lambda", &c.lambda)?;
            let mode = match c.grid {
                Some(steps) => CurveMode::Grid { steps },
                None => CurveMode::MonteCarlo { budget: c.budget, seed: c.seed },
            };
            decoupling_core::harness::curve_family(lambda, c.k.unwrap_or(c.r))?;
            let key = SweepCell { r: c.r, p: c.p, ensemble: c.ensemble.clone(), seed: if c.grid.is_some() { 0 } else { c.seed } }.key();
            let job = Job {
                key,
                run: Box::new(move || curve_ratio(&c.ensemble, c.p, c.r, lambda, c.k, c.rhs_weight, mode)),
            };
            execute(&dir, "ratio", &hash, &cfg, vec![job], a.common.force)
        }
    }
}

fn read_records(path: &Path) -> CliResult<Vec<(String, String, RatioRecord)>> {
    let mut out = Vec::new();
    for line in out::read_lines(path)? {
        match serde_json::from_str::<RatioRecord>(&line) {
            Ok(rec) => out.push((record_key(&rec), line, rec)),
            Err(e) => eprintln!("warning: ignoring unreadable line in {}: {e}", path.display()),
        }
    }
    Ok(out)
}

fn execute<C: Serialize>(dir: &Path, command: &str, hash: &str, cfg: &C, jobs: Vec<Job<'_>>, force: bool) -> CliResult<()> {
    out::ensure_dir(dir)?;
    out::write_json(&dir.join("config.json"), &crate::tagged(command, hash, cfg))?;
    let rec_path = dir.join(RECORDS);
    let mut cached: HashMap<String, String> = HashMap::new();
    if force {
        out::write_bytes(&rec_path, b"")?;
    } else {
        for (key, line, _) in read_records(&rec_path)? {
            cached.entry(key).or_insert(line);
        }
    }
    let mut lines: Vec<Option<String>> = Vec::with_capacity(jobs.len());
    let mut errors: Vec<Option<String>> = Vec::with_capacity(jobs.len());
    let mut skipped = 0;
    for (i, job) in jobs.iter().enumerate() {
        if let Some(line) = cached.get(&job.key) {
            skipped += 1;
            lines.push(Some(line.clone()));
            errors.push(None);
            continue;
        }
        match (job.run)() {
            Ok(rec) => {
                let line = serde_json::to_string(&rec).map_err(|e| CliError::io(&rec_path, e))?;
                out::append_line(&rec_path, &line)?;
                eprintln!("[{}/{}] {} ratio={:.6} ({:.1}s)", i + 1, jobs.len(), job.key, rec.ratio, rec.wall_time);
                lines.push(Some(line));
                errors.push(None);
            }
            Err(e) => {
                eprintln!("[{}/{}] {} failed: {e}", i + 1, jobs.len(), job.key);
                lines.push(None);
                errors.push(Some(e.to_string()));
            }
        }
    }
    if skipped > 0 {
        println!("skipped {skipped} cells (already in {}; use --force to recompute)", rec_path.display());
    }
    // rewrite in cell order so the file does not depend on which run produced a line
    let mut text = String::new();
    for l in lines.iter().flatten() {
        text.push_str(l);
        text.push('\n');
    }
    out::write_bytes(&rec_path, text.as_bytes())?;

    let records: Vec<Option<RatioRecord>> = lines
        .iter()
        .map(|l| l.as_deref().map(serde_json::from_str).transpose())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::io(&rec_path, e))?;
    let rows: Vec<SummaryRow> = jobs
        .iter()
        .zip(&records)
        .zip(&errors)
        .map(|((job, rec), err)| SummaryRow {
            cell: &job.key,
            status: if rec.is_some() { "ok" } else { "failed" },
            r: rec.as_ref().map(|r| r.r),
            p: rec.as_ref().map(|r| r.p),
            ensemble: rec.as_ref().map(|r| r.ensemble.as_str()),
            seed: rec.as_ref().map(|r| r.seed),
            ratio: rec.as_ref().map(|r| r.ratio),
            ratio_stderr: rec.as_ref().map(|r| r.ratio_stderr),
            lhs: rec.as_ref().map(|r| r.lhs),
            rhs: rec.as_ref().map(|r| r.rhs),
            error: err.as_deref(),
        })
        .collect();
    out::write_csv(&dir.join(SUMMARY_CSV), &rows)?;

    let done: Vec<RatioRecord> = records.into_iter().flatten().collect();
    let (fits, fit_error) = match fit_growth(&done) {
        Ok(f) => (f, None),
        Err(e) => (Vec::new(), Some(e.to_string())),
    };
    let failures: Vec<FailureEntry> = jobs
        .iter()
        .zip(&errors)
        .filter_map(|(j, e)| e.as_ref().map(|e| FailureEntry { cell: j.key.clone(), error: e.clone() }))
        .collect();
    let summary = Summary {
        hash: hash.to_string(),
        command: command.to_string(),
        cells: jobs.len(),
        completed: done.len(),
        failures,
        fits,
        fit_error,
    };
    out::write_json(&dir.join(SUMMARY_JSON), &summary)?;
    out::write_bytes(&dir.join(PLOT), svg::ratio_plot_svg(&done, &summary.fits).as_bytes())?;

    for f in &summary.fits {
        println!("p={} {}: eps_hat={:.4} over R={:?}", f.p, f.ensemble, f.epsilon_hat, f.r_values);
    }
    if let [rec] = done.as_slice() {
        println!("ratio={:.6} (stderr {:.2e}) lhs={:.6e} rhs={:.6e}", rec.ratio, rec.ratio_stderr, rec.lhs, rec.rhs);
    }
    println!("{}/{} cells complete, results in {}", summary.completed, summary.cells, dir.display());
    if summary.failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Check(format!(
            "{} cell(s) failed, first: {}: {}",
            summary.failures.len(),
            summary.failures[0].cell,
            summary.failures[0].error
        )))
    }
}

pub fn plot(_g: &Global, a: &PlotArgs) -> CliResult<()> {
    let path = a.dir.join(RECORDS);
    if !path.exists() {
        return Err(CliError::io(&path, "no records to plot"));
    }
    let records: Vec<RatioRecord> = read_records(&path)?.into_iter().map(|(_, _, r)| r).collect();
    let fits = fit_growth(&records).unwrap_or_default();
    let target = a.dir.join(PLOT);
    out::write_bytes(&target, svg::ratio_plot_svg(&records, &fits).as_bytes())?;
    println!("{} records plotted to {}", records.len(), target.display());
    Ok(())
}
