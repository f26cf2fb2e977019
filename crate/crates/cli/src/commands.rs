//! One function per subcommand; each returns the table that `main` writes.

use std::f64::consts::FRAC_PI_2;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tempent_core::gaussian::te_entropy;
use tempent_core::majorana::{kappa_exact, spectral_density_with_window};
use tempent_core::mps::{continue_fixed_point, czz_from_im, entropy_curve, perfect_dephaser_im, TemporalMps, TruncationReport, SV_FLOOR};
use tempent_core::spin::czz_ed;
use tempent_core::ModelParams;

use crate::collapse::{anchor_point, self_dual_point, CollapseDataset, CollapseRow};
use crate::config::{Command, RunConfig};
use crate::output::{Cell, Table};
use crate::CliError;

/// Allowed gap between the ED and MPS autocorrelations where both are exact.
pub const OVERLAP_TOL: f64 = 1e-6;

/// Iterations between MPS checkpoint writes.
pub const CHECKPOINT_EVERY: usize = 10;

pub fn run(cfg: &RunConfig) -> Result<Table, CliError> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build().map_err(|e| CliError::Numerical(format!("worker pool: {e}")))?;
    pool.install(|| match cfg.command()? {
        Command::Kappa => cmd_kappa(cfg),
        Command::Spectrum => cmd_spectrum(cfg),
        Command::EntropyCurve => cmd_entropy_curve(cfg),
        Command::PhaseDiagram => cmd_phase_diagram(cfg),
        Command::Collapse => Ok(collapse_table(&cmd_collapse(cfg)?)),
        Command::Czz => cmd_czz(cfg),
        Command::Mps => cmd_mps(cfg),
    })
}

fn params(j: f64, g: f64, h: f64) -> Result<ModelParams, CliError> {
    ModelParams::new(j, g, h).map_err(|e| CliError::Validation(e.to_string()))
}

pub fn cmd_kappa(cfg: &RunConfig) -> Result<Table, CliError> {
    let p = cfg.params()?;
    let k = kappa_exact(&p, cfg.t_max())?;
    let mut table = Table::new(&["tau", "kappa", "kappa_ratio"]);
    for (tau, &v) in k.values.iter().enumerate() {
        let ratio = if k.prefactor != 0.0 { v / k.prefactor } else { f64::NAN };
        table.push(vec![tau.into(), v.into(), ratio.into()]);
    }
    table.extra = json!({
        "prefactor": k.prefactor,
        "edge_zero_sq": k.edge_zero_sq,
        "edge_pi_sq": k.edge_pi_sq,
    });
    Ok(table)
}

pub fn cmd_spectrum(cfg: &RunConfig) -> Result<Table, CliError> {
    let sd = spectral_density_with_window(&cfg.params()?, cfg.omega_points, cfg.window)?;
    let mut table = Table::new(&["omega", "jr", "ji"]);
    for ((&om, &jr), &ji) in sd.omega.iter().zip(&sd.jr).zip(&sd.ji) {
        table.push(vec![om.into(), jr.into(), ji.into()]);
    }
    table.extra = json!({
        "delta_zero": sd.delta_zero,
        "delta_pi": sd.delta_pi,
        "window": sd.window,
        "taper_fraction": sd.taper_fraction,
        "leakage": sd.leakage,
        "warnings": sd.warnings,
    });
    Ok(table)
}

/// Half-cut (or `cut_fraction`) entropy for each horizon; `h ≠ 0` goes to [`cmd_mps`].
pub fn cmd_entropy_curve(cfg: &RunConfig) -> Result<Table, CliError> {
    let p = cfg.params()?;
    if p.h != 0.0 {
        log::info!("h = {} breaks integrability, running the MPS engine", p.h);
        return cmd_mps(cfg);
    }
    let ts = cfg.horizons(1, 1);
    let values: Vec<f64> = ts.par_iter().map(|&t| te_entropy(&p, t, cfg.cut_fraction)).collect::<Result<_, _>>()?;
    let mut table = Table::new(&["t", "s"]);
    for (&t, s) in ts.iter().zip(values) {
        table.push(vec![t.into(), s.into()]);
    }
    Ok(table)
}

/// Cell-centred grid over the quadrant at horizon `t_max`.
pub fn phase_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| (i as f64 + 0.5) * FRAC_PI_2 / n as f64).collect()
}

pub fn cmd_phase_diagram(cfg: &RunConfig) -> Result<Table, CliError> {
    let axis = phase_grid(cfg.grid);
    let t = cfg.t_max();
    let points: Vec<(f64, f64)> = axis.iter().flat_map(|&j| axis.iter().map(move |&g| (j, g))).collect();
    let values: Vec<f64> = points.par_iter().map(|&(j, g)| Ok(te_entropy(&params(j, g, 0.0)?, t, cfg.cut_fraction)?)).collect::<Result<_, CliError>>()?;
    let mut table = Table::new(&["j", "g", "s"]);
    for (&(j, g), s) in points.iter().zip(values) {
        table.push(vec![j.into(), g.into(), s.into()]);
    }
    table.extra = json!({ "t": t });
    Ok(table)
}

/// Entropy curves at detunings `0, ±δ` (anchor) or `0, δ` (self-dual direction).
pub fn cmd_collapse(cfg: &RunConfig) -> Result<CollapseDataset, CliError> {
    cfg.validate()?;
    let mut deltas = vec![0.0];
    deltas.extend(cfg.deltas.iter().copied());
    if cfg.anchor.is_some() {
        deltas.extend(cfg.deltas.iter().map(|d| -d));
    }
    let point = |delta: f64| match (cfg.anchor, cfg.angle) {
        (Some(x), _) => anchor_point(x, delta),
        (None, Some(phi)) => self_dual_point(phi, delta),
        (None, None) => unreachable!("validated"),
    };
    let ts = cfg.horizons(10, 10);
    let jobs: Vec<(f64, usize)> = deltas.iter().flat_map(|&d| ts.iter().map(move |&t| (d, t))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(delta, t)| {
            let (j, g) = point(delta);
            let s = te_entropy(&params(j, g, 0.0)?, t, cfg.cut_fraction)?;
            Ok(CollapseRow { delta, t, delta_t: delta * t as f64, s })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(CollapseDataset::new(rows, cfg.anchor, cfg.angle, cfg.cut_fraction))
}

pub fn collapse_table(data: &CollapseDataset) -> Table {
    let mut table = Table::new(&["delta", "t", "delta_t", "s"]);
    for r in &data.rows {
        table.push(vec![r.delta.into(), r.t.into(), r.delta_t.into(), r.s.into()]);
    }
    let positive: Vec<f64> = data.deltas().into_iter().filter(|d| *d > 0.0).collect();
    let negative: Vec<f64> = data.deltas().into_iter().filter(|d| *d < 0.0).collect();
    table.extra = json!({
        "anchor": data.anchor,
        "angle": data.angle,
        "cut_fraction": data.cut_fraction,
        "deviation_positive": data.deviation(&positive),
        "deviation_negative": data.deviation(&negative),
    });
    table
}

/// Bookkeeping stored next to an MPS checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ReportFile {
    discarded: Vec<f64>,
    max_bond: usize,
    iterations: usize,
    chi: usize,
    floor: f64,
}

impl From<&TruncationReport> for ReportFile {
    fn from(r: &TruncationReport) -> Self {
        Self { discarded: r.discarded.clone(), max_bond: r.max_bond, iterations: r.iterations, chi: r.chi, floor: r.floor }
    }
}

impl From<ReportFile> for TruncationReport {
    fn from(r: ReportFile) -> Self {
        Self { discarded: r.discarded, max_bond: r.max_bond, iterations: r.iterations, chi: r.chi, floor: r.floor }
    }
}

fn checkpoint_paths(dir: &Path, p: &ModelParams, t: usize, chi: usize) -> (PathBuf, PathBuf) {
    let stem = format!("im_j{}_g{}_h{}_t{t}_chi{chi}", p.j, p.g, p.h);
    (dir.join(format!("{stem}.temp")), dir.join(format!("{stem}.json")))
}

fn load_checkpoint(dir: &Path, p: &ModelParams, t: usize, chi: usize) -> Result<Option<(TemporalMps, TruncationReport)>, CliError> {
    let (mps_path, report_path) = checkpoint_paths(dir, p, t, chi);
    if !(mps_path.exists() && report_path.exists()) {
        return Ok(None);
    }
    let mps = TemporalMps::read_checkpoint(BufReader::new(File::open(&mps_path)?))?;
    let report: ReportFile =
        serde_json::from_reader(BufReader::new(File::open(&report_path)?)).map_err(|e| CliError::Numerical(format!("{}: {e}", report_path.display())))?;
    if mps.len() != t || report.chi != chi {
        return Err(CliError::Numerical(format!("{} does not match t = {t}, chi = {chi}", mps_path.display())));
    }
    log::info!("resuming from {} after {} iterations", mps_path.display(), report.iterations);
    Ok(Some((mps, report.into())))
}

fn save_checkpoint(dir: &Path, p: &ModelParams, mps: &TemporalMps, report: &TruncationReport) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    let (mps_path, report_path) = checkpoint_paths(dir, p, mps.len(), report.chi);
    mps.write_checkpoint(BufWriter::new(File::create(mps_path)?))?;
    serde_json::to_writer(BufWriter::new(File::create(report_path)?), &ReportFile::from(report)).map_err(|e| CliError::Numerical(e.to_string()))?;
    Ok(())
}

/// Fixed-point IM on `t` periods, resuming from and writing to `checkpoint` if given.
pub fn solve_im(p: &ModelParams, t: usize, chi: usize, checkpoint: Option<&Path>) -> Result<(TemporalMps, TruncationReport), CliError> {
    let Some(dir) = checkpoint else {
        return Ok(tempent_core::mps::fixed_point_im(p, t, chi)?);
    };
    let (mut mps, mut report) = match load_checkpoint(dir, p, t, chi)? {
        Some(state) => state,
        None => (perfect_dephaser_im(t)?, TruncationReport { chi, floor: SV_FLOOR, max_bond: 1, ..Default::default() }),
    };
    while report.iterations < t {
        let target = (report.iterations + CHECKPOINT_EVERY).min(t);
        (mps, report) = continue_fixed_point(p, mps, report, target)?;
        save_checkpoint(dir, p, &mps, &report)?;
    }
    Ok((mps, report))
}

fn fields_and_chis(cfg: &RunConfig) -> Vec<(f64, usize)> {
    cfg.fields().into_iter().flat_map(|h| cfg.chi.iter().map(move |&c| (h, c))).collect()
}

pub fn cmd_mps(cfg: &RunConfig) -> Result<Table, CliError> {
    let ts = cfg.horizons(1, 1);
    let horizon = ts.iter().copied().max().unwrap_or(0);
    let jobs = fields_and_chis(cfg);
    let runs = jobs
        .par_iter()
        .map(|&(h, chi)| {
            let p = params(cfg.j, cfg.g, h)?;
            let (im, report) = solve_im(&p, horizon, chi, cfg.checkpoint.as_deref())?;
            Ok((entropy_curve(&im, &ts, cfg.cut_fraction)?, report))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut table = Table::new(&["h", "chi", "t", "s", "max_bond", "discarded"]);
    for (&(h, chi), (curve, report)) in jobs.iter().zip(&runs) {
        for &(t, s) in curve {
            table.push(vec![h.into(), chi.into(), t.into(), s.into(), report.max_bond.into(), report.total_discarded().into()]);
        }
    }
    table.extra = json!({ "horizon": horizon, "floor": SV_FLOOR });
    Ok(table)
}

/// Autocorrelation of the central spin: exact diagonalization inside the light
/// cone of `ed_sites` sites, IM contraction (largest `chi`) up to `t_max`.
/// Both are emitted where they overlap and must agree to [`OVERLAP_TOL`].
pub fn cmd_czz(cfg: &RunConfig) -> Result<Table, CliError> {
    let t_max = cfg.t_max();
    let chi = cfg.chi.iter().copied().max().unwrap_or(1);
    let fields = cfg.fields();
    let runs = fields
        .par_iter()
        .map(|&h| {
            let p = params(cfg.j, cfg.g, h)?;
            let t_ed = t_max.min((cfg.ed_sites - 1) / 2);
            let ed = czz_ed(cfg.ed_sites, &p, t_ed)?.values;
            let (im, _) = solve_im(&p, t_max, chi, cfg.checkpoint.as_deref())?;
            let mps = czz_from_im(&im, &im, &p, t_max)?;
            let gap = ed.iter().zip(&mps).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            if gap > OVERLAP_TOL {
                return Err(CliError::Numerical(format!("h = {h}: ED and MPS differ by {gap:e} for t ≤ {t_ed}")));
            }
            Ok((ed, mps, gap))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut table = Table::new(&["h", "t", "czz", "source"]);
    let mut gaps = Vec::new();
    for (&h, (ed, mps, gap)) in fields.iter().zip(&runs) {
        for (t, &c) in ed.iter().enumerate() {
            table.push(vec![h.into(), t.into(), c.into(), "ed".into()]);
        }
        for (t, &c) in mps.iter().enumerate() {
            table.push(vec![h.into(), t.into(), c.into(), "mps".into()]);
        }
        gaps.push(*gap);
    }
    table.extra = json!({ "chi": chi, "ed_sites": cfg.ed_sites, "overlap_gap": gaps });
    Ok(table)
}

/// `(t, C)` pairs of one source in a [`cmd_czz`] table.
pub fn czz_series(table: &Table, h: f64, source: &str) -> Vec<(usize, f64)> {
    table
        .rows
        .iter()
        .filter(|r| r[0] == Cell::Float(h) && r[3] == Cell::Text(source.to_string()))
        .filter_map(|r| match (&r[1], &r[2]) {
            (Cell::Int(t), Cell::Float(c)) => Some((*t, *c)),
            _ => None,
        })
        .collect()
}
