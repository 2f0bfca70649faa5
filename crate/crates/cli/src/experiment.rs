//! Running presets and writing their outputs.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};

use kdvfd_core::{convergence_table, relative_error, run, ConvergenceRow, RunOutput, StepDiagnostics};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::preset::ExperimentPreset;

/// Environment variable capping the number of concurrent runs in a sweep.
pub const THREADS_ENV: &str = "KDVFD_THREADS";

/// Formats a number with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub preset: String,
    pub n_cells: usize,
    #[serde(rename = "E_percent")]
    pub e_percent: Option<f64>,
    /// Physical time of the compared state.
    pub compare_time: f64,
    pub steps: usize,
    pub dt: f64,
    pub lambda: f64,
    pub mu: f64,
    pub courant: f64,
    pub steps_checked: usize,
    pub l2_failures: usize,
    pub entropy_failures: usize,
    pub monotonicity_failures: usize,
    pub alpha_failures: usize,
    pub max_mass_drift: f64,
    pub all_ok: bool,
}

impl RunSummary {
    pub fn from_output(preset: &ExperimentPreset, out: &RunOutput) -> Result<Self, CliError> {
        let e_percent = match preset.exact {
            Some(exact) => {
                let t = preset.final_time();
                Some(relative_error(&out.trajectory.last().u, |x, t| exact.eval(x, t), t)?)
            }
            None => None,
        };
        let l = &out.ledger;
        Ok(Self {
            preset: preset.name.to_string(),
            n_cells: preset.config.n_cells,
            e_percent,
            compare_time: preset.final_time(),
            steps: out.trajectory.steps_taken(),
            dt: out.time_step.dt,
            lambda: out.time_step.lambda,
            mu: out.time_step.mu,
            courant: out.time_step.courant,
            steps_checked: l.steps_checked,
            l2_failures: l.l2_failures,
            entropy_failures: l.entropy_failures,
            monotonicity_failures: l.monotonicity_failures,
            alpha_failures: l.alpha_failures,
            max_mass_drift: l.max_mass_drift,
            all_ok: l.all_ok(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub summary: RunSummary,
    pub output_dir: PathBuf,
    pub snapshot_files: Vec<PathBuf>,
}

impl RunReport {
    pub fn exit_ok(&self) -> bool {
        self.summary.all_ok
    }
}

/// `record_every` giving roughly `target` recorded intervals for this preset.
pub fn auto_record_every(preset: &ExperimentPreset, target: usize) -> Result<usize, CliError> {
    let u0 = preset.initial_state()?;
    let dt = preset.config.time_step(&u0)?.dt;
    let steps = (preset.config.t_end / dt).ceil() as usize;
    Ok((steps / target.max(1)).max(1))
}

/// Runs `preset` and writes snapshot CSVs, `diagnostics.csv` and `summary.json` into `out_dir`.
pub fn run_experiment(preset: &ExperimentPreset, out_dir: &Path) -> Result<RunReport, CliError> {
    let u0 = preset.initial_state()?;
    let out = run(&preset.config, &u0)?;
    let summary = RunSummary::from_output(preset, &out)?;

    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let mut snapshot_files = Vec::new();
    for snap in out.trajectory.snapshots() {
        let path = out_dir.join(format!("snap_t{}.csv", fmt17(preset.initial_time + snap.t)));
        write_file(&path, |w| {
            writeln!(w, "x,u")?;
            for (x, u) in snap.u.grid().nodes().zip(snap.u.values()) {
                writeln!(w, "{},{}", fmt17(x), fmt17(*u))?;
            }
            Ok(())
        })?;
        snapshot_files.push(path);
    }
    write_file(&out_dir.join("diagnostics.csv"), |w| write_diagnostics(w, &out.diagnostics))?;
    let json = serde_json::to_string_pretty(&summary)?;
    write_file(&out_dir.join("summary.json"), |w| writeln!(w, "{json}"))?;

    Ok(RunReport {
        summary,
        output_dir: out_dir.to_path_buf(),
        snapshot_files,
    })
}

pub fn write_diagnostics(w: &mut impl Write, rows: &[StepDiagnostics]) -> std::io::Result<()> {
    writeln!(w, "step,t,l2,sup,mass,dissipation,l2_ok,entropy_ok")?;
    for d in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            d.step,
            fmt17(d.t),
            fmt17(d.l2),
            fmt17(d.sup),
            fmt17(d.mass),
            fmt17(d.dissipation),
            d.ineq_l2_ok,
            d.ineq_cell_entropy_ok
        )?;
    }
    Ok(())
}

fn write_file(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableReport {
    pub rows: Vec<ConvergenceRow>,
    /// False if any run of the sweep failed an inequality check.
    pub ledger_ok: bool,
}

/// Sweep width from [`THREADS_ENV`], if set to a positive integer.
pub fn sweep_threads() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Runs `base` at every resolution in `n_list` concurrently and tabulates the
/// relative error at the final time. In oracle mode the numerical state is
/// replaced by exact samples, so every error is zero.
pub fn convergence_sweep(base: &ExperimentPreset, n_list: &[usize], oracle: bool) -> Result<TableReport, CliError> {
    let exact = base
        .exact
        .ok_or_else(|| CliError::NoExactSolution(base.name.to_string()))?;
    let ledger_ok = AtomicBool::new(true);
    let t_final = base.final_time();
    let error_for = |n: usize| -> kdvfd_core::Result<f64> {
        let mut p = base.clone().with_n_cells(n);
        if oracle {
            let u = p.exact_final_state().expect("exact solution present")?;
            return relative_error(&u, |x, t| exact.eval(x, t), t_final);
        }
        p.config.record_every = usize::MAX;
        let out = run(&p.config, &p.initial_state()?)?;
        if !out.ledger.all_ok() {
            ledger_ok.store(false, Ordering::Relaxed);
        }
        relative_error(&out.trajectory.last().u, |x, t| exact.eval(x, t), t_final)
    };
    let rows = match sweep_threads() {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::config(THREADS_ENV, e.to_string()))?;
            pool.install(|| convergence_table(n_list, error_for))?
        }
        None => convergence_table(n_list, error_for)?,
    };
    Ok(TableReport {
        rows,
        ledger_ok: ledger_ok.into_inner(),
    })
}

/// Writes the `N,E,rate` table; the first row's rate is empty.
pub fn write_table(w: &mut impl Write, rows: &[ConvergenceRow]) -> std::io::Result<()> {
    writeln!(w, "N,E,rate")?;
    for r in rows {
        let rate = r.rate.map(fmt17).unwrap_or_default();
        writeln!(w, "{},{},{}", r.n_cells, fmt17(r.error_e), rate)?;
    }
    Ok(())
}

/// Runs the sweep and writes the table to `output` (or stdout).
pub fn emit_convergence_table(
    base: &ExperimentPreset,
    n_list: &[usize],
    output: Option<&Path>,
    oracle: bool,
) -> Result<TableReport, CliError> {
    let report = convergence_sweep(base, n_list, oracle)?;
    match output {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
            }
            write_file(path, |w| write_table(w, &report.rows))?;
        }
        None => {
            let stdout = std::io::stdout();
            write_table(&mut stdout.lock(), &report.rows).map_err(|e| CliError::io("<stdout>", e))?;
        }
    }
    Ok(report)
}
