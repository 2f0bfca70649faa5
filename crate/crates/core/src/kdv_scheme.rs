//! The fully discrete scheme
//!
//! ```text
//! u^{n+1}_j = <u>^n_j - dt <u>^n_j D u^n_j - dt D+^2 D- u^{n+1}_j
//! ```
//!
//! evaluated as a Lax-Friedrichs Burgers substep followed by one implicit
//! Airy solve against a factorization that is reused for every step of equal
//! length.

use crate::diagnostics::{LedgerSummary, StepDiagnostics, StepLedger};
use crate::error::{KdvError, Result};
use crate::grid_ops::{l2_norm, sup_norm, Boundary, Grid, GridFunction};
use crate::linalg_banded::{factor, BandedOperator, Factorization};

/// Safety factor applied to the largest admissible `lambda = dt / dx^{3/2}`.
pub const LAMBDA_SAFETY: f64 = 0.99;

/// How the time step is derived from the grid and the initial data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtRule {
    /// `dt = lambda dx^{3/2}` with `lambda` from [`max_lambda`]; the L^2 and
    /// time-difference stability estimates hold by construction.
    CflLambda,
    /// `dt = K dx^2`.
    QuadraticK(f64),
    /// `dt = nu dx / max_j |u0_j|`, a hyperbolic Courant condition on the
    /// Burgers substep. Requires `nu < min(sqrt(1 - delta), 3 (1 - delta) / 2)`,
    /// see [`max_courant`].
    Courant(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    pub x_left: f64,
    pub x_right: f64,
    pub n_cells: usize,
    pub boundary: Boundary,
    /// Integration horizon `T`; the run covers `[0, T]`.
    pub t_end: f64,
    /// `delta` in the L^2 stability condition and the entropy ledger.
    pub cfl_delta: f64,
    /// `delta~` in the time-difference stability condition.
    pub cfl_delta_tilde: f64,
    pub dt_rule: DtRule,
    /// Keep every `record_every`-th state (plus the first and last).
    pub record_every: usize,
    /// Evaluate the stability inequalities after every step.
    pub check_inequalities: bool,
}

impl SchemeConfig {
    /// Defaults: `delta = delta~ = 0.5`, [`DtRule::CflLambda`], every step recorded and checked.
    pub fn new(x_left: f64, x_right: f64, n_cells: usize, boundary: Boundary, t_end: f64) -> Self {
        Self {
            x_left,
            x_right,
            n_cells,
            boundary,
            t_end,
            cfl_delta: 0.5,
            cfl_delta_tilde: 0.5,
            dt_rule: DtRule::CflLambda,
            record_every: 1,
            check_inequalities: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |field, reason: String| Err(KdvError::InvalidConfig { field, reason });
        if !(self.x_left.is_finite() && self.x_right.is_finite() && self.x_left < self.x_right) {
            return invalid(
                "x_right",
                format!("window [{}, {}] is empty", self.x_left, self.x_right),
            );
        }
        if self.n_cells < 8 {
            return invalid("n_cells", format!("need at least 8 cells, got {}", self.n_cells));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return invalid("t_end", format!("must be finite and >= 0, got {}", self.t_end));
        }
        check_unit_interval("cfl_delta", self.cfl_delta)?;
        check_unit_interval("cfl_delta_tilde", self.cfl_delta_tilde)?;
        if self.record_every == 0 {
            return invalid("record_every", "must be at least 1".into());
        }
        match self.dt_rule {
            DtRule::CflLambda => {}
            DtRule::QuadraticK(k) => {
                if !(k.is_finite() && k > 0.0) {
                    return invalid("k", format!("must be positive, got {k}"));
                }
            }
            DtRule::Courant(nu) => {
                let limit = max_courant(self.cfl_delta);
                if !(nu.is_finite() && nu > 0.0 && nu < limit) {
                    return invalid("courant", format!("need 0 < nu < {limit}, got {nu}"));
                }
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::from_window(self.x_left, self.x_right, self.n_cells, self.boundary)
    }

    /// Time step for this configuration and initial data.
    pub fn time_step(&self, u0: &GridFunction) -> Result<TimeStep> {
        self.validate()?;
        let dx = u0.dx();
        let u0_norm = l2_norm(u0);
        let u0_sup = sup_norm(u0.values());
        let dt = match self.dt_rule {
            DtRule::CflLambda => {
                let lambda = max_lambda(u0_norm, self.cfl_delta, self.cfl_delta_tilde)?;
                if lambda.is_finite() {
                    lambda * dx.powf(1.5)
                } else {
                    dx
                }
            }
            DtRule::QuadraticK(k) => k * dx * dx,
            DtRule::Courant(nu) => {
                if u0_sup > 0.0 {
                    nu * dx / u0_sup
                } else {
                    dx
                }
            }
        };
        let lambda = dt / dx.powf(1.5);
        let s = lambda * u0_norm;
        Ok(TimeStep {
            dt,
            lambda,
            mu: dt / (dx * dx),
            courant: dt * u0_sup / dx,
            l2_condition_holds: s * (1.0 / 3.0 + 0.5 * s) < 0.5 * (1.0 - self.cfl_delta),
            time_difference_condition_holds: 6.0 * s * s + s < 0.5 * (1.0 - self.cfl_delta_tilde),
        })
    }
}

fn check_unit_interval(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(KdvError::InvalidCflParameter { name, value })
    }
}

/// The time step a run uses and the ratios that the stability conditions are stated in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeStep {
    pub dt: f64,
    /// `dt / dx^{3/2}`
    pub lambda: f64,
    /// `dt / dx^2`
    pub mu: f64,
    /// `dt max|u0| / dx`
    pub courant: f64,
    /// `lambda ||u0|| (1/3 + lambda ||u0|| / 2) < (1 - delta) / 2`
    pub l2_condition_holds: bool,
    /// `6 ||u0||^2 lambda^2 + ||u0|| lambda < (1 - delta~) / 2`
    pub time_difference_condition_holds: bool,
}

/// Largest `lambda` satisfying both stability conditions, times [`LAMBDA_SAFETY`].
///
/// With `s = lambda ||u0||` the conditions read `s^2/2 + s/3 < (1 - delta)/2`
/// and `6 s^2 + s < (1 - delta~)/2`; each bounds `s` by the positive root of
/// its quadratic. Returns `+inf` when `u0_norm == 0`.
pub fn max_lambda(u0_norm: f64, delta: f64, delta_tilde: f64) -> Result<f64> {
    check_unit_interval("cfl_delta", delta)?;
    check_unit_interval("cfl_delta_tilde", delta_tilde)?;
    if !(u0_norm.is_finite() && u0_norm >= 0.0) {
        return Err(KdvError::InvalidConfig {
            field: "u0_norm",
            reason: format!("must be finite and >= 0, got {u0_norm}"),
        });
    }
    if u0_norm == 0.0 {
        return Ok(f64::INFINITY);
    }
    let s_l2 = -1.0 / 3.0 + (1.0 / 9.0 + (1.0 - delta)).sqrt();
    let s_time = (-1.0 + (1.0 + 12.0 * (1.0 - delta_tilde)).sqrt()) / 12.0;
    Ok(LAMBDA_SAFETY * s_l2.min(s_time) / u0_norm)
}

/// Supremum of Courant numbers `nu = dt max|u| / dx` for which the Burgers
/// substep satisfies the cell entropy inequality with parameter `delta`.
///
/// Writing `a = <u>_j`, `d = (u_{j+1} - u_{j-1}) / 2` and `c = dt / dx`, the
/// entropy margin of cell `j` is `d^2 ((1 - delta)/2 - c d / 3 - c^2 a^2 / 2)`.
/// Since `|a| + |d| <= max|u|` the bracket is positive exactly when
/// `nu^2 / 2` and `nu / 3` both stay below `(1 - delta) / 2`.
pub fn max_courant(delta: f64) -> f64 {
    (1.0 - delta).sqrt().min(1.5 * (1.0 - delta))
}

#[inline]
fn neighbours(u: &[f64], j: usize, periodic: bool) -> (f64, f64) {
    let n = u.len();
    if periodic {
        (u[(j + n - 1) % n], u[(j + 1) % n])
    } else {
        (
            if j == 0 { 0.0 } else { u[j - 1] },
            if j + 1 == n { 0.0 } else { u[j + 1] },
        )
    }
}

/// `w_j = <u>_j - dt <u>_j (D u)_j` written into `out`.
pub(crate) fn burgers_into(u: &[f64], dx: f64, dt: f64, periodic: bool, out: &mut [f64]) {
    let c = 0.5 * dt / dx;
    let cell = |left: f64, right: f64| {
        let avg = 0.5 * (left + right);
        avg - c * avg * (right - left)
    };
    let n = u.len();
    for (o, w) in out[1..n - 1].iter_mut().zip(u.windows(3)) {
        *o = cell(w[0], w[2]);
    }
    for j in [0, n - 1] {
        let (left, right) = neighbours(u, j, periodic);
        out[j] = cell(left, right);
    }
}

/// Lax-Friedrichs substep for Burgers' equation.
pub fn burgers_substep(u: &GridFunction, dt: f64) -> GridFunction {
    let mut out = vec![0.0; u.len()];
    burgers_into(
        u.values(),
        u.dx(),
        dt,
        u.boundary() == Boundary::Periodic,
        &mut out,
    );
    GridFunction::from_raw(*u.grid(), out)
}

/// One full step: Burgers substep, then the implicit Airy solve with `f`.
pub fn step(u: &GridFunction, dt: f64, f: &Factorization) -> Result<GridFunction> {
    let op = f.operator();
    let expected = BandedOperator::assemble(u.dx(), dt, u.len(), u.boundary())?;
    if op.dim() != u.len() || op.boundary() != u.boundary() || op.mu3() != expected.mu3() {
        return Err(KdvError::InvalidConfig {
            field: "factorization",
            reason: "assembled for a different grid or time step".into(),
        });
    }
    let mut w = burgers_substep(u, dt).into_values();
    f.solve_in_place(&mut w)?;
    GridFunction::new(*u.grid(), w)
}

/// A recorded state.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub u: GridFunction,
}

/// Time-indexed states of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    grid: Grid,
    snapshots: Vec<Snapshot>,
    dt_used: f64,
    steps_taken: usize,
    record_every: usize,
}

impl Trajectory {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    /// Nominal (full) time step.
    pub fn dt_used(&self) -> f64 {
        self.dt_used
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    pub fn record_every(&self) -> usize {
        self.record_every
    }

    /// True when every time level is stored, so [`Trajectory::interpolate`] is
    /// the exact bilinear interpolant. Otherwise it interpolates between the
    /// nearest recorded pair.
    pub fn is_step_resolved(&self) -> bool {
        self.record_every == 1
    }

    pub fn initial(&self) -> &Snapshot {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("trajectory always holds u0")
    }

    /// Builds a trajectory from explicit snapshots (e.g. exact samples).
    pub fn from_snapshots(snapshots: Vec<Snapshot>, dt_used: f64, record_every: usize) -> Result<Self> {
        let first = snapshots.first().ok_or(KdvError::EmptyGrid)?;
        let grid = *first.u.grid();
        for w in snapshots.windows(2) {
            w[1].u.check_same_grid(&w[0].u)?;
            if !(w[1].t > w[0].t) {
                return Err(KdvError::InvalidConfig {
                    field: "snapshots",
                    reason: "timestamps must increase strictly".into(),
                });
            }
        }
        let steps_taken = snapshots.last().map_or(0, |s| s.step);
        Ok(Self {
            grid,
            snapshots,
            dt_used,
            steps_taken,
            record_every: record_every.max(1),
        })
    }

    /// Piecewise bilinear space-time interpolant
    /// `u^n_j + (x - x_j) D+u^n_j + (t - t_n) D+^t u^n_j + (x - x_j)(t - t_n) D+^t D+ u^n_j`
    /// on the cell containing `(x, t)`.
    pub fn interpolate(&self, x: f64, t: f64) -> Result<f64> {
        let out = || KdvError::OutOfRange { x, t };
        let t0 = self.snapshots[0].t;
        let t1 = self.last().t;
        let slack = 1e-12 * t1.abs().max(1.0);
        if !(t >= t0 - slack && t <= t1 + slack) {
            return Err(out());
        }
        let (j, sx) = self.locate_cell(x).ok_or_else(out)?;
        Ok(self.eval_cell(j, sx, t))
    }

    /// Bilinear interpolant on spatial cell `j` at fractional offset `sx` in `[0, 1]`.
    fn eval_cell(&self, j: usize, sx: f64, t: f64) -> f64 {
        let j = j as isize;
        let linear = |s: &Snapshot| s.u.at(j) + sx * (s.u.at(j + 1) - s.u.at(j));
        if self.snapshots.len() == 1 {
            return linear(&self.snapshots[0]);
        }
        let n = self
            .snapshots
            .partition_point(|s| s.t <= t)
            .clamp(1, self.snapshots.len() - 1)
            - 1;
        let (a, b) = (&self.snapshots[n], &self.snapshots[n + 1]);
        let st = ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
        let (ua, ub) = (linear(a), linear(b));
        if st == 1.0 {
            ub
        } else {
            ua + st * (ub - ua)
        }
    }

    /// Cell index and fractional position within it.
    fn locate_cell(&self, x: f64) -> Option<(usize, f64)> {
        let g = &self.grid;
        let n = g.len();
        let mut rel = (x - g.x_left()) / g.dx();
        match g.boundary() {
            Boundary::Periodic => rel = rel.rem_euclid(n as f64),
            Boundary::TruncatedLine => {
                if !(rel >= 0.0 && rel <= n as f64) {
                    return None;
                }
            }
        }
        // node coordinates are rebuilt as x_left + j dx; undo the rounding so nodes map back exactly
        let nearest = rel.round();
        if (rel - nearest).abs() <= 1e-12 * nearest.max(1.0) {
            rel = nearest;
        }
        let j = (rel.floor() as usize).min(n - 1);
        Some((j, rel - j as f64))
    }
}

/// View of one completed step, passed to run observers.
#[derive(Debug, Clone, Copy)]
pub struct StepView<'a> {
    /// Index of the new time level.
    pub step: usize,
    pub t_prev: f64,
    pub t: f64,
    pub dt: f64,
    pub prev: &'a [f64],
    pub next: &'a [f64],
    pub grid: &'a Grid,
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trajectory: Trajectory,
    pub diagnostics: Vec<StepDiagnostics>,
    pub ledger: LedgerSummary,
    pub time_step: TimeStep,
}

pub fn run(config: &SchemeConfig, u0: &GridFunction) -> Result<RunOutput> {
    run_with_observer(config, u0, |_| {})
}

/// Like [`run`], calling `observer` after every step.
pub fn run_with_observer(
    config: &SchemeConfig,
    u0: &GridFunction,
    mut observer: impl FnMut(&StepView),
) -> Result<RunOutput> {
    config.validate()?;
    let grid = config.grid()?;
    if !same_grid(&grid, u0.grid()) {
        return Err(KdvError::GridMismatch);
    }
    let ts = config.time_step(u0)?;
    let schedule = StepSchedule::new(config.t_end, ts.dt);
    let dx = grid.dx();
    let n = grid.len();
    let periodic = grid.boundary() == Boundary::Periodic;

    let mut factorization = factor(&BandedOperator::assemble(dx, ts.dt, n, grid.boundary())?)?;
    let mut ledger = StepLedger::new(config, &grid, &ts, u0);
    let mut diagnostics = vec![ledger.initial(u0.values())];
    let mut snapshots = vec![Snapshot {
        step: 0,
        t: 0.0,
        u: u0.clone(),
    }];

    let mut prev = u0.values().to_vec();
    let mut w = vec![0.0; n];
    let mut next = vec![0.0; n];
    let total = schedule.total_steps();
    for k in 0..total {
        let (t_prev, t, dt) = schedule.interval(k);
        if dt != ts.dt && factorization.operator().mu3() != dt / (dx * dx * dx) {
            factorization = factor(&BandedOperator::assemble(dx, dt, n, grid.boundary())?)?;
        }
        burgers_into(&prev, dx, dt, periodic, &mut w);
        next.copy_from_slice(&w);
        factorization.solve_in_place(&mut next)?;
        if !next.iter().all(|v| v.is_finite()) {
            return Err(KdvError::NonFiniteStep { step: k + 1 });
        }

        let step_index = k + 1;
        let recorded = step_index % config.record_every == 0 || step_index == total;
        if config.check_inequalities || recorded {
            let d = ledger.check_step(step_index, t, dt, dt == ts.dt, &prev, &w, &next);
            if recorded {
                diagnostics.push(d);
            }
        }
        observer(&StepView {
            step: step_index,
            t_prev,
            t,
            dt,
            prev: &prev,
            next: &next,
            grid: &grid,
        });
        if recorded {
            snapshots.push(Snapshot {
                step: step_index,
                t,
                u: GridFunction::from_raw(grid, next.clone()),
            });
        }
        std::mem::swap(&mut prev, &mut next);
    }

    Ok(RunOutput {
        trajectory: Trajectory {
            grid,
            snapshots,
            dt_used: ts.dt,
            steps_taken: total,
            record_every: config.record_every,
        },
        diagnostics,
        ledger: ledger.finish(),
        time_step: ts,
    })
}

fn same_grid(a: &Grid, b: &Grid) -> bool {
    a.len() == b.len() && a.boundary() == b.boundary() && a.dx() == b.dx() && a.x_left() == b.x_left()
}

/// Uniform steps of length `dt`, with one shortened step if needed to land on `T`.
#[derive(Debug, Clone, Copy)]
struct StepSchedule {
    t_end: f64,
    dt: f64,
    full: usize,
    partial: bool,
}

impl StepSchedule {
    fn new(t_end: f64, dt: f64) -> Self {
        if t_end == 0.0 {
            return Self {
                t_end,
                dt,
                full: 0,
                partial: false,
            };
        }
        let ratio = t_end / dt;
        let mut full = ratio.floor() as usize;
        let remainder = t_end - full as f64 * dt;
        // A remainder within rounding of zero (or of dt) folds into the last full step.
        let partial = if remainder <= 1e-9 * dt {
            false
        } else if remainder >= dt * (1.0 - 1e-9) {
            full += 1;
            false
        } else {
            true
        };
        Self {
            t_end,
            dt,
            full,
            partial,
        }
    }

    fn total_steps(&self) -> usize {
        self.full + usize::from(self.partial)
    }

    /// `(t_prev, t, dt)` of step `k` (0-based). The final step always ends at `T`.
    fn interval(&self, k: usize) -> (f64, f64, f64) {
        let t_prev = k as f64 * self.dt;
        if k + 1 == self.total_steps() {
            (t_prev, self.t_end, self.t_end - t_prev)
        } else {
            (t_prev, (k + 1) as f64 * self.dt, self.dt)
        }
    }
}
