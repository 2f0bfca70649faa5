//! Stability ledger, error metrics, convergence tables and local smoothing budgets.

use rayon::prelude::*;

use crate::error::{KdvError, Result};
use crate::grid_ops::{
    airy_difference, difference, inner, second_difference, sum_squares, sup_norm, Boundary,
    DifferenceKind, Grid, GridFunction, WeightFunction,
};
use crate::kdv_scheme::{SchemeConfig, TimeStep, Trajectory};

/// Relative slack on the full dissipation inequality.
pub const L2_TOLERANCE: f64 = 1e-10;
/// Relative slack on `||u^{n+1}|| <= ||u^n||`.
pub const MONOTONICITY_TOLERANCE: f64 = 1e-12;
/// Slack on the cell entropy inequality, scaled by `max(1, <u^2>_j)`.
pub const CELL_ENTROPY_TOLERANCE: f64 = 1e-10;
/// Relative slack on the time-difference estimate.
pub const ALPHA_TOLERANCE: f64 = 1e-8;
/// Ghost nodes on each side of a truncated-line state included in the
/// `D+ D-` norm of the dissipation term.
pub const LEDGER_PADDING: isize = 1;

/// Norms and inequality outcomes recorded for one time level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub t: f64,
    /// `||u^n||`
    pub l2: f64,
    pub sup: f64,
    /// `dx * sum_j u^n_j`
    pub mass: f64,
    /// `dt^2 ||D+^2 D- u^n||^2 + dt dx ||D+ D- u^n||^2 + delta dx^2 ||D u^{n-1}||^2`
    pub dissipation: f64,
    pub ineq_l2_ok: bool,
    pub ineq_cell_entropy_ok: bool,
    /// `||(u^n - u^{n-1}) / dt||`, when the time-difference estimate is tracked.
    pub alpha_l2: Option<f64>,
    pub ineq_alpha_ok: Option<bool>,
}

/// Aggregate outcome of all inequality checks of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerSummary {
    pub steps_checked: usize,
    pub l2_failures: usize,
    pub entropy_failures: usize,
    pub monotonicity_failures: usize,
    pub alpha_checked: usize,
    pub alpha_failures: usize,
    /// Largest `||u^{n+1}||^2 / ||u^n||^2 - 1` seen.
    pub max_l2_growth: f64,
    pub initial_mass: f64,
    /// Largest `|m^n - m^0| / max(|m^0|, dx sum |u^0|)`.
    pub max_mass_drift: f64,
}

impl LedgerSummary {
    /// True when no checked inequality failed.
    pub fn all_ok(&self) -> bool {
        self.l2_failures == 0
            && self.entropy_failures == 0
            && self.monotonicity_failures == 0
            && self.alpha_failures == 0
    }
}

/// Values outside `0..len` follow the boundary rule of the grid.
#[derive(Clone, Copy)]
struct Ext<'a> {
    v: &'a [f64],
    periodic: bool,
}

impl Ext<'_> {
    #[inline]
    fn get(&self, j: isize) -> f64 {
        let n = self.v.len() as isize;
        if self.periodic {
            self.v[j.rem_euclid(n) as usize]
        } else if (0..n).contains(&j) {
            self.v[j as usize]
        } else {
            0.0
        }
    }

    /// Index range over which difference norms are summed.
    fn norm_range(&self) -> std::ops::Range<isize> {
        let n = self.v.len() as isize;
        if self.periodic {
            0..n
        } else {
            -LEDGER_PADDING..n + LEDGER_PADDING
        }
    }
}

/// Evaluates the per-step inequalities of a run in progress.
pub(crate) struct StepLedger {
    dx: f64,
    delta: f64,
    periodic: bool,
    check: bool,
    track_alpha: bool,
    prev_alpha_sq: Option<f64>,
    summary: LedgerSummary,
    mass_scale: f64,
}

impl StepLedger {
    pub(crate) fn new(config: &SchemeConfig, grid: &Grid, ts: &TimeStep, u0: &GridFunction) -> Self {
        let dx = grid.dx();
        let initial_mass = dx * u0.values().iter().sum::<f64>();
        let abs_mass = dx * u0.values().iter().map(|v| v.abs()).sum::<f64>();
        Self {
            dx,
            delta: config.cfl_delta,
            periodic: grid.boundary() == Boundary::Periodic,
            check: config.check_inequalities,
            track_alpha: config.check_inequalities && ts.time_difference_condition_holds,
            prev_alpha_sq: None,
            summary: LedgerSummary {
                steps_checked: 0,
                l2_failures: 0,
                entropy_failures: 0,
                monotonicity_failures: 0,
                alpha_checked: 0,
                alpha_failures: 0,
                max_l2_growth: f64::NEG_INFINITY,
                initial_mass,
                max_mass_drift: 0.0,
            },
            mass_scale: initial_mass.abs().max(abs_mass),
        }
    }

    pub(crate) fn initial(&self, u0: &[f64]) -> StepDiagnostics {
        StepDiagnostics {
            step: 0,
            t: 0.0,
            l2: (self.dx * sum_squares(u0)).sqrt(),
            sup: sup_norm(u0),
            mass: self.summary.initial_mass,
            dissipation: 0.0,
            ineq_l2_ok: true,
            ineq_cell_entropy_ok: true,
            alpha_l2: None,
            ineq_alpha_ok: None,
        }
    }

    /// Checks the step `prev -> w -> next`, where `w` is the Burgers substep.
    /// The time-difference estimate compares consecutive full steps only.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn check_step(
        &mut self,
        step: usize,
        t: f64,
        dt: f64,
        full_step: bool,
        prev: &[f64],
        w: &[f64],
        next: &[f64],
    ) -> StepDiagnostics {
        let dx = self.dx;
        let periodic = self.periodic;
        let (p, nx) = (Ext { v: prev, periodic }, Ext { v: next, periodic });

        let prev_sq = dx * sum_squares(prev);
        let next_sq = dx * sum_squares(next);
        let mass = dx * next.iter().sum::<f64>();
        let dissipation = ledger_dissipation(p, nx, dx, dt, self.delta);

        let mut diag = StepDiagnostics {
            step,
            t,
            l2: next_sq.sqrt(),
            sup: sup_norm(next),
            mass,
            dissipation,
            ineq_l2_ok: true,
            ineq_cell_entropy_ok: true,
            alpha_l2: None,
            ineq_alpha_ok: None,
        };
        if self.mass_scale > 0.0 {
            let drift = (mass - self.summary.initial_mass).abs() / self.mass_scale;
            self.summary.max_mass_drift = self.summary.max_mass_drift.max(drift);
        }
        if !self.check {
            return diag;
        }

        let s = &mut self.summary;
        s.steps_checked += 1;
        if prev_sq > 0.0 {
            s.max_l2_growth = s.max_l2_growth.max(next_sq / prev_sq - 1.0);
        } else {
            s.max_l2_growth = s.max_l2_growth.max(0.0);
        }
        diag.ineq_l2_ok = next_sq + dissipation <= prev_sq * (1.0 + L2_TOLERANCE);
        if !diag.ineq_l2_ok {
            s.l2_failures += 1;
        }
        if next_sq.sqrt() > prev_sq.sqrt() * (1.0 + MONOTONICITY_TOLERANCE) {
            s.monotonicity_failures += 1;
            diag.ineq_l2_ok = false;
        }
        diag.ineq_cell_entropy_ok = cell_entropy_holds(prev, w, dx, dt, self.delta, periodic);
        if !diag.ineq_cell_entropy_ok {
            s.entropy_failures += 1;
        }

        if self.track_alpha {
            if full_step {
                let alpha_sq = prev
                    .iter()
                    .zip(next)
                    .map(|(a, b)| ((b - a) / dt).powi(2))
                    .sum::<f64>()
                    * dx;
                diag.alpha_l2 = Some(alpha_sq.sqrt());
                if let Some(before) = self.prev_alpha_sq {
                    let du_sup = (0..prev.len() as isize)
                        .map(|j| ((p.get(j + 1) - p.get(j - 1)) / (2.0 * dx)).abs())
                        .fold(0.0, f64::max);
                    let bound = (1.0 + 3.0 * dt * du_sup) * before * (1.0 + ALPHA_TOLERANCE);
                    let ok = alpha_sq <= bound;
                    s.alpha_checked += 1;
                    if !ok {
                        s.alpha_failures += 1;
                    }
                    diag.ineq_alpha_ok = Some(ok);
                }
                self.prev_alpha_sq = Some(alpha_sq);
            } else {
                self.prev_alpha_sq = None;
            }
        }
        diag
    }

    pub(crate) fn finish(mut self) -> LedgerSummary {
        if self.summary.max_l2_growth == f64::NEG_INFINITY {
            self.summary.max_l2_growth = 0.0;
        }
        self.summary
    }
}

/// The bracketed dissipation of the L^2 estimate. On a truncated line the
/// Airy residual and `D u^n` are summed over the window, where the implicit
/// solve and the cell entropy balance hold, while `D+ D- u^{n+1}` is summed
/// over the padded line: `(v, D+^2 D- v) = dx/2 ||D+ D- v||^2` needs every
/// ghost node the stencil reaches.
fn ledger_dissipation(prev: Ext, next: Ext, dx: f64, dt: f64, delta: f64) -> f64 {
    let (mut airy, mut second, mut central) = (0.0, 0.0, 0.0);
    let n = next.v.len() as isize;
    for j in next.norm_range() {
        let u = |k: isize| next.get(j + k);
        let s = (u(1) - 2.0 * u(0) + u(-1)) / (dx * dx);
        second += s * s;
        if (0..n).contains(&j) {
            let a = (u(2) - 3.0 * u(1) + 3.0 * u(0) - u(-1)) / (dx * dx * dx);
            let c = (prev.get(j + 1) - prev.get(j - 1)) / (2.0 * dx);
            airy += a * a;
            central += c * c;
        }
    }
    dx * (dt * dt * airy + dt * dx * second + delta * dx * dx * central)
}

fn cell_entropy_holds(u: &[f64], w: &[f64], dx: f64, dt: f64, delta: f64, periodic: bool) -> bool {
    let e = Ext { v: u, periodic };
    (0..u.len() as isize).all(|j| {
        let (l, r) = (e.get(j - 1), e.get(j + 1));
        let avg_sq = 0.5 * (l * l + r * r);
        let du3 = (r * r * r - l * l * l) / (2.0 * dx);
        let du = (r - l) / (2.0 * dx);
        let wj = w[j as usize];
        let rhs = 0.5 * avg_sq - dt / 3.0 * du3 - 0.5 * delta * dx * dx * du * du;
        0.5 * wj * wj <= rhs + CELL_ENTROPY_TOLERANCE * avg_sq.max(1.0)
    })
}

/// Margin of the cell entropy inequality for one Burgers substep:
/// the smallest `rhs_j - w_j^2 / 2` over all cells. Non-negative (up to
/// rounding) under the Courant-type condition `(dt max|u| / dx)^2 < 1 - delta`.
pub fn cell_entropy_margin(u: &GridFunction, w: &GridFunction, dt: f64, delta: f64) -> Result<f64> {
    u.check_same_grid(w)?;
    let dx = u.dx();
    let e = Ext {
        v: u.values(),
        periodic: u.boundary() == Boundary::Periodic,
    };
    Ok((0..u.len() as isize)
        .map(|j| {
            let (l, r) = (e.get(j - 1), e.get(j + 1));
            let rhs = 0.25 * (l * l + r * r)
                - dt / 3.0 * (r * r * r - l * l * l) / (2.0 * dx)
                - 0.5 * delta * dx * dx * ((r - l) / (2.0 * dx)).powi(2);
            rhs - 0.5 * w.values()[j as usize].powi(2)
        })
        .fold(f64::INFINITY, f64::min))
}

/// `100 * sum_j |exact(x_j, t_exact) - u_j| / sum_j exact(x_j, t_exact)`.
pub fn relative_error(u: &GridFunction, exact: impl Fn(f64, f64) -> f64, t_exact: f64) -> Result<f64> {
    let grid = u.grid();
    let (mut num, mut den) = (0.0, 0.0);
    for (x, &v) in grid.nodes().zip(u.values()) {
        let e = exact(x, t_exact);
        num += (e - v).abs();
        den += e;
    }
    if !(den.is_finite() && den > 0.0) {
        return Err(KdvError::ZeroDenominator);
    }
    Ok(100.0 * num / den)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub n_cells: usize,
    /// Relative error in percent.
    pub error_e: f64,
    /// `log(E_prev / E) / log(N / N_prev)`; absent on the first row and when
    /// either error is not strictly positive.
    pub rate: Option<f64>,
}

/// Evaluates `error_for(n)` for every resolution in parallel and attaches observed rates.
pub fn convergence_table<F>(n_list: &[usize], error_for: F) -> Result<Vec<ConvergenceRow>>
where
    F: Fn(usize) -> Result<f64> + Sync,
{
    if n_list.is_empty() || n_list.windows(2).any(|w| w[1] <= w[0]) || n_list[0] == 0 {
        return Err(KdvError::UnorderedResolutions);
    }
    let errors: Vec<f64> = n_list
        .par_iter()
        .map(|&n| error_for(n))
        .collect::<Result<_>>()?;
    Ok(rows_from_errors(n_list, &errors))
}

/// Table rows for already computed errors.
pub fn rows_from_errors(n_list: &[usize], errors: &[f64]) -> Vec<ConvergenceRow> {
    n_list
        .iter()
        .zip(errors)
        .enumerate()
        .map(|(i, (&n, &e))| {
            let rate = (i > 0)
                .then(|| (n_list[i - 1], errors[i - 1]))
                .filter(|&(_, ep)| ep > 0.0 && e > 0.0)
                .map(|(np, ep)| (ep / e).ln() / (n as f64 / np as f64).ln());
            ConvergenceRow {
                n_cells: n,
                error_e: e,
                rate,
            }
        })
        .collect()
}

/// Streaming form of [`kato_budget`]: feed it every step of a run.
#[derive(Debug, Clone)]
pub struct KatoAccumulator {
    grid: Grid,
    indices: Vec<usize>,
    total: f64,
}

impl KatoAccumulator {
    /// Sums over nodes with `|x_j| <= ramp - 1`; the window must lie inside the grid.
    pub fn new(grid: &Grid, ramp: f64) -> Result<Self> {
        let q = ramp - 1.0;
        if !(q.is_finite() && q >= 0.0) || -q < grid.x_left() || q > grid.x_right() {
            return Err(KdvError::WindowTooSmall(ramp));
        }
        let slack = 1e-9 * grid.dx();
        let indices = (0..grid.len()).filter(|&j| grid.x(j).abs() <= q + slack).collect();
        Ok(Self {
            grid: *grid,
            indices,
            total: 0.0,
        })
    }

    /// Adds `dt dx sum_{|x_j| <= R-1} (D+ u_j)^2` for the state `u` at the start of a step.
    pub fn add_step(&mut self, dt: f64, u: &[f64]) {
        let e = Ext {
            v: u,
            periodic: self.grid.boundary() == Boundary::Periodic,
        };
        let dx = self.grid.dx();
        let s: f64 = self
            .indices
            .iter()
            .map(|&j| {
                let j = j as isize;
                ((e.get(j + 1) - e.get(j)) / dx).powi(2)
            })
            .sum();
        self.total += dt * dx * s;
    }

    pub fn total(&self) -> f64 {
        self.total
    }
}

/// `sum_n dt_n dx sum_{|x_j| <= R-1} (D+ u^n_j)^2` over the steps of `traj`.
pub fn kato_budget(traj: &Trajectory, ramp: f64) -> Result<f64> {
    if !traj.is_step_resolved() {
        return Err(KdvError::MissingSnapshots(traj.record_every()));
    }
    let mut acc = KatoAccumulator::new(traj.grid(), ramp)?;
    for pair in traj.snapshots().windows(2) {
        acc.add_step(pair[1].t - pair[0].t, pair[0].u.values());
    }
    Ok(acc.total())
}

/// Collects states at prescribed times from a running scheme, interpolating
/// linearly in time between the two time levels that bracket each target.
#[derive(Debug, Clone)]
pub struct TimeSampler {
    times: Vec<f64>,
    states: Vec<Option<Vec<f64>>>,
}

impl TimeSampler {
    /// `times` must be non-decreasing. A target at `t = 0` is taken from `u0`.
    pub fn new(times: Vec<f64>, u0: &[f64]) -> Self {
        let states = times
            .iter()
            .map(|&t| (t <= 0.0).then(|| u0.to_vec()))
            .collect();
        Self { times, states }
    }

    /// Feed one step `u(t_prev) = prev -> u(t) = next`.
    pub fn observe(&mut self, t_prev: f64, t: f64, prev: &[f64], next: &[f64]) {
        for (k, &tk) in self.times.iter().enumerate() {
            if self.states[k].is_some() || tk > t || tk <= t_prev {
                continue;
            }
            let s = (tk - t_prev) / (t - t_prev);
            self.states[k] = Some(prev.iter().zip(next).map(|(a, b)| a + s * (b - a)).collect());
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// The sampled states, or `None` if some target time was never reached.
    pub fn into_states(self) -> Option<Vec<Vec<f64>>> {
        self.states.into_iter().collect()
    }
}

/// `(int_0^T ||u_c(t) - u_f(t)||^2 dt)^{1/2}` by the trapezoid rule over the
/// sample times, comparing a coarse run with one on the grid refined by
/// `ratio` at the shared nodes. Space norm uses the coarse spacing `dx`.
pub fn sampled_space_time_difference(
    times: &[f64],
    coarse: &[Vec<f64>],
    fine: &[Vec<f64>],
    ratio: usize,
    dx: f64,
) -> Result<f64> {
    if times.len() != coarse.len() || times.len() != fine.len() || ratio == 0 {
        return Err(KdvError::LengthMismatch {
            expected: times.len(),
            actual: coarse.len().min(fine.len()),
        });
    }
    let mut per_time = Vec::with_capacity(times.len());
    for (c, f) in coarse.iter().zip(fine) {
        if f.len() != c.len() * ratio {
            return Err(KdvError::LengthMismatch {
                expected: c.len() * ratio,
                actual: f.len(),
            });
        }
        let sq: f64 = c
            .iter()
            .enumerate()
            .map(|(j, v)| (v - f[j * ratio]).powi(2))
            .sum();
        per_time.push(dx * sq);
    }
    let integral: f64 = times
        .windows(2)
        .zip(per_time.windows(2))
        .map(|(t, e)| 0.5 * (t[1] - t[0]) * (e[0] + e[1]))
        .sum();
    Ok(integral.sqrt())
}

/// `||u||_p^2 = (u, u)_p`.
pub fn weighted_energy(u: &GridFunction, p: &WeightFunction) -> Result<f64> {
    inner(u, u, Some(p))
}

/// Both sides of the weighted summation-by-parts rule for the Airy operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedAiryIdentity {
    /// `(D- D+^2 u, u)_p`
    pub lhs: f64,
    /// `((D+u)^2, D-p) + 1/2 ((D+u)^2, D+p) + dx/2 ||D+^2 u||_p^2 - 1/2 (u^2, D+ D-^2 p)`
    pub rhs: f64,
}

/// Evaluates both sides of the weighted Airy identity for a periodic `u` and weight samples `p`.
pub fn weighted_airy_identity(u: &GridFunction, p: &GridFunction) -> Result<WeightedAiryIdentity> {
    u.check_same_grid(p)?;
    if u.boundary() != Boundary::Periodic {
        return Err(KdvError::InvalidConfig {
            field: "boundary",
            reason: "the weighted identity is stated for periodic functions".into(),
        });
    }
    let plain = |a: &GridFunction, b: &GridFunction| inner(a, b, None);
    let fwd = |v: &GridFunction| difference(DifferenceKind::Forward, v);
    let bwd = |v: &GridFunction| difference(DifferenceKind::Backward, v);

    let lhs = plain(&airy_difference(u).product(p)?, u)?;
    let du_sq = fwd(u).map(|v| v * v);
    let d2u = fwd(&fwd(u));
    let rhs = plain(&du_sq, &bwd(p))?
        + 0.5 * plain(&du_sq, &fwd(p))?
        + 0.5 * u.dx() * plain(&d2u.product(&d2u)?, p)?
        - 0.5 * plain(&u.product(u)?, &second_difference(&bwd(p)))?;
    Ok(WeightedAiryIdentity { lhs, rhs })
}

/// `int |I u|^2 dx` for the continuous piecewise-linear interpolant `I u` of
/// the nodal values, extended by zero off a truncated line:
/// `(2/3) ||u||^2 + (dx/3) sum_j u_{j+1} u_j`.
pub fn interpolant_l2_squared(u: &GridFunction) -> f64 {
    let e = Ext {
        v: u.values(),
        periodic: u.boundary() == Boundary::Periodic,
    };
    let dx = u.dx();
    let cross: f64 = (0..u.len() as isize).map(|j| e.get(j) * e.get(j + 1)).sum();
    2.0 / 3.0 * dx * sum_squares(u.values()) + dx / 3.0 * cross
}

/// One sampled time of [`check_interpolant_bounds`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterpolantSample {
    pub t: f64,
    /// `||u_dx(., t)||_{L^2}`
    pub l2: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterpolantReport {
    /// `||u^0||`, the discrete norm of the initial state.
    pub bound: f64,
    pub samples: Vec<InterpolantSample>,
}

impl InterpolantReport {
    pub fn all_ok(&self) -> bool {
        self.samples.iter().all(|s| s.ok)
    }

    pub fn max_l2(&self) -> f64 {
        self.samples.iter().map(|s| s.l2).fold(0.0, f64::max)
    }
}

/// Checks `||u_dx(., t)|| <= ||u^0||` at every time level and every step midpoint.
pub fn check_interpolant_bounds(traj: &Trajectory) -> Result<InterpolantReport> {
    if !traj.is_step_resolved() {
        return Err(KdvError::MissingSnapshots(traj.record_every()));
    }
    let snaps = traj.snapshots();
    let u0 = &snaps[0].u;
    let bound = (u0.dx() * sum_squares(u0.values())).sqrt();
    let limit = bound * (1.0 + L2_TOLERANCE);
    let sample = |t: f64, u: &GridFunction| {
        let l2 = interpolant_l2_squared(u).max(0.0).sqrt();
        InterpolantSample { t, l2, ok: l2 <= limit }
    };

    let mut samples = vec![sample(snaps[0].t, u0)];
    for pair in snaps.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let mid = a.u.zip_with(&b.u, |x, y| 0.5 * (x + y))?;
        samples.push(sample(0.5 * (a.t + b.t), &mid));
        samples.push(sample(b.t, &b.u));
    }
    Ok(InterpolantReport { bound, samples })
}
