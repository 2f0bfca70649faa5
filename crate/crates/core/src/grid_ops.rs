//! Grid functions on a uniform mesh and the difference calculus acting on them.
//!
//! A [`GridFunction`] stores samples `u_j = u(x_j)` with `x_j = x_left + j * dx`.
//! Outside the stored window the samples are either periodic continuations
//! ([`Boundary::Periodic`], period = number of stored values) or zero
//! ([`Boundary::TruncatedLine`]). Every operator here reads neighbours through
//! [`GridFunction::at`], so both boundary modes share one code path.

use crate::error::{KdvError, Result};

/// How samples outside the stored window are defined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Boundary {
    /// Values repeat with period equal to the number of stored samples.
    Periodic,
    /// Values vanish outside the stored window.
    TruncatedLine,
}

/// Uniform grid metadata: left edge, spacing, sample count and boundary mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    x_left: f64,
    dx: f64,
    len: usize,
    boundary: Boundary,
}

impl Grid {
    pub fn new(x_left: f64, dx: f64, len: usize, boundary: Boundary) -> Result<Self> {
        if !(dx.is_finite() && dx > 0.0) {
            return Err(KdvError::InvalidSpacing(dx));
        }
        if len == 0 {
            return Err(KdvError::EmptyGrid);
        }
        if !x_left.is_finite() {
            return Err(KdvError::InvalidConfig {
                field: "x_left",
                reason: format!("must be finite, got {x_left}"),
            });
        }
        Ok(Self {
            x_left,
            dx,
            len,
            boundary,
        })
    }

    /// Grid with `n_cells` nodes covering `[x_left, x_right)`, so `dx = (x_right - x_left) / n_cells`.
    pub fn from_window(x_left: f64, x_right: f64, n_cells: usize, boundary: Boundary) -> Result<Self> {
        if n_cells == 0 {
            return Err(KdvError::EmptyGrid);
        }
        Self::new(x_left, (x_right - x_left) / n_cells as f64, n_cells, boundary)
    }

    pub fn x_left(&self) -> f64 {
        self.x_left
    }

    /// Right end of the stored window, `x_left + len * dx`.
    pub fn x_right(&self) -> f64 {
        self.x_left + self.len as f64 * self.dx
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Node coordinate `x_j`.
    pub fn x(&self, j: usize) -> f64 {
        self.x_left + j as f64 * self.dx
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(move |j| self.x(j))
    }

    /// Samples `f` pointwise at the nodes.
    pub fn sample(&self, f: impl FnMut(f64) -> f64) -> Result<GridFunction> {
        GridFunction::new(*self, self.nodes().map(f).collect())
    }

    fn same_as(&self, other: &Grid) -> bool {
        self.len == other.len
            && self.boundary == other.boundary
            && self.dx == other.dx
            && self.x_left == other.x_left
    }
}

/// Samples of a function on a [`Grid`]. Values are finite and immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len {
            return Err(KdvError::LengthMismatch {
                expected: grid.len,
                actual: values.len(),
            });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(KdvError::NonFinite { index, value });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len],
        }
    }

    /// Skips the finiteness scan; callers guarantee `values.len() == grid.len()`.
    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len);
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dx(&self) -> f64 {
        self.grid.dx
    }

    pub fn boundary(&self) -> Boundary {
        self.grid.boundary
    }

    /// Value at any integer index, applying the boundary rule outside `0..len`.
    #[inline]
    pub fn at(&self, j: isize) -> f64 {
        let n = self.values.len() as isize;
        match self.grid.boundary {
            Boundary::Periodic => self.values[j.rem_euclid(n) as usize],
            Boundary::TruncatedLine => {
                if (0..n).contains(&j) {
                    self.values[j as usize]
                } else {
                    0.0
                }
            }
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise combination of two functions on the same grid.
    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_grid(other)?;
        Ok(Self::from_raw(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    /// Pointwise product `u_j v_j`.
    pub fn product(&self, other: &GridFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// For the truncated line, returns the same function on a window widened by
    /// `k` zero nodes on each side. Norms of difference operators computed on the
    /// padded function include the ghost nodes reached by the stencils. Periodic
    /// functions are returned unchanged.
    pub fn padded(&self, k: usize) -> Self {
        match self.grid.boundary {
            Boundary::Periodic => self.clone(),
            Boundary::TruncatedLine => {
                let grid = Grid {
                    x_left: self.grid.x_left - k as f64 * self.grid.dx,
                    len: self.grid.len + 2 * k,
                    ..self.grid
                };
                let mut values = vec![0.0; grid.len];
                values[k..k + self.len()].copy_from_slice(&self.values);
                Self::from_raw(grid, values)
            }
        }
    }

    pub(crate) fn check_same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(KdvError::GridMismatch)
        }
    }

    fn stencil(&self, f: impl Fn(isize) -> f64) -> Self {
        let values = (0..self.len() as isize).map(f).collect();
        Self::from_raw(self.grid, values)
    }
}

/// One-sided or centred first difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DifferenceKind {
    /// `(u_{j+1} - u_j) / dx`
    Forward,
    /// `(u_j - u_{j-1}) / dx`
    Backward,
    /// `(u_{j+1} - u_{j-1}) / (2 dx)`
    Central,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftDirection {
    /// `(S+ u)_j = u_{j+1}`
    Plus,
    /// `(S- u)_j = u_{j-1}`
    Minus,
}

pub fn difference(kind: DifferenceKind, u: &GridFunction) -> GridFunction {
    let inv = 1.0 / u.dx();
    match kind {
        DifferenceKind::Forward => u.stencil(|j| (u.at(j + 1) - u.at(j)) * inv),
        DifferenceKind::Backward => u.stencil(|j| (u.at(j) - u.at(j - 1)) * inv),
        DifferenceKind::Central => u.stencil(|j| 0.5 * (u.at(j + 1) - u.at(j - 1)) * inv),
    }
}

/// Two-point average `<u>_j = (u_{j+1} + u_{j-1}) / 2`.
pub fn average(u: &GridFunction) -> GridFunction {
    u.stencil(|j| 0.5 * (u.at(j + 1) + u.at(j - 1)))
}

pub fn shift(direction: ShiftDirection, u: &GridFunction) -> GridFunction {
    match direction {
        ShiftDirection::Plus => u.stencil(|j| u.at(j + 1)),
        ShiftDirection::Minus => u.stencil(|j| u.at(j - 1)),
    }
}

/// Third difference `D+ D+ D- u`, i.e. `(u_{j+2} - 3u_{j+1} + 3u_j - u_{j-1}) / dx^3`.
pub fn airy_difference(u: &GridFunction) -> GridFunction {
    let inv = u.dx().powi(-3);
    u.stencil(|j| (u.at(j + 2) - 3.0 * u.at(j + 1) + 3.0 * u.at(j) - u.at(j - 1)) * inv)
}

/// Second difference `D+ D- u`.
pub fn second_difference(u: &GridFunction) -> GridFunction {
    let inv = u.dx().powi(-2);
    u.stencil(|j| (u.at(j + 1) - 2.0 * u.at(j) + u.at(j - 1)) * inv)
}

/// Discrete inner product `dx * sum_j p_j u_j v_j`, with `p = 1` when no weight is given.
pub fn inner(u: &GridFunction, v: &GridFunction, weight: Option<&WeightFunction>) -> Result<f64> {
    u.check_same_grid(v)?;
    let s = match weight {
        None => u.values.iter().zip(&v.values).map(|(a, b)| a * b).sum::<f64>(),
        Some(p) => {
            if !p.grid.same_as(&u.grid) {
                return Err(KdvError::GridMismatch);
            }
            u.values
                .iter()
                .zip(&v.values)
                .zip(&p.samples)
                .map(|((a, b), w)| w * a * b)
                .sum::<f64>()
        }
    };
    Ok(u.dx() * s)
}

/// Discrete `l^2` and sup norms of a grid function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l2: f64,
    pub sup: f64,
}

pub fn norms(u: &GridFunction) -> Norms {
    Norms {
        l2: l2_norm(u),
        sup: sup_norm(u.values()),
    }
}

pub fn l2_norm(u: &GridFunction) -> f64 {
    (u.dx() * sum_squares(u.values())).sqrt()
}

pub(crate) fn sum_squares(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

pub(crate) fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Sampled weight `p = p_hat * omega` used for the local smoothing estimates.
///
/// `p_hat(x) = max(1, min(1 + x + R, 1 + 2R))` is a ramp rising from 1 to
/// `1 + 2R` across `[-R, R]` and `omega` is the hat mollifier supported on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightFunction {
    grid: Grid,
    samples: Vec<f64>,
    ramp: f64,
}

impl WeightFunction {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Ramp half-width `R`.
    pub fn ramp(&self) -> f64 {
        self.ramp
    }

    pub fn as_grid_function(&self) -> GridFunction {
        GridFunction::from_raw(self.grid, self.samples.clone())
    }
}

/// Unmollified ramp `max(1, min(1 + x + R, 1 + 2R))`.
pub fn ramp_profile(x: f64, ramp: f64) -> f64 {
    (1.0 + x + ramp).min(1.0 + 2.0 * ramp).max(1.0)
}

/// Hat mollifier: symmetric, positive, unit mass, supported on `[-1, 1]`.
pub fn hat_mollifier(y: f64) -> f64 {
    (1.0 - y.abs()).max(0.0)
}

/// Samples `p = p_hat * omega` on the nodes of `grid`.
///
/// Where the ramp is constant or affine over the whole mollifier support the
/// convolution is evaluated in closed form. Elsewhere it uses composite Simpson
/// on a sub-grid at least ten times finer than `dx`, with panel edges on the
/// kink of the hat at `y = 0`.
pub fn build_weight(ramp: f64, grid: &Grid) -> Result<WeightFunction> {
    if !(ramp.is_finite() && ramp > 1.0) {
        return Err(KdvError::InvalidRamp(ramp));
    }
    // Number of Simpson intervals on [-1, 1]; a multiple of 4 keeps y = 0 on a panel edge.
    let target = (20.0 / grid.dx).ceil() as usize;
    let intervals = (target.div_ceil(4) * 4).max(4);
    let h = 2.0 / intervals as f64;

    let samples = grid
        .nodes()
        .map(|x| {
            if x + 1.0 <= -ramp {
                1.0
            } else if x - 1.0 >= ramp {
                1.0 + 2.0 * ramp
            } else if (x + 1.0) <= ramp && (x - 1.0) >= -ramp {
                // p_hat is affine on [x-1, x+1] and omega is symmetric
                1.0 + x + ramp
            } else {
                let f = |y: f64| ramp_profile(x - y, ramp) * hat_mollifier(y);
                let mut acc = f(-1.0) + f(1.0);
                for k in 1..intervals {
                    let y = -1.0 + k as f64 * h;
                    acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(y);
                }
                acc * h / 3.0
            }
        })
        .collect();

    Ok(WeightFunction {
        grid: *grid,
        samples,
        ramp,
    })
}
