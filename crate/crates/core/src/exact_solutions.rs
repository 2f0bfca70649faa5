//! Closed-form KdV solutions and initial data used by the experiment presets.
//!
//! All formulas solve `u_t + u u_x + u_xxx = 0`.

use crate::error::{KdvError, Result};

/// Width parameter of the amplitude-9 soliton: `u = 12 k^2 sech^2(k (x - 4 k^2 t))` with `4 k^2 = 3`.
const ONE_SOLITON_WIDTH: f64 = 0.866_025_403_784_438_6;

/// Single soliton of height 9 travelling right with speed 3:
/// `9 sech^2(sqrt(3)/2 (x - 3t))`.
pub fn one_soliton(x: f64, t: f64) -> f64 {
    let s = sech(ONE_SOLITON_WIDTH * (x - 3.0 * t));
    9.0 * s * s
}

/// Speeds `2a` and `2b` of the two interacting solitons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoSolitonParams {
    a: f64,
    b: f64,
}

impl TwoSolitonParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if a > 0.0 && a < b && b.is_finite() {
            Ok(Self { a, b })
        } else {
            Err(KdvError::InvalidSolitonParams { a, b })
        }
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }
}

impl Default for TwoSolitonParams {
    /// `a = 0.5`, `b = 1`.
    fn default() -> Self {
        Self { a: 0.5, b: 1.0 }
    }
}

/// Distance from the fast soliton's centre line `x = 2bt` below which the
/// rewritten (singularity-free) form is used.
pub const TWO_SOLITON_GUARD: f64 = 1e-6;

/// Two-soliton solution
///
/// ```text
/// 6(b-a) (b csch^2(X) + a sech^2(Y)) / (sqrt(a) tanh(Y) - sqrt(b) coth(X))^2
/// X = sqrt(b/2) (x - 2bt),  Y = sqrt(a/2) (x - 2at)
/// ```
///
/// The formula has a removable singularity on `X = 0`; within
/// [`TWO_SOLITON_GUARD`] of it, numerator and denominator are multiplied by
/// `tanh^2(X)`, which gives `6(b-a) (b sech^2 X + a sech^2 Y tanh^2 X) /
/// (sqrt(a) tanh Y tanh X - sqrt(b))^2`.
pub fn two_soliton(x: f64, t: f64, p: &TwoSolitonParams) -> f64 {
    let (a, b) = (p.a, p.b);
    let xs = (0.5 * b).sqrt() * (x - 2.0 * b * t);
    let ys = (0.5 * a).sqrt() * (x - 2.0 * a * t);
    let sy = sech(ys);
    if (x - 2.0 * b * t).abs() < TWO_SOLITON_GUARD {
        let sx = sech(xs);
        let tx = xs.tanh();
        let num = b * sx * sx + a * sy * sy * tx * tx;
        let den = a.sqrt() * ys.tanh() * tx - b.sqrt();
        return 6.0 * (b - a) * num / (den * den);
    }
    let csch = 1.0 / xs.sinh();
    let coth = 1.0 / xs.tanh();
    let num = b * csch * csch + a * sy * sy;
    let den = a.sqrt() * ys.tanh() - b.sqrt() * coth;
    6.0 * (b - a) * num / (den * den)
}

/// Half-length of the periodic window `[-5, 5]` for [`l2_singular_init`].
pub const L2_INIT_HALF_PERIOD: f64 = 5.0;

/// `x^{-1/3}` on `(0, 1)`, zero elsewhere in `[-5, 5]`, extended with period 10.
///
/// Square integrable but unbounded near `0+`.
pub fn l2_singular_init(x: f64) -> f64 {
    let period = 2.0 * L2_INIT_HALF_PERIOD;
    let reduced = (x + L2_INIT_HALF_PERIOD).rem_euclid(period) - L2_INIT_HALF_PERIOD;
    if reduced > 0.0 && reduced < 1.0 {
        reduced.cbrt().recip()
    } else {
        0.0
    }
}

fn sech(z: f64) -> f64 {
    // cosh overflows to inf for |z| > ~710, giving the correct limit 0
    1.0 / z.cosh()
}
