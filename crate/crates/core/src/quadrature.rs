//! Adaptive Gauss–Kronrod quadrature on finite intervals.

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integration window and accuracy target for the oracles.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct QuadratureSpec {
    /// Half-width of the integration window in beam widths.
    pub half_width_sigmas: f64,
    pub rel_tol: f64,
    pub max_depth: u32,
}

impl QuadratureSpec {
    pub fn new(half_width_sigmas: f64, rel_tol: f64, max_depth: u32) -> Result<Self> {
        if !(half_width_sigmas >= 8.0) || !half_width_sigmas.is_finite() {
            return Err(Error::InvalidArgument("half_width_sigmas must be at least 8"));
        }
        if !(rel_tol > 0.0 && rel_tol <= 1e-6) {
            return Err(Error::InvalidArgument("rel_tol must lie in (0, 1e-6]"));
        }
        if max_depth < 10 {
            return Err(Error::InvalidArgument("max_depth must be at least 10"));
        }
        Ok(Self { half_width_sigmas, rel_tol, max_depth })
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { half_width_sigmas: 12.0, rel_tol: 1e-10, max_depth: 40 }
    }
}

/// Absolute error floor for integrals that vanish.
pub const ABS_TOL_FLOOR: f64 = 1e-14;

const INITIAL_PANELS: usize = 16;

// 15-point Kronrod abscissae (positive half, descending) with the embedded
// 7-point Gauss rule on the odd entries.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

struct Panel {
    kronrod: f64,
    error: f64,
    abs: f64,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    let mut abs = WGK[7] * fc.abs();
    for j in 0..7 {
        let x = half * XGK[j];
        let (f1, f2) = (f(center - x), f(center + x));
        kronrod += WGK[j] * (f1 + f2);
        abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    Panel { kronrod: kronrod * half, error: ((kronrod - gauss) * half).abs(), abs: abs * half.abs() }
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, panel: Panel, tol: f64, depth: u32, max_depth: u32) -> Result<f64> {
    // second clause: the Gauss/Kronrod difference is down at rounding level
    if panel.error <= tol || panel.error <= 50.0 * f64::EPSILON * panel.abs {
        return Ok(panel.kronrod);
    }
    if depth >= max_depth {
        return Err(Error::MaxDepthExceeded(max_depth));
    }
    let mid = 0.5 * (a + b);
    let left = gk15(f, a, mid);
    let right = gk15(f, mid, b);
    Ok(adapt(f, a, mid, left, 0.5 * tol, depth + 1, max_depth)?
        + adapt(f, mid, b, right, 0.5 * tol, depth + 1, max_depth)?)
}

/// Integrates `f` over `[a, b]` by recursive bisection with a 7/15-point
/// Gauss–Kronrod pair.
///
/// The error target is `rel_tol` times `∫|f|` (estimated on 16 initial
/// panels), with an absolute floor of [`ABS_TOL_FLOOR`].
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64> {
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidArgument("integration bounds must satisfy a < b"));
    }
    let h = (b - a) / INITIAL_PANELS as f64;
    let bounds = |i: usize| {
        let lo = a + h * i as f64;
        let hi = if i + 1 == INITIAL_PANELS { b } else { a + h * (i + 1) as f64 };
        (lo, hi)
    };
    let mut panels = alloc::vec::Vec::with_capacity(INITIAL_PANELS);
    let mut scale = 0.0;
    for i in 0..INITIAL_PANELS {
        let (lo, hi) = bounds(i);
        let p = gk15(&f, lo, hi);
        scale += p.abs;
        panels.push(p);
    }
    if !scale.is_finite() {
        return Err(Error::NonFinite);
    }
    let tol = (spec.rel_tol * scale).max(ABS_TOL_FLOOR) / INITIAL_PANELS as f64;
    let mut total = 0.0;
    for (i, p) in panels.into_iter().enumerate() {
        let (lo, hi) = bounds(i);
        total += adapt(&f, lo, hi, p, tol, 0, spec.max_depth)?;
    }
    Ok(total)
}
