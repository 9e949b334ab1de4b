//! Globally adaptive Gauss–Kronrod (7/15) quadrature for complex-valued integrands.

use alloc::vec::Vec;
use num_complex::Complex64;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

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

/// Gauss weights for the 7-point rule living on the odd Kronrod nodes.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadratureOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 0.0,
            max_intervals: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub value: Complex64,
    pub error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
}

fn kronrod<F>(f: &mut F, a: f64, b: f64, context: &'static str) -> Result<Panel>
where
    F: FnMut(f64) -> Complex64,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut eval = |x: f64| -> Result<Complex64> {
        let v = f(x);
        if v.re.is_finite() && v.im.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteIntegrand { at: x, context })
        }
    };

    let fc = eval(center)?;
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = eval(center - dx)? + eval(center + dx)?;
        kronrod += pair * WGK[j];
        if j % 2 == 1 {
            gauss += pair * WG[j / 2];
        }
    }
    Ok(Panel {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).norm(),
    })
}

/// Integrates `f` over `[points[0], points[last]]`, with the interior `points` used as
/// mandatory breakpoints (kinks, near-singular peaks). `points` must be sorted.
pub fn integrate<F>(
    mut f: F,
    points: &[f64],
    options: &QuadratureOptions,
    context: &'static str,
) -> Result<Quadrature>
where
    F: FnMut(f64) -> Complex64,
{
    debug_assert!(points.windows(2).all(|w| w[0] <= w[1]));
    let mut panels: Vec<Panel> = Vec::new();
    for w in points.windows(2) {
        if w[1] > w[0] {
            panels.push(kronrod(&mut f, w[0], w[1], context)?);
        }
    }
    let mut evaluations = 15 * panels.len();

    loop {
        let total: Complex64 = panels.iter().map(|p| p.value).sum();
        let error: f64 = panels.iter().map(|p| p.error).sum();
        let magnitude: f64 = panels.iter().map(|p| p.value.norm()).sum();
        // below this the panel sums are dominated by rounding
        let roundoff = 64.0 * f64::EPSILON * magnitude;
        let tolerance = options
            .abs_tol
            .max(options.rel_tol * total.norm())
            .max(roundoff);
        if error <= tolerance {
            return Ok(Quadrature {
                value: total,
                error,
                evaluations,
            });
        }
        if panels.len() >= options.max_intervals {
            return Err(Error::QuadratureNotConverged {
                error,
                intervals: panels.len(),
            });
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, p)| if p.error > acc.1 { (i, p.error) } else { acc });
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if mid <= p.a || mid >= p.b {
            // interval can no longer be split in floating point
            return Err(Error::QuadratureNotConverged {
                error,
                intervals: panels.len() + 1,
            });
        }
        panels.push(kronrod(&mut f, p.a, mid, context)?);
        panels.push(kronrod(&mut f, mid, p.b, context)?);
        evaluations += 30;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn polynomial_is_exact() {
        let q = integrate(
            |x| Complex64::new(x * x * x - 2.0 * x, x * x),
            &[0.0, 2.0],
            &QuadratureOptions::default(),
            "test",
        )
        .unwrap();
        assert!((q.value.re - 0.0).abs() < 1e-14);
        assert!((q.value.im - 8.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn peaked_integrand_converges() {
        // ∫ dx / sqrt(a² + x²) over [-1, 1] = 2 asinh(1/a)
        let a = 1e-4;
        let q = integrate(
            |x| Complex64::new(1.0 / (a * a + x * x).sqrt(), 0.0),
            &[-1.0, 0.0, 1.0],
            &QuadratureOptions::default(),
            "test",
        )
        .unwrap();
        let exact = 2.0 * (1.0 / a).asinh();
        assert!((q.value.re - exact).abs() / exact < 1e-9);
    }

    #[test]
    fn oscillatory_integrand() {
        let q = integrate(
            |x| Complex64::new(0.0, -x).exp(),
            &[0.0, 20.0 * PI],
            &QuadratureOptions::default(),
            "test",
        )
        .unwrap();
        assert!(q.value.norm() < 1e-9);
    }

    #[test]
    fn non_finite_integrand_is_reported() {
        let err = integrate(
            |x| Complex64::new((x - 0.5).ln(), 0.0),
            &[0.0, 1.0],
            &QuadratureOptions::default(),
            "test",
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonFiniteIntegrand { .. }));
    }
}
