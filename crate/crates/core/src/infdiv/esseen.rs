use serde::Serialize;

use super::{Error, Result, SmoothingLaw};

#[derive(Debug, Clone, PartialEq)]
pub struct EsseenConfig {
    /// `C_E` in `Q(H, δ) ≤ C_E · δ ∫_{|t| ≤ 1/δ} Ĥ(t) dt`. Esseen's inequality
    /// holds with `(96/95)²`, so the default 2 leaves a wide margin.
    pub constant: f64,
    pub tol: f64,
    pub max_intervals: usize,
}

impl Default for EsseenConfig {
    fn default() -> Self {
        EsseenConfig {
            constant: 2.0,
            tol: 1e-10,
            max_intervals: 20_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EsseenBound {
    /// `δ ∫_{|t| ≤ 1/δ} Ĥ^λ(t) dt`.
    pub integral: f64,
    pub error_estimate: f64,
    /// `min(C_E · integral, 1)`.
    pub bound: f64,
}

/// Adaptive Gauss–Kronrod (7/15) evaluation of the Esseen integral for a
/// one-dimensional `H^λ`.
pub fn esseen_integral(law: &SmoothingLaw, delta: f64, cfg: &EsseenConfig) -> Result<EsseenBound> {
    if law.dim() != 1 {
        return Err(Error::NotOneDimensional(law.dim()));
    }
    if !(delta > 0.0) {
        return Err(Error::NonPositive {
            name: "delta",
            value: delta,
        });
    }
    let f = |t: f64| law.cf(&[t]);
    // the integrand is even
    let (half, err) = integrate(f, 0.0, 1.0 / delta, cfg.tol / (2.0 * delta), cfg.max_intervals)?;
    let integral = 2.0 * delta * half;
    Ok(EsseenBound {
        integral,
        error_estimate: 2.0 * delta * err,
        bound: (cfg.constant * integral).min(1.0),
    })
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let pair = f(c - h * XGK[i]) + f(c + h * XGK[i]);
        kronrod += WGK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Global adaptive bisection: keep splitting the interval with the largest
/// error estimate until the summed estimate drops below `tol`.
pub(crate) fn integrate(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
    max_intervals: usize,
) -> Result<(f64, f64)> {
    // seed with a uniform split so narrow periodic bumps are not missed
    let seeds = 16;
    let mut parts: Vec<(f64, f64, f64, f64)> = (0..seeds)
        .map(|i| {
            let lo = a + (b - a) * i as f64 / seeds as f64;
            let hi = a + (b - a) * (i + 1) as f64 / seeds as f64;
            let (v, e) = gk15(&f, lo, hi);
            (lo, hi, v, e)
        })
        .collect();
    loop {
        let err: f64 = parts.iter().map(|p| p.3).sum();
        if err <= tol {
            return Ok((parts.iter().map(|p| p.2).sum(), err));
        }
        if parts.len() >= max_intervals {
            return Err(Error::QuadratureBudget {
                tol,
                intervals: parts.len(),
            });
        }
        let worst = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .unwrap();
        let (lo, hi, _, _) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::WeightVector;
    use crate::num::{int, r};

    /// Composite Simpson on a fine uniform grid, independent of the adaptive
    /// Kronrod path.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
        let h = (b - a) / panels as f64;
        let mut s = f(a) + f(b);
        for i in 1..panels {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + h * i as f64);
        }
        s * h / 3.0
    }

    #[test]
    fn flat_cf_integrates_to_two() {
        let h = SmoothingLaw::new(WeightVector::ones(3).unwrap(), int(0)).unwrap();
        let e = esseen_integral(&h, 0.3, &Default::default()).unwrap();
        assert!((e.integral - 2.0).abs() < 1e-12);
        assert_eq!(e.bound, 1.0);
    }

    #[test]
    fn matches_refined_simpson() {
        let h = SmoothingLaw::new(WeightVector::ones(20).unwrap(), int(1)).unwrap();
        let delta = 0.1;
        let e = esseen_integral(&h, delta, &Default::default()).unwrap();
        let reference = delta * simpson(|t| h.cf(&[t]), -1.0 / delta, 1.0 / delta, 2_000_000);
        assert!((e.integral - reference).abs() < 1e-8, "{} vs {reference}", e.integral);
    }

    #[test]
    fn rejects_bad_inputs() {
        let h = SmoothingLaw::new(WeightVector::ones(2).unwrap(), r(0.5)).unwrap();
        assert!(esseen_integral(&h, 0.0, &Default::default()).is_err());
        let h2 = SmoothingLaw::new(
            WeightVector::new(2, vec![vec![int(1), int(0)]]).unwrap(),
            int(1),
        )
        .unwrap();
        assert_eq!(
            esseen_integral(&h2, 0.5, &Default::default()),
            Err(Error::NotOneDimensional(2))
        );
        let tight = EsseenConfig {
            max_intervals: 16,
            tol: 1e-300,
            ..Default::default()
        };
        assert!(matches!(
            esseen_integral(&h, 0.01, &tight),
            Err(Error::QuadratureBudget { .. })
        ));
    }
}
