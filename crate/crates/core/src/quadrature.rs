//! One-dimensional quadrature utilities shared by the radial integrals,
//! the time product rule and the comparison-kernel convolutions.

use gauss_quad::GaussLegendre;

use crate::error::{LeviError, Result};

/// Gauss–Legendre nodes and weights on [-1, 1], sorted by node.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let rule = GaussLegendre::new(n.max(2)).expect("Gauss-Legendre degree >= 2");
    let mut pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

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
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Kronrod value and the |K15 − G7| error estimate on one panel.
pub fn gauss_kronrod15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let hw = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = hw * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * hw, ((k - g) * hw).abs())
}

/// Tolerances for [`integrate_adaptive`].
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveTol {
    pub abs: f64,
    pub rel: f64,
    pub max_panels: usize,
}

impl Default for AdaptiveTol {
    fn default() -> Self {
        Self {
            abs: 1e-13,
            rel: 1e-11,
            max_panels: 2000,
        }
    }
}

/// Globally adaptive Gauss–Kronrod integration over the panels delimited by
/// `breaks` (sorted, at least two entries). Returns value and error estimate.
pub fn integrate_adaptive<F: FnMut(f64) -> f64>(
    mut f: F,
    breaks: &[f64],
    tol: AdaptiveTol,
    context: &'static str,
) -> Result<(f64, f64)> {
    let mut panels: Vec<(f64, f64, f64, f64)> = Vec::new();
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let (v, e) = gauss_kronrod15(&mut f, w[0], w[1]);
            panels.push((w[0], w[1], v, e));
        }
    }
    loop {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if !total.is_finite() {
            return Err(LeviError::QuadratureNonconvergence {
                context,
                tol: tol.abs,
                estimate: f64::INFINITY,
            });
        }
        let target = tol.abs.max(tol.rel * total.abs());
        if err <= target {
            return Ok((total, err));
        }
        if panels.len() >= tol.max_panels {
            return Err(LeviError::QuadratureNonconvergence {
                context,
                tol: target,
                estimate: err,
            });
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .3.total_cmp(&b.1 .3))
            .expect("nonempty panel list");
        let (a, b, _, _) = panels.swap_remove(worst);
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            return Err(LeviError::QuadratureNonconvergence {
                context,
                tol: target,
                estimate: err,
            });
        }
        let (v1, e1) = gauss_kronrod15(&mut f, a, m);
        let (v2, e2) = gauss_kronrod15(&mut f, m, b);
        panels.push((a, m, v1, e1));
        panels.push((m, b, v2, e2));
    }
}

/// Hurwitz zeta ζ(s, q) = Σ_{n≥0} (n+q)^{−s} for s > 1, q > 0, by
/// Euler–Maclaurin summation.
pub fn hurwitz_zeta(s: f64, q: f64) -> f64 {
    assert!(s > 1.0 && q > 0.0, "hurwitz_zeta needs s > 1, q > 0");
    const N: usize = 12;
    // B_{2k}/(2k)!
    const B: [f64; 8] = [
        1.0 / 12.0,
        -1.0 / 720.0,
        1.0 / 30240.0,
        -1.0 / 1209600.0,
        1.0 / 47900160.0,
        -691.0 / 1307674368000.0,
        1.0 / 74724249600.0,
        -3617.0 / 10670622842880000.0,
    ];
    let mut sum = 0.0;
    for n in 0..N {
        sum += (n as f64 + q).powf(-s);
    }
    let a = N as f64 + q;
    sum += a.powf(1.0 - s) / (s - 1.0) + 0.5 * a.powf(-s);
    // running factor s(s+1)…(s+2k−2) a^{−s−2k+1}
    let mut fac = s * a.powf(-s - 1.0);
    for (k, b) in B.iter().enumerate() {
        let term = b * fac;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
        let m = 2.0 * k as f64;
        fac *= (s + m + 1.0) * (s + m + 2.0) / (a * a);
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        let v: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((v - 2.0 / 15.0).abs() < 1e-14);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let (v, _) = integrate_adaptive(
            |x: f64| x.powf(-0.5),
            &[0.0, 1.0],
            AdaptiveTol {
                abs: 1e-12,
                rel: 1e-12,
                max_panels: 5000,
            },
            "test",
        )
        .unwrap();
        assert!((v - 2.0).abs() < 1e-9);
    }

    #[test]
    fn adaptive_reports_failure() {
        let r = integrate_adaptive(
            |x: f64| (1.0 / x).sin() / x,
            &[1e-9, 1.0],
            AdaptiveTol {
                abs: 1e-14,
                rel: 1e-14,
                max_panels: 20,
            },
            "test",
        );
        assert!(matches!(
            r,
            Err(LeviError::QuadratureNonconvergence { .. })
        ));
    }

    #[test]
    fn hurwitz_matches_riemann_zeta() {
        let pi = std::f64::consts::PI;
        assert!((hurwitz_zeta(2.0, 1.0) - pi * pi / 6.0).abs() < 1e-14);
        assert!((hurwitz_zeta(4.0, 1.0) - pi.powi(4) / 90.0).abs() < 1e-14);
        // ζ(2, 1/2) = (2² − 1) ζ(2)
        assert!((hurwitz_zeta(2.0, 0.5) - 3.0 * pi * pi / 6.0).abs() < 1e-13);
        // brute force oracle at a non-integer exponent
        let brute: f64 = (0..2_000_000).rev().map(|n| (n as f64 + 0.3).powf(-3.5)).sum();
        assert!((hurwitz_zeta(3.5, 0.3) - brute).abs() < 1e-12);
    }
}
