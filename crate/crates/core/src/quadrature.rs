//! Numerical integration: adaptive Gauss–Kronrod (21 points) for vector
//! valued complex integrands, Gauss–Legendre rules, and Gaussian tail bounds
//! used to truncate half-line integrals.

#![allow(clippy::excessive_precision)]

use num_complex::Complex64;

use crate::error::{Error, Result};

// Kronrod abscissae on [0, 1], largest first; odd indices are the embedded
// 10-point Gauss nodes.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Settings for [`integrate_vec`].
#[derive(Debug, Clone)]
pub struct AdaptiveOptions {
    /// Target for the (weighted) error estimate.
    pub abs_tol: f64,
    /// Per-component weights in the error norm Σ w_k |K_k − G_k|; `None`
    /// means unit weights.
    pub weights: Option<Vec<f64>>,
    /// Equal panels the interval is split into before adapting.
    pub initial_panels: usize,
    pub max_panels: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            weights: None,
            initial_panels: 1,
            max_panels: 2000,
        }
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, PartialEq)]
pub struct Integral {
    pub values: Vec<Complex64>,
    /// Weighted error estimate (sum over panels of |Kronrod − Gauss|).
    pub error: f64,
    pub panels: usize,
}

struct Panel {
    a: f64,
    b: f64,
    values: Vec<Complex64>,
    error: f64,
}

/// Scratch buffers for one GK21 panel evaluation.
struct Scratch {
    fx: Vec<Complex64>,
    gauss: Vec<Complex64>,
}

fn gk21<F>(f: &mut F, a: f64, b: f64, weights: Option<&[f64]>, scratch: &mut Scratch) -> Panel
where
    F: FnMut(f64, &mut [Complex64]),
{
    let dim = scratch.fx.len();
    let (center, half) = (0.5 * (a + b), 0.5 * (b - a));
    let mut kron = vec![Complex64::new(0.0, 0.0); dim];
    scratch.gauss.iter_mut().for_each(|g| *g = Complex64::new(0.0, 0.0));
    let mut accumulate = |x: f64, wk: f64, wg: f64, fx: &mut Vec<Complex64>, gauss: &mut Vec<Complex64>| {
        f(x, fx);
        for k in 0..dim {
            kron[k] += fx[k] * wk;
            if wg != 0.0 {
                gauss[k] += fx[k] * wg;
            }
        }
    };
    let Scratch { fx, gauss } = scratch;
    accumulate(center, WGK[10], 0.0, fx, gauss);
    for (j, (&x, &wk)) in XGK.iter().zip(&WGK).take(10).enumerate() {
        let wg = if j % 2 == 1 { WG[j / 2] } else { 0.0 };
        accumulate(center - half * x, wk, wg, fx, gauss);
        accumulate(center + half * x, wk, wg, fx, gauss);
    }
    let mut error = 0.0;
    for k in 0..dim {
        kron[k] *= half;
        let diff = (kron[k] - gauss[k] * half).norm();
        error += weights.map_or(1.0, |w| w[k]) * diff;
    }
    Panel {
        a,
        b,
        values: kron,
        error,
    }
}

/// Integrates a vector of complex functions over `[a, b]`.
///
/// `f(x, out)` writes all `dim` integrands at `x`. Panels are bisected,
/// worst first, until the summed error estimate meets `opts.abs_tol`.
pub fn integrate_vec<F>(mut f: F, a: f64, b: f64, dim: usize, opts: &AdaptiveOptions) -> Result<Integral>
where
    F: FnMut(f64, &mut [Complex64]),
{
    if let Some(w) = &opts.weights {
        assert_eq!(w.len(), dim, "one error weight per component");
    }
    let weights = opts.weights.as_deref();
    let mut scratch = Scratch {
        fx: vec![Complex64::new(0.0, 0.0); dim],
        gauss: vec![Complex64::new(0.0, 0.0); dim],
    };
    let n0 = opts.initial_panels.max(1);
    let width = (b - a) / n0 as f64;
    let mut panels: Vec<Panel> = (0..n0)
        .map(|i| {
            let lo = a + width * i as f64;
            let hi = if i + 1 == n0 { b } else { lo + width };
            gk21(&mut f, lo, hi, weights, &mut scratch)
        })
        .collect();
    loop {
        let error: f64 = panels.iter().map(|p| p.error).sum();
        if error <= opts.abs_tol || panels.len() >= opts.max_panels {
            let mut values = vec![Complex64::new(0.0, 0.0); dim];
            for p in &panels {
                for (v, pv) in values.iter_mut().zip(&p.values) {
                    *v += pv;
                }
            }
            if error > opts.abs_tol {
                return Err(Error::QuadratureNonConvergence {
                    context: format!("adaptive integral on [{a}, {b}]"),
                    error,
                    tolerance: opts.abs_tol,
                });
            }
            return Ok(Integral {
                values,
                error,
                panels: panels.len(),
            });
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .expect("at least one panel");
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        panels.push(gk21(&mut f, p.a, mid, weights, &mut scratch));
        panels.push(gk21(&mut f, mid, p.b, weights, &mut scratch));
    }
}

/// Adaptive integral of a single real function.
pub fn integrate<F>(mut f: F, a: f64, b: f64, abs_tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let opts = AdaptiveOptions {
        abs_tol,
        ..AdaptiveOptions::default()
    };
    integrate_vec(|x, out| out[0] = Complex64::new(f(x), 0.0), a, b, 1, &opts).map(|r| r.values[0].re)
}

/// n-point Gauss–Legendre nodes and weights on [−1, 1], by Newton iteration
/// on P_n from the Chebyshev initial guesses.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Gauss–Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(n);
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    x.into_iter().zip(w).map(|(x, w)| (c + h * x, h * w)).collect()
}

/// Upper bound on ∫_L^∞ s^k e^{−s²} ds.
///
/// Integration by parts gives J_k = L^{k−1}e^{−L²}/2 + (k−1)/2 J_{k−2} and
/// J_{k−2} ≤ J_k / L², hence J_k ≤ L^{k−1}e^{−L²} / (2 − (k−1)/L²).
pub fn gaussian_tail_bound(k: u32, limit: f64) -> f64 {
    let l2 = limit * limit;
    if k == 0 {
        return (-l2).exp() / (2.0 * limit);
    }
    let km1 = f64::from(k - 1);
    assert!(2.0 * l2 > km1, "tail bound needs 2L² > k − 1");
    limit.powi(k as i32 - 1) * (-l2).exp() / (2.0 - km1 / l2)
}

/// Smallest L ≥ `start` (in steps of 0.5) with Σ_k |c_k| J_k(L) ≤ `tol`,
/// where `abs_coeffs[k]` bounds the coefficient of s^k e^{−s²}.
pub fn truncation_limit(abs_coeffs: &[f64], start: f64, tol: f64) -> f64 {
    let mut limit = start;
    loop {
        let tail: f64 = abs_coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * gaussian_tail_bound(k as u32, limit))
            .sum();
        if tail <= tol {
            return limit;
        }
        limit += 0.5;
    }
}
