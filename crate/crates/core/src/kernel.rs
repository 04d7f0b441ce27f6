//! Unbiased estimator kernels of multimode homodyne tomography.
//!
//! For a detector mixing M+1 modes into A = Σ_l e^{−iψ_l} u_l a_l, the
//! estimator of Tr{Ô ρ} at homodyne efficiency η, κ = 2η/(2η−1), is
//!
//! ```text
//! K(x) = κ^{M+1}/M! ∫₀^∞ dt e^{−t + 2i√(κt) x} t^M Tr{Ô :exp(−2i√(κt) X̂):}
//! ```
//!
//! The normal ordering matters: without it the kernel is biased. For the
//! matrix element ⟨n|ρ|m⟩ on one polarization pair (M = 1) the trace
//! factorizes into generalized Laguerre polynomials, see [`PairKernel`].
//!
//! Substituting t = s² turns every kernel into Σ_k c_k I_k(b) with
//! I_k(b) = ∫₀^∞ s^k e^{−s² + ibs} ds and b = 2√κ x. The moments I_k are
//! computed once per outcome x by adaptive quadrature and shared by all
//! requests on that detector.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{MixedEnsemble, Occupation};
use crate::homodyne::{HomodyneSample, JointDensity, PairSetting};
use crate::quadrature::{gauss_legendre_on, integrate_vec, truncation_limit, AdaptiveOptions};
use crate::special::{factorial, laguerre_coefficients};
use crate::stats::{block_estimate, block_ranges};

/// Absolute accuracy demanded of a single kernel value.
pub const KERNEL_TOLERANCE: f64 = 1e-10;

/// Truncation point of the s-integral before tail checks.
const BASE_LIMIT: f64 = 6.0;

/// κ = 2η/(2η − 1), defined for η ∈ (1/2, 1].
pub fn kappa(eta: f64) -> Result<f64> {
    if eta > 0.5 && eta <= 1.0 {
        Ok(2.0 * eta / (2.0 * eta - 1.0))
    } else {
        Err(Error::InvalidEfficiency { eta, range: "(0.5, 1]" })
    }
}

/// ⟨n|ρ|m⟩ on one polarization pair; index 0 is the ordinary mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PairRequest {
    pub n: [u8; 2],
    pub m: [u8; 2],
}

impl PairRequest {
    pub fn diagonal(n: [u8; 2]) -> Self {
        Self { n, m: n }
    }

    pub fn is_diagonal(&self) -> bool {
        self.n == self.m
    }
}

/// A matrix element over several detector pairs; the estimator is the
/// product of the pair kernels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelRequest {
    pub pairs: Vec<PairRequest>,
    pub eta: f64,
}

impl KernelRequest {
    pub fn kappa(&self) -> Result<f64> {
        kappa(self.eta)
    }
}

/// Kernel value with its quadrature error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub value: Complex64,
    pub error: f64,
}

impl KernelValue {
    pub fn converged(&self) -> bool {
        self.error <= KERNEL_TOLERANCE
    }
}

/// The moments I_k(b) = ∫₀^L s^k e^{−s² + ibs} ds for k ≤ `kmax`.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub b: f64,
    pub limit: f64,
    pub values: Vec<Complex64>,
    /// Weighted error estimate: quadrature plus the dropped tail.
    pub error: f64,
}

/// Computes the moments with error weights `weights[k]` (bounds on how much
/// each moment is amplified downstream) so that the weighted total error,
/// including the tail beyond the truncation point, stays below `tol`.
pub fn oscillatory_moments(b: f64, weights: &[f64], tol: f64) -> Result<Moments> {
    let dim = weights.len();
    let tail_budget = 0.1 * tol;
    let limit = truncation_limit(weights, BASE_LIMIT, tail_budget);
    let tail: f64 = weights
        .iter()
        .enumerate()
        .map(|(k, w)| w * crate::quadrature::gaussian_tail_bound(k as u32, limit))
        .sum();
    let opts = AdaptiveOptions {
        abs_tol: tol - tail,
        weights: Some(weights.to_vec()),
        initial_panels: (limit / 2.0).ceil() as usize,
        max_panels: 4000,
    };
    let r = integrate_vec(
        |s, out| {
            let mut v = Complex64::from_polar((-s * s).exp(), b * s);
            for slot in out.iter_mut() {
                *slot = v;
                v *= s;
            }
        },
        0.0,
        limit,
        dim,
        &opts,
    )
    .map_err(|e| match e {
        Error::QuadratureNonConvergence { error, tolerance, .. } => Error::QuadratureNonConvergence {
            context: format!("kernel moments at b = {b}"),
            error,
            tolerance,
        },
        other => other,
    })?;
    Ok(Moments {
        b,
        limit,
        values: r.values,
        error: r.error + tail,
    })
}

/// Precomputed pieces of the M = 1 kernel for ⟨n|ρ|m⟩ on one pair:
///
/// ```text
/// K = e^{iΣ_l(n_l−m_l)ψ_l} κ² Π_l[(−i√κ u_l)^{δ_l} √(ν_l!/μ_l!)]
///     ∫₀^∞ dt e^{−t+2i√(κt)x} t^{1+Σδ/2} Π_l L_{ν_l}^{δ_l}(κ u_l² t)
/// ```
///
/// with μ = max(n, m), ν = min(n, m), δ = μ − ν, u_o = cos θ, u_e = sin θ.
#[derive(Debug, Clone, PartialEq)]
pub struct PairKernel {
    request: PairRequest,
    kappa: f64,
    delta: [u32; 2],
    diff: [i32; 2],
    laguerre: [Vec<f64>; 2],
    /// Power of s multiplying the Laguerre product.
    base_power: usize,
    /// κ² Π κ^{δ/2} √(ν!/μ!)
    magnitude: f64,
    /// (−i)^{Σδ}
    unit: Complex64,
}

impl PairKernel {
    pub fn new(request: PairRequest, eta: f64) -> Result<Self> {
        let kappa = kappa(eta)?;
        let mut delta = [0u32; 2];
        let mut nu = [0u32; 2];
        let mut diff = [0i32; 2];
        let mut magnitude = kappa * kappa;
        for l in 0..2 {
            let (n, m) = (u32::from(request.n[l]), u32::from(request.m[l]));
            let (mu, lo) = (n.max(m), n.min(m));
            delta[l] = mu - lo;
            nu[l] = lo;
            diff[l] = n as i32 - m as i32;
            magnitude *= kappa.powf(f64::from(delta[l]) / 2.0) * (factorial(lo) / factorial(mu)).sqrt();
        }
        let total_delta = delta[0] + delta[1];
        let unit = Complex64::new(0.0, -1.0).powu(total_delta);
        Ok(Self {
            request,
            kappa,
            delta,
            diff,
            laguerre: [
                laguerre_coefficients(nu[0], delta[0]),
                laguerre_coefficients(nu[1], delta[1]),
            ],
            base_power: 3 + total_delta as usize,
            magnitude,
            unit,
        })
    }

    pub fn request(&self) -> PairRequest {
        self.request
    }

    /// Highest power of s in the integrand polynomial.
    pub fn max_power(&self) -> usize {
        self.base_power + 2 * (self.laguerre[0].len() - 1 + self.laguerre[1].len() - 1)
    }

    /// Polynomial coefficients c_k (without the overall magnitude and phase)
    /// at the given weights u_o, u_e.
    fn poly(&self, u_o: f64, u_e: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|c| *c = 0.0);
        let (zo, ze) = (self.kappa * u_o * u_o, self.kappa * u_e * u_e);
        let mut po = 1.0;
        for (i, a) in self.laguerre[0].iter().enumerate() {
            let mut pe = 1.0;
            for (j, b) in self.laguerre[1].iter().enumerate() {
                out[self.base_power + 2 * (i + j)] += 2.0 * a * po * b * pe;
                pe *= ze;
            }
            po *= zo;
        }
    }

    /// Upper bounds on |magnitude · c_k| over all settings (|u| ≤ 1).
    pub fn coefficient_bounds(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.max_power() + 1];
        for (i, a) in self.laguerre[0].iter().enumerate() {
            for (j, b) in self.laguerre[1].iter().enumerate() {
                out[self.base_power + 2 * (i + j)] +=
                    2.0 * (a * b).abs() * self.kappa.powi((i + j) as i32) * self.magnitude;
            }
        }
        out
    }

    /// Kernel value from precomputed moments at b = 2√κ x.
    pub fn evaluate_with(&self, moments: &Moments, setting: &PairSetting) -> Complex64 {
        let (u_o, u_e) = (setting.u_o(), setting.u_e());
        let mut c = [0.0; 16];
        let c = &mut c[..=self.max_power()];
        self.poly(u_o, u_e, c);
        let integral: Complex64 = c.iter().zip(&moments.values).map(|(c, i)| i * *c).sum();
        let weight = u_o.powi(self.delta[0] as i32) * u_e.powi(self.delta[1] as i32) * self.magnitude;
        let phase = f64::from(self.diff[0]) * setting.psi_o + f64::from(self.diff[1]) * setting.psi_e;
        integral * self.unit * Complex64::from_polar(weight, phase)
    }

    /// Kernel value at outcome `x`, computing its own moments.
    pub fn evaluate(&self, x: f64, setting: &PairSetting) -> Result<KernelValue> {
        let moments = oscillatory_moments(self.b(x), &self.coefficient_bounds(), KERNEL_TOLERANCE)?;
        Ok(KernelValue {
            value: self.evaluate_with(&moments, setting),
            error: moments.error,
        })
    }

    /// b = 2√κ x
    pub fn b(&self, x: f64) -> f64 {
        2.0 * self.kappa.sqrt() * x
    }
}

/// Several pair kernels sharing one set of moments per outcome.
#[derive(Debug, Clone)]
pub struct PairKernelSet {
    kernels: Vec<PairKernel>,
    weights: Vec<f64>,
    sqrt_kappa: f64,
}

impl PairKernelSet {
    pub fn new(requests: &[PairRequest], eta: f64) -> Result<Self> {
        let kernels: Vec<PairKernel> = requests
            .iter()
            .map(|r| PairKernel::new(*r, eta))
            .collect::<Result<_>>()?;
        let len = kernels.iter().map(PairKernel::max_power).max().unwrap_or(0) + 1;
        let mut weights = vec![0.0f64; len];
        for k in &kernels {
            for (w, b) in weights.iter_mut().zip(k.coefficient_bounds()) {
                *w = w.max(b);
            }
        }
        Ok(Self {
            kernels,
            weights,
            sqrt_kappa: kappa(eta)?.sqrt(),
        })
    }

    pub fn kernels(&self) -> &[PairKernel] {
        &self.kernels
    }

    /// Moments at outcome `x`; a convergence failure names the requests.
    pub fn moments(&self, x: f64) -> Result<Moments> {
        oscillatory_moments(2.0 * self.sqrt_kappa * x, &self.weights, KERNEL_TOLERANCE).map_err(|e| match e {
            Error::QuadratureNonConvergence {
                context,
                error,
                tolerance,
            } => {
                let names: Vec<String> = self
                    .kernels
                    .iter()
                    .map(|k| format!("<{:?}|rho|{:?}>", k.request.n, k.request.m))
                    .collect();
                Error::QuadratureNonConvergence {
                    context: format!("{context}, x = {x}, requests {}", names.join(" ")),
                    error,
                    tolerance,
                }
            }
            other => other,
        })
    }

    /// Writes every kernel's value at `x` into `out`.
    pub fn evaluate(&self, x: f64, setting: &PairSetting, out: &mut [Complex64]) -> Result<f64> {
        let m = self.moments(x)?;
        for (slot, k) in out.iter_mut().zip(&self.kernels) {
            *slot = k.evaluate_with(&m, setting);
        }
        Ok(m.error)
    }
}

/// Kernel for ⟨n|ρ|m⟩ on one pair at outcome `x`.
pub fn matrix_element_kernel(x: f64, setting: &PairSetting, request: PairRequest, eta: f64) -> Result<KernelValue> {
    PairKernel::new(request, eta)?.evaluate(x, setting)
}

/// Operator on a few modes as a sparse list of |row⟩⟨col| entries.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FockOperator {
    modes: usize,
    entries: Vec<(Vec<u8>, Vec<u8>, Complex64)>,
}

impl FockOperator {
    pub fn zero(modes: usize) -> Self {
        Self {
            modes,
            entries: Vec::new(),
        }
    }

    /// |row⟩⟨col|
    pub fn outer(row: &[u8], col: &[u8]) -> Self {
        assert_eq!(row.len(), col.len());
        Self {
            modes: row.len(),
            entries: vec![(row.to_vec(), col.to_vec(), Complex64::new(1.0, 0.0))],
        }
    }

    pub fn add(mut self, row: &[u8], col: &[u8], value: Complex64) -> Self {
        assert!(row.len() == self.modes && col.len() == self.modes);
        self.entries.push((row.to_vec(), col.to_vec(), value));
        self
    }

    pub fn modes(&self) -> usize {
        self.modes
    }
}

/// ⟨c| e^{−iσ z* a†} e^{−iσ z a} |r⟩ for one mode with z = e^{−iψ} u.
fn normal_ordered_element(c: u8, r: u8, sigma: f64, z: Complex64) -> Complex64 {
    let (c, r) = (u32::from(c), u32::from(r));
    let down = Complex64::new(0.0, -sigma) * z;
    let up = Complex64::new(0.0, -sigma) * z.conj();
    let mut acc = Complex64::new(0.0, 0.0);
    // j photons removed, i = c − r + j added.
    for j in 0..=r {
        let i = c as i64 - r as i64 + j as i64;
        if i < 0 {
            continue;
        }
        let i = i as u32;
        let k = r - j;
        let amp = (factorial(r) / factorial(k)).sqrt() / factorial(j) * (factorial(k + i) / factorial(k)).sqrt()
            / factorial(i);
        acc += down.powu(j) * up.powu(i) * amp;
    }
    acc
}

/// Detector angles for M + 1 combined modes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeWeights {
    pub u: Vec<f64>,
    pub psi: Vec<f64>,
}

impl From<&PairSetting> for ModeWeights {
    fn from(s: &PairSetting) -> Self {
        Self {
            u: vec![s.u_o(), s.u_e()],
            psi: vec![s.psi_o, s.psi_e],
        }
    }
}

/// Generic kernel for an arbitrary truncated operator, evaluated directly
/// from the normal-ordered trace at each quadrature node.
///
/// Uses composite Gauss–Legendre in s (a different node family from the
/// moment path). Convergence is checked by comparing against a rule with
/// twice as many panels.
pub fn generic_operator_kernel(op: &FockOperator, x: f64, weights: &ModeWeights, eta: f64) -> Result<KernelValue> {
    let kappa = kappa(eta)?;
    let modes = op.modes();
    if modes == 0 || weights.u.len() != modes || weights.psi.len() != modes {
        return Err(Error::InvalidParameter("mode weights do not match the operator".into()));
    }
    let norm: f64 = weights.u.iter().map(|u| u * u).sum();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!("Σu² = {norm} ≠ 1")));
    }
    let m = modes - 1;
    let z: Vec<Complex64> = weights
        .u
        .iter()
        .zip(&weights.psi)
        .map(|(&u, &p)| Complex64::from_polar(u, -p))
        .collect();
    let photons = op
        .entries
        .iter()
        .map(|(r, c, _)| r.iter().chain(c).map(|&n| u32::from(n)).sum::<u32>())
        .max()
        .unwrap_or(0);
    let prefactor = kappa.powi(modes as i32) / factorial(m as u32);
    // |⟨c|N|r⟩| is a polynomial in σ = √κ s of degree ≤ (photons in r and c)
    // with coefficients below photons!; this bounds the dropped tail.
    let op_norm: f64 = op.entries.iter().map(|(_, _, v)| v.norm()).sum();
    let tail_weights: Vec<f64> = (0..=2 * m + 1 + photons as usize)
        .map(|k| match k.checked_sub(2 * m + 1) {
            Some(j) => {
                2.0 * op_norm
                    * crate::special::binomial(photons, j as u32)
                    * kappa.powf(j as f64 / 2.0)
                    * factorial(photons)
            }
            None => 0.0,
        })
        .collect();
    let limit = truncation_limit(&tail_weights, BASE_LIMIT, 1e-13);
    let b = 2.0 * kappa.sqrt() * x;
    let integrand = |s: f64| -> Complex64 {
        let sigma = kappa.sqrt() * s;
        let trace: Complex64 = op
            .entries
            .iter()
            .map(|(row, col, v)| {
                // Tr{|r⟩⟨c| N} = ⟨c|N|r⟩
                let mut e = *v;
                for l in 0..modes {
                    e *= normal_ordered_element(col[l], row[l], sigma, z[l]);
                }
                e
            })
            .sum();
        trace * Complex64::from_polar(2.0 * s.powi(2 * m as i32 + 1) * (-s * s).exp(), b * s)
    };
    let rule = |panels: usize| -> Complex64 {
        let width = limit / panels as f64;
        (0..panels)
            .flat_map(|p| gauss_legendre_on(16, width * p as f64, width * (p + 1) as f64))
            .map(|(s, w)| integrand(s) * w)
            .sum()
    };
    let coarse = rule(24);
    let fine = rule(48);
    let error = (fine - coarse).norm() * prefactor;
    if error > 1e-9 {
        return Err(Error::QuadratureNonConvergence {
            context: "generic operator kernel".into(),
            error,
            tolerance: 1e-9,
        });
    }
    Ok(KernelValue {
        value: fine * prefactor,
        error,
    })
}

/// Mean and block standard errors of a complex estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: Complex64,
    pub stderr_re: f64,
    pub stderr_im: f64,
}

/// Averages the product-of-pairs estimator of each request over `samples`,
/// with standard errors from `blocks` contiguous blocks.
pub fn estimator_average(
    samples: &[HomodyneSample],
    requests: &[KernelRequest],
    blocks: usize,
) -> Result<Vec<Estimate>> {
    let ranges = block_ranges(samples.len(), blocks)?;
    let mut out = Vec::with_capacity(requests.len());
    for req in requests {
        if req.pairs.len() != 3 {
            return Err(Error::InvalidParameter(
                "requests must cover the three detectors".into(),
            ));
        }
        let sets: Vec<PairKernelSet> = req
            .pairs
            .iter()
            .map(|p| PairKernelSet::new(&[*p], req.eta))
            .collect::<Result<_>>()?;
        let mut block_re = Vec::with_capacity(blocks);
        let mut block_im = Vec::with_capacity(blocks);
        let mut sizes = Vec::with_capacity(blocks);
        for r in &ranges {
            let mut acc = Complex64::new(0.0, 0.0);
            for s in &samples[r.clone()] {
                if s.eta != req.eta {
                    return Err(Error::InvalidParameter(
                        "sample efficiency differs from the request".into(),
                    ));
                }
                let mut prod = Complex64::new(1.0, 0.0);
                for (j, set) in sets.iter().enumerate() {
                    let mut v = [Complex64::new(0.0, 0.0)];
                    set.evaluate(s.x[j], &s.settings.pairs[j], &mut v)?;
                    prod *= v[0];
                }
                acc += prod;
            }
            let n = r.len() as f64;
            block_re.push(acc.re / n);
            block_im.push(acc.im / n);
            sizes.push(r.len());
        }
        let re = block_estimate(&block_re, &sizes);
        let im = block_estimate(&block_im, &sizes);
        out.push(Estimate {
            mean: Complex64::new(re.mean, im.mean),
            stderr_re: re.stderr,
            stderr_im: im.stderr,
        });
    }
    Ok(out)
}

/// Deterministic average of the single-pair kernel against the homodyne
/// density: Gauss–Legendre over w = sin²θ, trapezoid over each phase and
/// adaptive quadrature over x. Returns one value per request; for an
/// unbiased estimator these are the exact ⟨n|ρ|m⟩.
///
/// `ensemble` must live on a single polarization pair.
pub fn quadrature_average(ensemble: &MixedEnsemble, requests: &[PairRequest], eta: f64) -> Result<Vec<Complex64>> {
    const THETA_NODES: usize = 12;
    const PHASE_NODES: usize = 8;
    if ensemble.layout().pairs().len() != 1 {
        return Err(Error::InvalidParameter(
            "quadrature average needs a single-pair ensemble".into(),
        ));
    }
    let set = PairKernelSet::new(requests, eta)?;
    // (setting, weight, density)
    let mut nodes = Vec::with_capacity(THETA_NODES * PHASE_NODES * PHASE_NODES);
    for (w_sin2, gw) in gauss_legendre_on(THETA_NODES, 0.0, 1.0) {
        for i in 0..PHASE_NODES {
            for j in 0..PHASE_NODES {
                let setting = PairSetting {
                    theta: w_sin2.sqrt().asin(),
                    psi_o: TAU * i as f64 / PHASE_NODES as f64,
                    psi_e: TAU * j as f64 / PHASE_NODES as f64,
                };
                let density = JointDensity::new(ensemble, &[setting], eta)?;
                nodes.push((setting, gw / (PHASE_NODES * PHASE_NODES) as f64, density));
            }
        }
    }
    let sd = (0.25 / eta).sqrt();
    let mut failure = None;
    let dim = requests.len();
    let result = integrate_vec(
        |x, out| {
            out.iter_mut().for_each(|o| *o = Complex64::new(0.0, 0.0));
            let m = match set.moments(x) {
                Ok(m) => m,
                Err(e) => {
                    failure.get_or_insert(e);
                    return;
                }
            };
            for (setting, w, density) in &nodes {
                let p = density.pdf(&[x]) * w;
                for (slot, k) in out.iter_mut().zip(set.kernels()) {
                    *slot += k.evaluate_with(&m, setting) * p;
                }
            }
        },
        -10.0 * sd,
        10.0 * sd,
        dim,
        &AdaptiveOptions {
            abs_tol: 1e-9,
            initial_panels: 8,
            ..Default::default()
        },
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(result.values)
}

/// Exact ⟨n|ρ|m⟩ of a single-pair ensemble.
pub fn exact_pair_element(ensemble: &MixedEnsemble, request: PairRequest) -> Result<Complex64> {
    let layout = ensemble.layout().clone();
    let pair = layout.pairs()[0];
    let occ = |v: [u8; 2]| {
        Occupation::VACUUM
            .with(pair.ordinary, v[0])
            .with(pair.extraordinary, v[1])
    };
    let row = crate::fock::PureKet::from_terms(layout.clone(), [(occ(request.n), Complex64::new(1.0, 0.0))])?;
    let col = crate::fock::PureKet::from_terms(layout, [(occ(request.m), Complex64::new(1.0, 0.0))])?;
    ensemble.matrix_element(&row, &col)
}

/// All requests ⟨n|ρ|m⟩ with n, m in the vacuum and one-photon sector of a
/// pair.
pub fn single_photon_sector_requests() -> Vec<PairRequest> {
    let basis = [[0u8, 0u8], [1, 0], [0, 1]];
    basis
        .iter()
        .flat_map(|&n| basis.iter().map(move |&m| PairRequest { n, m }))
        .collect()
}
