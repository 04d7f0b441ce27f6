//! Joint quadrature statistics of multimode homodyne detection and an exact
//! sampler for them.
//!
//! Each detector mixes one polarization pair `(o, e)` into the measured mode
//! A = e^{−iψ_o} cos θ a_o + e^{−iψ_e} sin θ a_e and records X = (A + A†)/2.
//! For states with finitely many photons the joint density at unit
//! efficiency is a real polynomial times Π N(x_j; 0, 1/4); Gaussian smearing
//! keeps that form, with variance 1/(4η). Marginals, conditionals and CDFs
//! therefore reduce to Gaussian moments, which is what the sampler uses.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{expand_photons, MixedEnsemble, ModeMatrix, Occupation, PureKet};
use crate::special::{binomial, gaussian_moment, normal_cdf, normal_pdf, wavefunction_poly};

/// Detector angles for one polarization pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairSetting {
    pub theta: f64,
    pub psi_o: f64,
    pub psi_e: f64,
}

impl PairSetting {
    pub fn u_o(&self) -> f64 {
        self.theta.cos()
    }

    pub fn u_e(&self) -> f64 {
        self.theta.sin()
    }

    /// Rows are the measured mode A and its orthogonal complement B in terms
    /// of `(a_o, a_e)`. Used as the mode map a_l† → Σ_r V_{rl} (A, B)_r†.
    pub fn basis_change(&self) -> ModeMatrix {
        let (c, s) = (self.u_o(), self.u_e());
        ModeMatrix::pair(
            Complex64::from_polar(c, -self.psi_o),
            Complex64::from_polar(s, -self.psi_e),
            -Complex64::from_polar(s, self.psi_e),
            Complex64::from_polar(c, self.psi_o),
        )
    }
}

/// Settings of the three detectors `a`, `b`, `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorSettings {
    pub pairs: [PairSetting; 3],
}

/// One pair's angles drawn from the tomographic measure: ψ uniform on
/// [0, 2π) and θ with density 2 sin θ cos θ on [0, π/2].
pub fn draw_pair_setting<R: Rng + ?Sized>(rng: &mut R) -> PairSetting {
    let u: f64 = rng.gen();
    PairSetting {
        theta: u.sqrt().asin(),
        psi_o: TAU * rng.gen::<f64>(),
        psi_e: TAU * rng.gen::<f64>(),
    }
}

pub fn draw_settings<R: Rng + ?Sized>(rng: &mut R) -> DetectorSettings {
    DetectorSettings {
        pairs: [draw_pair_setting(rng), draw_pair_setting(rng), draw_pair_setting(rng)],
    }
}

/// One simulated measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomodyneSample {
    pub x: [f64; 3],
    pub settings: DetectorSettings,
    pub eta: f64,
}

/// Largest photon number that may end up in a measured mode.
pub const MAX_MEASURED_PHOTONS: u8 = 6;

/// Density Q(y) Π_j N(y_j; 0, var) with Q a real polynomial stored densely,
/// `stride` coefficients per variable, variable 0 fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussPoly {
    nvars: usize,
    stride: usize,
    coeffs: Vec<f64>,
    var: f64,
}

impl GaussPoly {
    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn variance(&self) -> f64 {
        self.var
    }

    pub fn degree(&self) -> usize {
        self.stride - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    fn index_digits(&self, mut idx: usize, digits: &mut [usize]) {
        for d in digits.iter_mut() {
            *d = idx % self.stride;
            idx /= self.stride;
        }
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        assert_eq!(y.len(), self.nvars);
        let powers: Vec<Vec<f64>> = y.iter().map(|&v| powers(v, self.stride)).collect();
        let mut digits = vec![0; self.nvars];
        let mut q = 0.0;
        for (idx, c) in self.coeffs.iter().enumerate() {
            if *c == 0.0 {
                continue;
            }
            self.index_digits(idx, &mut digits);
            q += c * digits.iter().zip(&powers).map(|(&k, p)| p[k]).product::<f64>();
        }
        q * y.iter().map(|&v| normal_pdf(v, self.var)).product::<f64>()
    }

    /// ∫ density over all variables.
    pub fn total_mass(&self) -> f64 {
        let m = moments(self.var, self.stride);
        let mut digits = vec![0; self.nvars];
        let mut total = 0.0;
        for (idx, c) in self.coeffs.iter().enumerate() {
            self.index_digits(idx, &mut digits);
            total += c * digits.iter().map(|&k| m[k]).product::<f64>();
        }
        total
    }

    /// Convolution of every variable with N(0, extra_var).
    ///
    /// The product N(x; 0, S²) N(y − x; 0, v) equals N(y; 0, S² + v) times a
    /// normal in x with mean r y and variance r v, r = S²/(S² + v); each x^k
    /// becomes the corresponding Gaussian moment, a polynomial in y.
    pub fn convolve(&self, extra_var: f64) -> GaussPoly {
        assert!(extra_var >= 0.0);
        if extra_var == 0.0 {
            return self.clone();
        }
        let new_var = self.var + extra_var;
        let r = self.var / new_var;
        let sd = (r * extra_var).sqrt();
        let d = self.stride;
        // map[k][m]: coefficient of y^m in E[(r y + sd Z)^k].
        let mut map = vec![vec![0.0; d]; d];
        for (k, row) in map.iter_mut().enumerate() {
            for i in (0..=k).step_by(2) {
                row[k - i] = binomial(k as u32, i as u32)
                    * r.powi((k - i) as i32)
                    * sd.powi(i as i32)
                    * gaussian_moment(i as u32);
            }
        }
        let mut coeffs = self.coeffs.clone();
        for axis in 0..self.nvars {
            coeffs = apply_along_axis(&coeffs, self.stride, axis, &map);
        }
        GaussPoly {
            nvars: self.nvars,
            stride: self.stride,
            coeffs,
            var: new_var,
        }
    }

    /// Unnormalized one-dimensional density of variable `free` with the
    /// variables in `fixed` (index, value) held fixed and every other
    /// variable integrated out. Returns polynomial coefficients in the free
    /// variable; the Gaussian factor N(y; 0, var) is implied.
    pub fn slice(&self, free: usize, fixed: &[(usize, f64)]) -> Vec<f64> {
        let m = moments(self.var, self.stride);
        let mut weights: Vec<Vec<f64>> = vec![m; self.nvars];
        for &(i, v) in fixed {
            assert_ne!(i, free);
            // The fixed variable's Gaussian factor is a common constant.
            weights[i] = powers(v, self.stride);
        }
        let mut out = vec![0.0; self.stride];
        let mut digits = vec![0; self.nvars];
        for (idx, c) in self.coeffs.iter().enumerate() {
            if *c == 0.0 {
                continue;
            }
            self.index_digits(idx, &mut digits);
            let mut w = *c;
            for (j, &k) in digits.iter().enumerate() {
                if j != free {
                    w *= weights[j][k];
                }
            }
            out[digits[free]] += w;
        }
        out
    }
}

fn powers(x: f64, n: usize) -> Vec<f64> {
    let mut p = Vec::with_capacity(n);
    let mut acc = 1.0;
    for _ in 0..n {
        p.push(acc);
        acc *= x;
    }
    p
}

/// E[y^k] for y ~ N(0, var), k < n.
fn moments(var: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| gaussian_moment(k as u32) * var.powf(k as f64 / 2.0))
        .collect()
}

fn apply_along_axis(coeffs: &[f64], stride: usize, axis: usize, map: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; coeffs.len()];
    let step = stride.pow(axis as u32);
    for (idx, &c) in coeffs.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let k = (idx / step) % stride;
        let base = idx - k * step;
        for (m, &f) in map[k].iter().enumerate() {
            if f != 0.0 {
                out[base + m * step] += c * f;
            }
        }
    }
    out
}

/// Expansion of each pair's photons in the rotated (A, B) basis.
type PairExpansion = Vec<(u8, u8, Complex64)>;

/// The unit-efficiency density of one pure ket.
fn pure_density(
    ket: &PureKet,
    vmats: &[ModeMatrix],
    pair_modes: &[(usize, usize)],
    stride_a: usize,
) -> Result<GaussPoly> {
    let nvars = pair_modes.len();
    let amp_len = stride_a.pow(nvars as u32);
    let h: Vec<Vec<f64>> = (0..stride_a).map(|n| wavefunction_poly(n as u32)).collect();
    let mut cache: BTreeMap<(usize, u8, u8), PairExpansion> = BTreeMap::new();
    // B-sector key → amplitude polynomial in the measured variables.
    let mut sectors: BTreeMap<Occupation, Vec<Complex64>> = BTreeMap::new();
    let mut digits = vec![0usize; nvars];
    for (occ, amp) in ket.iter() {
        let mut key = occ;
        let mut expansions: Vec<&PairExpansion> = Vec::with_capacity(nvars);
        for (j, &(o, e)) in pair_modes.iter().enumerate() {
            let (n_o, n_e) = (occ.get(o), occ.get(e));
            key = key.with(o, 0).with(e, 0);
            cache.entry((j, n_o, n_e)).or_insert_with(|| {
                expand_photons(&[n_o, n_e], &vmats[j])
                    .into_iter()
                    .map(|(local, c)| (local.get(0), local.get(1), c))
                    .collect()
            });
        }
        for (j, &(n_o_idx, n_e_idx)) in pair_modes.iter().enumerate() {
            expansions.push(&cache[&(j, occ.get(n_o_idx), occ.get(n_e_idx))]);
        }
        // Cartesian product over pairs.
        let mut choice = vec![0usize; nvars];
        'outer: loop {
            let mut coef = amp;
            let mut sector = key;
            for j in 0..nvars {
                let (n_a, n_b, c) = expansions[j][choice[j]];
                if n_a as usize >= stride_a {
                    return Err(Error::CutoffOverflow {
                        mode: format!("measured mode of pair {j}"),
                        count: u32::from(n_a),
                        n_max: MAX_MEASURED_PHOTONS,
                    });
                }
                coef *= c;
                digits[j] = n_a as usize;
                sector = sector.with(pair_modes[j].1, n_b);
            }
            let poly = sectors
                .entry(sector)
                .or_insert_with(|| vec![Complex64::new(0.0, 0.0); amp_len]);
            add_outer_product(poly, &h, &digits, stride_a, coef);
            for j in 0..nvars {
                choice[j] += 1;
                if choice[j] < expansions[j].len() {
                    continue 'outer;
                }
                choice[j] = 0;
            }
            break;
        }
    }
    // Σ_sectors |poly|², degree doubles per variable.
    let stride = 2 * stride_a - 1;
    let mut coeffs = vec![0.0; stride.pow(nvars as u32)];
    let mut da = vec![0usize; nvars];
    let mut db = vec![0usize; nvars];
    for poly in sectors.values() {
        let nz: Vec<(usize, Complex64)> = poly
            .iter()
            .enumerate()
            .filter(|(_, c)| c.norm_sqr() != 0.0)
            .map(|(i, c)| (i, *c))
            .collect();
        for &(i, ci) in &nz {
            split_index(i, stride_a, &mut da);
            for &(k, ck) in &nz {
                split_index(k, stride_a, &mut db);
                let prod = (ci * ck.conj()).re;
                let target = da.iter().zip(&db).rev().fold(0, |acc, (a, b)| acc * stride + a + b);
                coeffs[target] += prod;
            }
        }
    }
    Ok(GaussPoly {
        nvars,
        stride,
        coeffs,
        var: 0.25,
    })
}

fn split_index(mut idx: usize, stride: usize, digits: &mut [usize]) {
    for d in digits.iter_mut() {
        *d = idx % stride;
        idx /= stride;
    }
}

/// poly += coef · Π_j h_{n_j}(x_j).
fn add_outer_product(poly: &mut [Complex64], h: &[Vec<f64>], n: &[usize], stride: usize, coef: Complex64) {
    let nvars = n.len();
    let mut digits = vec![0usize; nvars];
    for (idx, slot) in poly.iter_mut().enumerate() {
        split_index(idx, stride, &mut digits);
        let mut f = 1.0;
        for j in 0..nvars {
            f *= h[n[j]].get(digits[j]).copied().unwrap_or(0.0);
            if f == 0.0 {
                break;
            }
        }
        if f != 0.0 {
            *slot += coef * f;
        }
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && eta <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidEfficiency { eta, range: "(0, 1]" })
    }
}

/// Joint density of the quadrature outcomes of every pair of an ensemble.
#[derive(Debug, Clone)]
pub struct JointDensity {
    components: Vec<(f64, GaussPoly)>,
}

impl JointDensity {
    /// `settings[j]` applies to the j-th polarization pair of the layout.
    /// Every mode of the layout must belong to a pair.
    pub fn new(ensemble: &MixedEnsemble, settings: &[PairSetting], eta: f64) -> Result<Self> {
        check_eta(eta)?;
        let layout = ensemble.layout();
        let pairs = layout.pairs();
        if pairs.len() != settings.len() {
            return Err(Error::InvalidParameter(format!(
                "{} detector settings for {} pairs",
                settings.len(),
                pairs.len()
            )));
        }
        if 2 * pairs.len() != layout.len() {
            return Err(Error::InvalidParameter(
                "homodyne density needs every mode in a polarization pair".into(),
            ));
        }
        let pair_modes: Vec<(usize, usize)> = pairs.iter().map(|p| (p.ordinary, p.extraordinary)).collect();
        let vmats: Vec<ModeMatrix> = settings.iter().map(PairSetting::basis_change).collect();
        let max_pair = ensemble
            .components()
            .iter()
            .flat_map(|(_, k)| k.iter())
            .flat_map(|(occ, _)| pair_modes.iter().map(move |&(o, e)| occ.get(o) + occ.get(e)))
            .max()
            .unwrap_or(0);
        if max_pair > MAX_MEASURED_PHOTONS {
            return Err(Error::CutoffOverflow {
                mode: "polarization pair".into(),
                count: u32::from(max_pair),
                n_max: MAX_MEASURED_PHOTONS,
            });
        }
        let stride_a = usize::from(max_pair) + 1;
        let smear = (1.0 - eta) / (4.0 * eta);
        let components = ensemble
            .components()
            .iter()
            .map(|(w, ket)| Ok((*w, pure_density(ket, &vmats, &pair_modes, stride_a)?.convolve(smear))))
            .collect::<Result<_>>()?;
        Ok(Self { components })
    }

    pub fn components(&self) -> &[(f64, GaussPoly)] {
        &self.components
    }

    pub fn nvars(&self) -> usize {
        self.components[0].1.nvars()
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        self.components.iter().map(|(w, g)| w * g.eval(x)).sum()
    }

    /// Draws one outcome per pair: a mixture component by weight, then each
    /// variable from its conditional given the ones already drawn.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut chosen = &self.components[self.components.len() - 1].1;
        for (w, g) in &self.components {
            acc += w;
            if u < acc {
                chosen = g;
                break;
            }
        }
        sample_sequential(chosen, rng, out);
    }
}

fn sample_sequential<R: Rng + ?Sized>(g: &GaussPoly, rng: &mut R, out: &mut [f64]) {
    let mut fixed: Vec<(usize, f64)> = Vec::with_capacity(g.nvars);
    for (j, slot) in out.iter_mut().enumerate().take(g.nvars) {
        let law = PolyNormal1d::new(g.slice(j, &fixed), g.var);
        let x = law.inverse_cdf(rng.gen());
        *slot = x;
        fixed.push((j, x));
    }
}

/// One-dimensional density q(y) N(y; 0, var) / Z with q ≥ 0 a polynomial.
#[derive(Debug, Clone)]
pub struct PolyNormal1d {
    coeffs: Vec<f64>,
    var: f64,
    sd: f64,
    norm: f64,
}

impl PolyNormal1d {
    pub fn new(coeffs: Vec<f64>, var: f64) -> Self {
        let norm: f64 = coeffs.iter().zip(moments(var, coeffs.len())).map(|(c, m)| c * m).sum();
        Self {
            sd: var.sqrt(),
            coeffs,
            var,
            norm,
        }
    }

    pub fn pdf(&self, y: f64) -> f64 {
        crate::special::eval_poly(&self.coeffs, y) * normal_pdf(y, self.var) / self.norm
    }

    /// Closed form: with I_k(y) = ∫_{−∞}^y t^k N(t) dt,
    /// I_0 = Φ(y/σ), I_1 = −σ² N(y), I_k = −σ² y^{k−1} N(y) + (k−1) σ² I_{k−2}.
    pub fn cdf(&self, y: f64) -> f64 {
        let n = normal_pdf(y, self.var);
        let mut ik = [normal_cdf(y / self.sd), -self.var * n];
        let mut total = self.coeffs[0] * ik[0];
        if self.coeffs.len() > 1 {
            total += self.coeffs[1] * ik[1];
        }
        let mut ypow = y; // y^{k−1}
        for k in 2..self.coeffs.len() {
            let next = -self.var * ypow * n + (k as f64 - 1.0) * self.var * ik[k % 2];
            ik[k % 2] = next;
            total += self.coeffs[k] * next;
            ypow *= y;
        }
        (total / self.norm).clamp(0.0, 1.0)
    }

    /// Solves F(y) = u by Newton steps safeguarded with bisection.
    pub fn inverse_cdf(&self, u: f64) -> f64 {
        let span = 14.0 * self.sd;
        let (mut lo, mut hi) = (-span, span);
        let mut y = 0.0;
        for _ in 0..200 {
            let f = self.cdf(y) - u;
            if f > 0.0 {
                hi = y;
            } else {
                lo = y;
            }
            let density = self.pdf(y);
            let mut next = if density > 0.0 { y - f / density } else { f64::NAN };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - y).abs() <= 1e-13 * self.sd.max(1.0) || hi - lo <= 1e-13 * self.sd {
                return next;
            }
            y = next;
        }
        y
    }
}

/// Joint density of the three outcomes at the given settings.
pub fn joint_pdf(ensemble: &MixedEnsemble, settings: &DetectorSettings, eta: f64, x: [f64; 3]) -> Result<f64> {
    Ok(JointDensity::new(ensemble, &settings.pairs, eta)?.pdf(&x))
}

/// Draws one outcome triple at fixed settings.
pub fn sample<R: Rng + ?Sized>(
    ensemble: &MixedEnsemble,
    settings: &DetectorSettings,
    eta: f64,
    rng: &mut R,
) -> Result<HomodyneSample> {
    let density = JointDensity::new(ensemble, &settings.pairs, eta)?;
    let mut x = [0.0; 3];
    density.sample_into(rng, &mut x);
    Ok(HomodyneSample {
        x,
        settings: *settings,
        eta,
    })
}

/// The vacuum density at efficiency η for one variable: N(0, 1/(4η)).
pub fn vacuum_variance(eta: f64) -> f64 {
    0.25 / eta
}
