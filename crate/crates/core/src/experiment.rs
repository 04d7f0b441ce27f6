//! Monte-Carlo reconstruction of the GHZ phase curve
//! C(φ) = ⟨φ|ρ|φ⟩, |φ⟩ = (|ooo⟩ + e^{iφ}|eee⟩)/√2.
//!
//! Each sample draws detector settings, a homodyne outcome triple and feeds
//! three product estimators: D_o for ⟨ooo|ρ|ooo⟩, D_e for ⟨eee|ρ|eee⟩ and
//! O for ⟨ooo|ρ|eee⟩. Every grid point reuses the same samples:
//! C(φ) = ½[Re D_o + Re D_e + 2 Re(e^{iφ} O)].

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{MixedEnsemble, ModeLayout, PureKet};
use crate::homodyne::{draw_settings, JointDensity};
use crate::kernel::{kappa, PairKernelSet, PairRequest};
use crate::source::{closed_form, herald, CrystalParams, D2Port};
use crate::stats::{block_estimate, block_ranges, BlockEstimate};

/// Default number of error-bar blocks.
pub const DEFAULT_BLOCKS: usize = 20;

/// Inclusive, evenly spaced φ grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiGrid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl PhiGrid {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.points - 1) as f64;
        (0..self.points).map(|i| self.start + step * i as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub crystal: CrystalParams,
    pub d2_port: D2Port,
    /// Homodyne efficiency.
    pub eta: f64,
    pub samples: usize,
    pub blocks: usize,
    pub seed: u64,
    pub grid: PhiGrid,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    /// χ = 0.3π, η = 0.85 with lossy heralding detectors, at a caller-chosen sample count.
    pub fn moderate_coupling(samples: usize) -> Self {
        Self {
            crystal: CrystalParams {
                gamma: 0.1,
                phi1: 0.0,
                chi: 0.3 * PI,
                phi_a: 0.0,
                phi_b: 0.0,
                eta1: 0.3,
                eta2: 0.3,
            },
            d2_port: D2Port::Ordinary,
            eta: 0.85,
            samples,
            blocks: DEFAULT_BLOCKS,
            seed: 1,
            grid: PhiGrid {
                start: 0.0,
                stop: 15.0 * PI / 8.0,
                points: 16,
            },
            output: None,
        }
    }

    /// As [`Self::moderate_coupling`] with χ = 0.4π, η = 0.9.
    pub fn strong_coupling(samples: usize) -> Self {
        let mut c = Self::moderate_coupling(samples);
        c.crystal.chi = 0.4 * PI;
        c.eta = 0.9;
        c
    }

    pub fn validate(&self) -> Result<()> {
        self.crystal.validate()?;
        if !(self.blocks >= 2 && self.samples >= self.blocks) {
            return Err(Error::InvalidConfig(format!(
                "N ≥ B ≥ 2 violated (N = {}, B = {})",
                self.samples, self.blocks
            )));
        }
        kappa(self.eta)
            .map_err(|_| Error::InvalidConfig(format!("homodyne efficiency {} outside (0.5, 1]", self.eta)))?;
        if self.grid.points == 0 {
            return Err(Error::InvalidConfig("φ grid is empty".into()));
        }
        if !(self.grid.start.is_finite() && self.grid.stop.is_finite()) {
            return Err(Error::InvalidConfig("φ grid bounds must be finite".into()));
        }
        Ok(())
    }

    /// Relative phase ϕ of the heralded GHZ component.
    pub fn ghz_phase(&self) -> f64 {
        self.crystal.ghz_phase() + self.d2_port.phase_offset()
    }
}

/// ½ p₁ [1 − cos(φ − ϕ)]
pub fn theoretical_c(config: &ExperimentConfig, phi: f64) -> f64 {
    let [p1, _, _] = closed_form::weights(config.crystal.chi, config.crystal.eta1);
    0.5 * p1 * (1.0 - (phi - config.ghz_phase()).cos())
}

/// |ooo⟩ and |eee⟩ on the signal layout.
pub fn ghz_basis(layout: Arc<ModeLayout>) -> Result<(PureKet, PureKet)> {
    Ok((
        PureKet::basis(layout.clone(), &[("a_o", 1), ("b_o", 1), ("c_o", 1)])?,
        PureKet::basis(layout, &[("a_e", 1), ("b_e", 1), ("c_e", 1)])?,
    ))
}

/// ⟨φ|ρ|φ⟩ by direct contraction.
pub fn oracle_c_for(ensemble: &MixedEnsemble, phi: f64) -> Result<f64> {
    let (ooo, eee) = ghz_basis(ensemble.layout().clone())?;
    let projector = ooo
        .plus(&eee.scaled(Complex64::from_polar(1.0, phi)))?
        .scaled(Complex64::new(FRAC_1_SQRT_2, 0.0));
    Ok(ensemble.matrix_element(&projector, &projector)?.re)
}

/// ⟨φ|ρ|φ⟩ with ρ built by the operational heralding pipeline.
pub fn oracle_c(config: &ExperimentConfig, phi: f64) -> Result<f64> {
    let out = herald(&config.crystal, config.d2_port, crate::fock::DEFAULT_N_MAX)?;
    oracle_c_for(&out.state, phi)
}

/// Options that do not change the result.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; 0 means one per available core.
    pub workers: usize,
    /// Replaces the heralded ensemble (testing hook).
    pub ensemble_override: Option<MixedEnsemble>,
}

/// Per-block means of the three estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
struct BlockSums {
    d_o: Complex64,
    d_e: Complex64,
    o: Complex64,
    len: usize,
}

/// A complex estimator with block standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexEstimate {
    pub mean: Complex64,
    pub stderr_re: f64,
    pub stderr_im: f64,
}

fn complex_estimate(values: &[Complex64], sizes: &[usize]) -> ComplexEstimate {
    let re: Vec<f64> = values.iter().map(|v| v.re).collect();
    let im: Vec<f64> = values.iter().map(|v| v.im).collect();
    let (re, im) = (block_estimate(&re, sizes), block_estimate(&im, sizes));
    ComplexEstimate {
        mean: Complex64::new(re.mean, im.mean),
        stderr_re: re.stderr,
        stderr_im: im.stderr,
    }
}

/// The three raw estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimators {
    pub d_o: ComplexEstimate,
    pub d_e: ComplexEstimate,
    pub o: ComplexEstimate,
}

/// Parameters of C_est(φ) = α + β cos(φ − δ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sinusoid {
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
}

impl Estimators {
    pub fn c(&self, phi: f64) -> f64 {
        c_from(self.d_o.mean, self.d_e.mean, self.o.mean, phi)
    }

    pub fn sinusoid(&self) -> Sinusoid {
        Sinusoid {
            alpha: 0.5 * (self.d_o.mean.re + self.d_e.mean.re),
            beta: self.o.mean.norm(),
            delta: -self.o.mean.arg(),
        }
    }
}

fn c_from(d_o: Complex64, d_e: Complex64, o: Complex64, phi: f64) -> f64 {
    0.5 * (d_o.re + d_e.re + 2.0 * (Complex64::from_polar(1.0, phi) * o).re)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResultRow {
    pub phi: f64,
    pub c_est: f64,
    pub c_err: f64,
    pub c_theory: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metadata {
    pub config: ExperimentConfig,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub p_phi: f64,
    pub p_rho: f64,
    pub ghz_phase: f64,
    pub wall_clock_secs: f64,
    /// Seconds since the Unix epoch when the run finished.
    pub finished_at: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
    pub estimators: Estimators,
    pub metadata: Metadata,
}

impl ResultTable {
    /// CSV with `#` metadata lines. The timestamp line (the only part that
    /// varies between identical runs) is optional.
    pub fn to_csv(&self, timestamp: bool) -> String {
        let m = &self.metadata;
        let c = &m.config;
        let mut s = String::new();
        let _ = writeln!(s, "# ghz-tomo C(phi) reconstruction");
        let _ = writeln!(s, "# seed = {}", c.seed);
        let _ = writeln!(s, "# samples = {}", c.samples);
        let _ = writeln!(s, "# blocks = {}", c.blocks);
        let _ = writeln!(s, "# eta = {}", c.eta);
        let _ = writeln!(s, "# gamma = {}", c.crystal.gamma);
        let _ = writeln!(s, "# chi_over_pi = {}", round_over_pi(c.crystal.chi));
        let _ = writeln!(s, "# phi1_over_pi = {}", round_over_pi(c.crystal.phi1));
        let _ = writeln!(s, "# phi_a_over_pi = {}", round_over_pi(c.crystal.phi_a));
        let _ = writeln!(s, "# phi_b_over_pi = {}", round_over_pi(c.crystal.phi_b));
        let _ = writeln!(s, "# eta1 = {}", c.crystal.eta1);
        let _ = writeln!(s, "# eta2 = {}", c.crystal.eta2);
        let port = match c.d2_port {
            D2Port::Ordinary => "ordinary",
            D2Port::Extraordinary => "extraordinary",
        };
        let _ = writeln!(s, "# d2_port = {port}");
        let _ = writeln!(s, "# ghz_phase = {}", m.ghz_phase);
        let _ = writeln!(s, "# p1 = {}", m.p1);
        let _ = writeln!(s, "# p2 = {}", m.p2);
        let _ = writeln!(s, "# p3 = {}", m.p3);
        let _ = writeln!(s, "# p_phi = {}", m.p_phi);
        let _ = writeln!(s, "# p_rho = {}", m.p_rho);
        let e = &self.estimators;
        for (name, est) in [("D_o", e.d_o), ("D_e", e.d_e), ("O", e.o)] {
            let _ = writeln!(
                s,
                "# {name} = {} {:+}i (stderr {} / {})",
                est.mean.re, est.mean.im, est.stderr_re, est.stderr_im
            );
        }
        if timestamp {
            let _ = writeln!(
                s,
                "# finished_unix = {} wall_clock_s = {:.3}",
                m.finished_at, m.wall_clock_secs
            );
        }
        let _ = writeln!(s, "phi,c_est,c_err,c_theory");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{}", r.phi, r.c_est, r.c_err, r.c_theory);
        }
        s
    }

    pub fn write_csv(&self, path: &Path, timestamp: bool) -> Result<()> {
        std::fs::write(path, self.to_csv(timestamp)).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

/// x/π rounded to 12 significant digits so echoed configs read cleanly.
fn round_over_pi(x: f64) -> f64 {
    let v = x / PI;
    if v == 0.0 {
        return 0.0;
    }
    let scale = 10f64.powi(11 - v.abs().log10().floor() as i32);
    (v * scale).round() / scale
}

/// The per-pair requests in estimator order D_o, D_e, O.
fn pair_requests() -> [PairRequest; 3] {
    [
        PairRequest::diagonal([1, 0]),
        PairRequest::diagonal([0, 1]),
        PairRequest { n: [1, 0], m: [0, 1] },
    ]
}

fn run_block(
    ensemble: &MixedEnsemble,
    kernels: &PairKernelSet,
    eta: f64,
    seed: u64,
    block: usize,
    len: usize,
) -> Result<BlockSums> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block as u64);
    let mut sums = [Complex64::new(0.0, 0.0); 3];
    let mut x = [0.0; 3];
    let mut values = [[Complex64::new(0.0, 0.0); 3]; 3];
    for _ in 0..len {
        let settings = draw_settings(&mut rng);
        let density = JointDensity::new(ensemble, &settings.pairs, eta)?;
        density.sample_into(&mut rng, &mut x);
        for j in 0..3 {
            kernels.evaluate(x[j], &settings.pairs[j], &mut values[j])?;
        }
        for (r, sum) in sums.iter_mut().enumerate() {
            *sum += values[0][r] * values[1][r] * values[2][r];
        }
    }
    let n = len as f64;
    Ok(BlockSums {
        d_o: sums[0] / n,
        d_e: sums[1] / n,
        o: sums[2] / n,
        len,
    })
}

pub fn run(config: &ExperimentConfig) -> Result<ResultTable> {
    run_with(config, &RunOptions::default())
}

/// Runs the experiment. Blocks use independent ChaCha streams of the master
/// seed and are merged in block order, so the output does not depend on the
/// number of workers.
pub fn run_with(config: &ExperimentConfig, options: &RunOptions) -> Result<ResultTable> {
    config.validate()?;
    let started = Instant::now();
    let heralded = herald(&config.crystal, config.d2_port, crate::fock::DEFAULT_N_MAX)?;
    let ensemble = options
        .ensemble_override
        .clone()
        .unwrap_or_else(|| heralded.state.clone());
    let kernels = PairKernelSet::new(&pair_requests(), config.eta)?;
    let ranges = block_ranges(config.samples, config.blocks)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let blocks: Vec<BlockSums> = pool.install(|| {
        ranges
            .par_iter()
            .enumerate()
            .map(|(b, r)| run_block(&ensemble, &kernels, config.eta, config.seed, b, r.len()))
            .collect::<Result<_>>()
    })?;
    let sizes: Vec<usize> = blocks.iter().map(|b| b.len).collect();
    let col = |f: fn(&BlockSums) -> Complex64| blocks.iter().map(f).collect::<Vec<_>>();
    let estimators = Estimators {
        d_o: complex_estimate(&col(|b| b.d_o), &sizes),
        d_e: complex_estimate(&col(|b| b.d_e), &sizes),
        o: complex_estimate(&col(|b| b.o), &sizes),
    };
    let rows = config
        .grid
        .values()
        .into_iter()
        .map(|phi| {
            let per_block: Vec<f64> = blocks.iter().map(|b| c_from(b.d_o, b.d_e, b.o, phi)).collect();
            let BlockEstimate { stderr, .. } = block_estimate(&per_block, &sizes);
            ResultRow {
                phi,
                c_est: estimators.c(phi),
                c_err: stderr,
                c_theory: theoretical_c(config, phi),
            }
        })
        .collect();
    let finished_at = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    Ok(ResultTable {
        rows,
        estimators,
        metadata: Metadata {
            config: config.clone(),
            p1: heralded.p1,
            p2: heralded.p2,
            p3: heralded.p3,
            p_phi: heralded.p_phi,
            p_rho: heralded.p_rho,
            ghz_phase: heralded.ghz_phase,
            wall_clock_secs: started.elapsed().as_secs_f64(),
            finished_at,
        },
    })
}
