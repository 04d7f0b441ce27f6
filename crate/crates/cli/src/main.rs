use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ghz_tomo::config::load_config;
use ghz_tomo::experiment::{oracle_c, run_with, theoretical_c, ExperimentConfig, RunOptions};
use ghz_tomo::fock::format_ensemble_dump;
use ghz_tomo::homodyne::{draw_settings, sample, PairSetting};
use ghz_tomo::kernel::{generic_operator_kernel, kappa, matrix_element_kernel, FockOperator, ModeWeights, PairRequest};
use ghz_tomo::source::herald;
use ghz_tomo::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Environment variable overriding the number of worker threads.
const THREADS_VAR: &str = "GHZ_TOMO_THREADS";
const KERNEL_CHECK_TOL: f64 = 1e-8;

#[derive(Debug, Parser)]
#[command(
    name = "ghz-tomo",
    version,
    about = "Heralded GHZ source and homodyne tomography simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the Monte-Carlo reconstruction of C(phi) and write the CSV table.
    Simulate(RunArgs),
    /// Print theoretical and directly contracted C(phi) on the configured grid.
    Theory(ConfigArgs),
    /// Compare the pair kernel with the generic operator kernel at random points.
    KernelCheck(KernelCheckArgs),
    /// Dump the heralded ensemble, optionally followed by homodyne samples.
    SampleDump(RunArgs),
    /// Print the heralding probabilities and the GHZ phase.
    HeraldInfo(ConfigArgs),
}

#[derive(Debug, Args)]
struct ConfigArgs {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    #[arg(long, value_name = "N")]
    samples: Option<usize>,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Omit the timestamp line so identical runs give identical files.
    #[arg(long)]
    no_timestamp: bool,
}

#[derive(Debug, Args)]
struct KernelCheckArgs {
    #[arg(long)]
    eta: f64,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::QuadratureNonConvergence { .. } => 3,
            _ => 2,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => simulate(&args),
        Command::Theory(args) => theory(&args),
        Command::KernelCheck(args) => kernel_check(&args),
        Command::SampleDump(args) => sample_dump(&args),
        Command::HeraldInfo(args) => herald_info(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn workers() -> Result<usize, Failure> {
    match std::env::var(THREADS_VAR) {
        Ok(v) => v.trim().parse().map_err(|_| Failure {
            code: 2,
            message: format!("{THREADS_VAR} must be a non-negative integer, got `{v}`"),
        }),
        Err(_) => Ok(0),
    }
}

/// Loads the config and applies command-line overrides. The sample count
/// only overrides the run size when `run_samples` is set.
fn configure(args: &RunArgs, run_samples: bool) -> Result<ExperimentConfig, Failure> {
    let mut config = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let (true, Some(n)) = (run_samples, args.samples) {
        config.samples = n;
    }
    if let Some(out) = &args.out {
        config.output = Some(out.clone());
    }
    config.validate()?;
    Ok(config)
}

/// Fails early when the output directory does not exist.
fn check_output_dir(path: &Path) -> CliResult {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty());
    match parent {
        Some(dir) if !dir.is_dir() => Err(Error::Io {
            path: path.display().to_string(),
            message: format!("directory {} does not exist", dir.display()),
        }
        .into()),
        _ => Ok(()),
    }
}

fn emit(text: &str, out: Option<&Path>) -> CliResult {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| {
            Error::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            }
            .into()
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn simulate(args: &RunArgs) -> CliResult {
    let config = configure(args, true)?;
    if let Some(path) = &config.output {
        check_output_dir(path)?;
    }
    let options = RunOptions {
        workers: workers()?,
        ensemble_override: None,
    };
    let table = run_with(&config, &options)?;
    emit(&table.to_csv(!args.no_timestamp), config.output.as_deref())?;
    if let Some(path) = &config.output {
        eprintln!(
            "wrote {} rows to {} ({:.1} s)",
            table.rows.len(),
            path.display(),
            table.metadata.wall_clock_secs
        );
    }
    Ok(())
}

fn theory(args: &ConfigArgs) -> CliResult {
    let config = load_config(&args.config)?;
    let mut s = String::from("phi,c_theory,c_oracle\n");
    for phi in config.grid.values() {
        let _ = writeln!(s, "{phi},{},{}", theoretical_c(&config, phi), oracle_c(&config, phi)?);
    }
    emit(&s, None)
}

fn herald_info(args: &ConfigArgs) -> CliResult {
    let config = load_config(&args.config)?;
    let h = herald(&config.crystal, config.d2_port, ghz_tomo::fock::DEFAULT_N_MAX)?;
    println!("p1 = {:.7}", h.p1);
    println!("p2 = {:.7}", h.p2);
    println!("p3 = {:.7}", h.p3);
    println!("P_Phi = {:.7e}", h.p_phi);
    println!("P_rho = {:.7e}", h.p_rho);
    println!(
        "ghz_phase = {:.7} (= {:.7} pi)",
        config.ghz_phase(),
        config.ghz_phase() / PI
    );
    if h.ghz_phase != config.ghz_phase() {
        println!("ghz_phase_with_port = {:.7}", h.ghz_phase);
    }
    Ok(())
}

fn sample_dump(args: &RunArgs) -> CliResult {
    let config = configure(args, false)?;
    if let Some(path) = &config.output {
        check_output_dir(path)?;
    }
    let h = herald(&config.crystal, config.d2_port, ghz_tomo::fock::DEFAULT_N_MAX)?;
    let mut text = format_ensemble_dump(&h.state);
    if let Some(n) = args.samples {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let _ = writeln!(
            text,
            "# samples: eta {} seed {}; columns x, theta, psi_o, psi_e per detector a, b, c",
            config.eta, config.seed
        );
        for _ in 0..n {
            let settings = draw_settings(&mut rng);
            let s = sample(&h.state, &settings, config.eta, &mut rng)?;
            let _ = write!(text, "# sample");
            for (x, p) in s.x.iter().zip(&s.settings.pairs) {
                let _ = write!(text, " {x:.12e} {:.12e} {:.12e} {:.12e}", p.theta, p.psi_o, p.psi_e);
            }
            text.push('\n');
        }
    }
    emit(&text, config.output.as_deref())
}

fn random_pair_occupation(rng: &mut ChaCha8Rng) -> [u8; 2] {
    [rng.gen_range(0..=1), rng.gen_range(0..=1)]
}

fn kernel_check(args: &KernelCheckArgs) -> CliResult {
    kappa(args.eta).map_err(|e| Failure {
        code: 2,
        message: format!("kernel-check needs eta in (0.5, 1]: {e}"),
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut worst = (0.0f64, String::new());
    for _ in 0..args.trials {
        let x = rng.gen_range(-3.0..=3.0);
        let setting = PairSetting {
            theta: rng.gen_range(0.0..=FRAC_PI_2),
            psi_o: rng.gen_range(0.0..TAU),
            psi_e: rng.gen_range(0.0..TAU),
        };
        let request = PairRequest {
            n: random_pair_occupation(&mut rng),
            m: random_pair_occupation(&mut rng),
        };
        let pair = matrix_element_kernel(x, &setting, request, args.eta)?;
        // ⟨n|ρ|m⟩ is the expectation of |m⟩⟨n|.
        let op = FockOperator::outer(&request.m, &request.n);
        let generic = generic_operator_kernel(&op, x, &ModeWeights::from(&setting), args.eta)?;
        let dev = (pair.value - generic.value).norm();
        if dev >= worst.0 {
            worst = (
                dev,
                format!(
                    "<{:?}|rho|{:?}> at x = {x:.6}, theta = {:.6}, psi = ({:.6}, {:.6}): {} vs {}",
                    request.n, request.m, setting.theta, setting.psi_o, setting.psi_e, pair.value, generic.value
                ),
            );
        }
    }
    println!(
        "trials = {}, eta = {}, max deviation = {:.3e}",
        args.trials, args.eta, worst.0
    );
    if worst.0 >= KERNEL_CHECK_TOL {
        return Err(Failure {
            code: 4,
            message: format!("kernel mismatch above {KERNEL_CHECK_TOL:e}; worst case {}", worst.1),
        });
    }
    Ok(())
}
