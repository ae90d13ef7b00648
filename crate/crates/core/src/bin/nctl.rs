use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use neutral_control::report::{
    analyze, choose_transform, report, steer, AnalyzeOptions, SteerOptions, EXIT_CONTROLLABLE,
    EXIT_NOT_CONTROLLABLE, EXIT_USAGE,
};
use neutral_control::simulate::{simulate, ControlInput, SampledControl};
use neutral_control::spectral::{compute_spectrum, SpectrumWindow};
use neutral_control::state::{M2State, DEFAULT_GRID};
use neutral_control::system::NeutralSystem;
use neutral_control::{c64, canonical, Error, Result};

#[derive(Parser)]
#[command(name = "nctl", version, about = "Exact controllability and steering of neutral delay systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct WindowArgs {
    /// Largest branch index |k| of the spectral window.
    #[arg(long, default_value_t = 5)]
    kmax: usize,
    /// Extra width of the real strip searched for exceptional roots.
    #[arg(long, default_value_t = 2.0)]
    strip_margin: f64,
    /// Circle radius scale for root certification.
    #[arg(long, default_value_t = 1.0)]
    radius_scale: f64,
    /// Assigned spectrum of A₋₁ + BP, comma separated (default: natural
    /// Frobenius spectrum when admissible, else 2..n+1).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    spectrum: Option<Vec<f64>>,
}

impl WindowArgs {
    fn window(&self) -> SpectrumWindow {
        SpectrumWindow {
            k_max: self.kmax,
            radius_scale: self.radius_scale,
            strip_margin: self.strip_margin,
        }
    }

    fn options(&self) -> AnalyzeOptions {
        AnalyzeOptions {
            window: self.window(),
            spectrum: self.targets(),
        }
    }

    fn targets(&self) -> Option<Vec<c64>> {
        self.spectrum.as_ref().map(|v| v.iter().map(|&x| c64::new(x, 0.0)).collect())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Controllability verdict, witnesses and critical time.
    Analyze {
        system: PathBuf,
        #[command(flatten)]
        window: WindowArgs,
        /// Directory for analysis.json (stdout otherwise).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Characteristic roots with eigenvector normalization as CSV.
    Spectrum {
        system: PathBuf,
        #[command(flatten)]
        window: WindowArgs,
        /// Compute the spectrum of the Frobenius-transformed system.
        #[arg(long)]
        transformed: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Least-norm steering control from the zero state to a target state.
    Steer {
        system: PathBuf,
        target: PathBuf,
        /// Steering time.
        #[arg(long)]
        time: f64,
        #[command(flatten)]
        window: WindowArgs,
        /// Simulation steps per delay.
        #[arg(long, default_value_t = 400)]
        grid: usize,
        /// Proceed when the time is not above the critical time.
        #[arg(long)]
        allow_subcritical: bool,
        /// Tikhonov term added to the Gram matrix.
        #[arg(long, default_value_t = 0.0)]
        regularization: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate the system from zero history under a sampled control.
    Simulate {
        system: PathBuf,
        control: PathBuf,
        #[arg(long)]
        time: f64,
        #[arg(long, default_value_t = DEFAULT_GRID)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analysis, spectrum and Gram conditioning in one record.
    Report {
        system: PathBuf,
        #[command(flatten)]
        window: WindowArgs,
        /// Horizons of the conditioning table (default: multiples of the
        /// critical time).
        #[arg(long, value_delimiter = ',')]
        horizons: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(out: Option<&Path>, name: &str, text: &str) -> Result<()> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join(name), text)?;
        }
        None => print!("{text}{}", if text.ends_with('\n') { "" } else { "\n" }),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Analyze { system, window, out } => {
            let sys = NeutralSystem::load(&system)?;
            let a = analyze(&sys, &window.options())?;
            emit(out.as_deref(), "analysis.json", &a.report.to_json())?;
            Ok(a.report.verdict.exit_code())
        }
        Command::Spectrum {
            system,
            window,
            transformed,
            out,
        } => {
            let mut sys = NeutralSystem::load(&system)?;
            if transformed {
                let t = choose_transform(&sys, window.targets().as_deref()).map_err(|e| e.at("canonical-transform"))?;
                sys = canonical::apply_transform(&sys, &t)?.0;
            }
            let sp = compute_spectrum(&sys, &window.window()).map_err(|e| e.at("spectral"))?;
            emit(out.as_deref(), "spectrum.csv", &sp.to_csv())?;
            if !sp.complete() {
                eprintln!(
                    "warning: {} uncertified grid points{}",
                    sp.uncertified.len(),
                    sp.scan_error.as_deref().map(|e| format!("; scan: {e}")).unwrap_or_default()
                );
            }
            Ok(EXIT_CONTROLLABLE)
        }
        Command::Steer {
            system,
            target,
            time,
            window,
            grid,
            allow_subcritical,
            regularization,
            out,
        } => {
            let sys = NeutralSystem::load(&system)?;
            let target = M2State::from_json(&fs::read_to_string(&target)?, sys.n())?;
            let o = steer(
                &sys,
                &target,
                &SteerOptions {
                    horizon: time,
                    window: window.window(),
                    grid,
                    allow_subcritical,
                    regularization,
                    spectrum: window.targets(),
                    ..SteerOptions::default()
                },
            )?;
            for w in &o.verification.warnings {
                eprintln!("warning: {w}");
            }
            let out = out.as_deref();
            if out.is_some() {
                emit(out, "control.csv", &o.control.to_csv(grid_steps(time, sys.delay_h, grid), sys.delay_h))?;
                emit(out, "trajectory.csv", &o.trajectory.to_csv(sys.delay_h))?;
                emit(out, "moments.json", &o.moment_report_json())?;
                emit(out, "terminal.json", &o.terminal.to_json())?;
            }
            emit(out, "verification.json", &o.verification_json())?;
            Ok(EXIT_CONTROLLABLE)
        }
        Command::Simulate {
            system,
            control,
            time,
            grid,
            out,
        } => {
            let sys = NeutralSystem::load(&system)?;
            let raw = SampledControl::from_csv(&fs::read_to_string(&control)?)?;
            // to the unit-delay time scale: ũ(s) = h u(h s)
            let h = sys.delay_h;
            let scaled = SampledControl::new(
                raw.times.iter().map(|t| t / h).collect(),
                raw.values.iter().map(|v| v * c64::new(h, 0.0)).collect(),
            )?;
            let tr = simulate(&sys, ControlInput::Sampled(&scaled), time / h, grid).map_err(|e| e.at("simulate"))?;
            let out = out.as_deref();
            if out.is_some() {
                emit(out, "terminal.json", &tr.terminal_state(&sys, grid)?.to_json())?;
            }
            emit(out, "trajectory.csv", &tr.to_csv(h))?;
            Ok(EXIT_CONTROLLABLE)
        }
        Command::Report {
            system,
            window,
            horizons,
            out,
        } => {
            let sys = NeutralSystem::load(&system)?;
            let (record, spectrum) = report(&sys, &window.options(), horizons.as_deref())?;
            if let (Some(dir), Some(sp)) = (out.as_deref(), &spectrum) {
                emit(Some(dir), "spectrum.csv", &sp.to_csv())?;
            }
            emit(out.as_deref(), "report.json", &record.to_json())?;
            Ok(record.analysis.verdict.exit_code())
        }
    }
}

/// Control samples for the CSV: one per simulation step.
fn grid_steps(time: f64, h: f64, grid: usize) -> usize {
    ((time / h) * grid as f64).round().max(1.0) as usize
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Stage { source, .. } => exit_code(source),
        Error::NotControllable(_) | Error::Uncontrollable { .. } | Error::UncontrollableZero => EXIT_NOT_CONTROLLABLE,
        _ => EXIT_USAGE,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
