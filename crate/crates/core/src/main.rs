use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use nvqpt::workbench::{cmd_qpt, cmd_ramsey, dt_from_env, run_selftest, RunConfig, SelftestOptions};
use nvqpt::Result;

#[derive(Parser)]
#[command(name = "nvqpt", version, about = "Spin dynamics, Ramsey fitting and process tomography across optical excitation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate and fit a Ramsey fringe.
    Ramsey(RunArgs),
    /// Simulate process tomography over a grid of delays.
    Qpt(RunArgs),
    /// Run the invariant suites of every module.
    Selftest {
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    noise: Option<Toggle>,
    /// Fraction of the transverse component kept through excitation.
    #[arg(long)]
    eta: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Toggle {
    On,
    Off,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        if let Some(noise) = self.noise {
            cfg.noise = matches!(noise, Toggle::On);
        }
        if let Some(eta) = self.eta {
            cfg.model.eta = eta;
        }
        cfg.apply_env()?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn list_files(files: &[PathBuf]) {
    for f in files {
        println!("wrote {}", f.display());
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Ramsey(args) => {
            let cfg = args.config()?;
            let out = cmd_ramsey(&cfg)?;
            let r = out.fit.report();
            println!(
                "tau* = {:.3} ± {:.3} ns, f = {:.5} GHz, A = {:.4} ± {:.4}, A(t_es=0) = {:.4} ± {:.4}, F(t_es=0) = {:.4} ± {:.4}, residual rms = {:.2e}",
                r.tau_star_ns,
                r.tau_star_sigma_ns,
                r.f_ghz,
                r.amplitude,
                r.amplitude_sigma,
                r.amplitude_at_excitation,
                r.amplitude_at_excitation_sigma,
                r.fidelity_at_excitation,
                r.fidelity_at_excitation_sigma,
                r.residual_rms
            );
            list_files(&out.files);
            Ok(true)
        }
        Command::Qpt(args) => {
            let cfg = args.config()?;
            let out = cmd_qpt(&cfg)?;
            for p in &out.curve.points {
                println!(
                    "t_es = {:.3} ns: F = {:.4} ± {:.4}, phi* = {:.2} ± {:.2} deg",
                    p.t_es_ns, p.fidelity, p.sigma_f, p.phi_deg, p.sigma_phi_deg
                );
            }
            match (out.curve.intercept, out.curve.intercept_sigma) {
                (Some(f0), Some(s)) => println!("F0 = {f0:.4} ± {s:.4} ({})", out.curve.extrapolation),
                (Some(f0), None) => println!("F0 = {f0:.4} ({})", out.curve.extrapolation),
                _ => println!("F0 not extrapolated (single delay)"),
            }
            list_files(&out.files);
            Ok(true)
        }
        Command::Selftest { seed } => {
            let mut opts = SelftestOptions::default();
            if let Some(seed) = seed {
                opts.seed = seed;
            }
            if let Some(dt) = dt_from_env()? {
                opts.dt_ns = dt;
            }
            let report = run_selftest(&opts);
            print!("{}", report.table());
            Ok(report.all_passed())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
