//! Command-line front end.
//!
//! Exit codes: 0 success, 2 configuration error, 3 I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mqss_core::harness::{
    self, load_config, render_detect_report, render_run_report, render_sweep_report, write_text,
    ExperimentConfig,
};
use mqss_core::SimError;

#[derive(Parser)]
#[command(
    name = "mqss",
    about = "Three-party quantum secret sharing simulator: honest runs, Trojan-horse and intercept-resend adversaries, and the hardened protocol's detection statistics",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment: seeded protocol trials with pooled statistics.
    Run(RunArgs),
    /// Sweep the Trojan pulse size: printed formula vs enumeration oracle vs
    /// Monte Carlo misclassification frequency.
    Sweep(SweepArgs),
    /// Improved-protocol detection curves across Trojan pulse sizes.
    Detect(DetectArgs),
}

#[derive(Args, Default)]
struct CommonArgs {
    /// Flat `key = value` config file; flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_name = "original|improved")]
    protocol: Option<String>,
    #[arg(long, value_name = "none|trojan|eve")]
    attack: Option<String>,
    /// Photons per Trojan pulse.
    #[arg(long)]
    photons: Option<usize>,
    /// Pulses per protocol run.
    #[arg(long)]
    signals: Option<usize>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Sampling fraction for both agents' checks.
    #[arg(long = "sample-fraction")]
    sample_fraction: Option<f64>,
    /// Depth of Charlie's splitter-check tree.
    #[arg(long = "pns-depth")]
    pns_depth: Option<u32>,
    #[arg(long, value_name = "on|off")]
    decoys: Option<String>,
    #[arg(long, value_name = "json|csv")]
    format: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a sidecar file with full per-pulse transcripts.
    #[arg(long = "save-transcripts")]
    save_transcripts: bool,
    /// Message bits per run.
    #[arg(long = "msg-len")]
    msg_len: Option<usize>,
    #[arg(long = "error-threshold")]
    error_threshold: Option<f64>,
    #[arg(long = "multiphoton-threshold")]
    multiphoton_threshold: Option<f64>,
    /// Which hop the outside eavesdropper taps.
    #[arg(long = "eve-segment", value_name = "bob-charlie|charlie-alice|alice-charlie")]
    eve_segment: Option<String>,
    /// Whether the Trojan forwards one untouched photon per pulse.
    #[arg(long = "forward-one", value_name = "on|off")]
    forward_one: Option<String>,
    #[arg(long = "decoy-fraction")]
    decoy_fraction: Option<f64>,
    #[arg(long = "sc-fraction")]
    sc_fraction: Option<f64>,
    #[arg(long = "flip-probability")]
    flip_probability: Option<f64>,
}

impl CommonArgs {
    fn overrides(&self) -> Vec<(String, String)> {
        let mut entries = Vec::new();
        let mut push = |key: &str, value: Option<String>| {
            if let Some(v) = value {
                entries.push((key.to_string(), v));
            }
        };
        push("protocol", self.protocol.clone());
        push("attack", self.attack.clone());
        push("photons", self.photons.map(|v| v.to_string()));
        push("signals", self.signals.map(|v| v.to_string()));
        push("trials", self.trials.map(|v| v.to_string()));
        push("seed", self.seed.map(|v| v.to_string()));
        push("sample-fraction", self.sample_fraction.map(|v| v.to_string()));
        push("pns-depth", self.pns_depth.map(|v| v.to_string()));
        push("decoys", self.decoys.clone());
        push("format", self.format.clone());
        push("out", self.out.as_ref().map(|p| p.display().to_string()));
        if self.save_transcripts {
            push("save-transcripts", Some("on".to_string()));
        }
        push("msg-len", self.msg_len.map(|v| v.to_string()));
        push("error-threshold", self.error_threshold.map(|v| v.to_string()));
        push(
            "multiphoton-threshold",
            self.multiphoton_threshold.map(|v| v.to_string()),
        );
        push("eve-segment", self.eve_segment.clone());
        push("forward-one", self.forward_one.clone());
        push("decoy-fraction", self.decoy_fraction.map(|v| v.to_string()));
        push("sc-fraction", self.sc_fraction.map(|v| v.to_string()));
        push("flip-probability", self.flip_probability.map(|v| v.to_string()));
        entries
    }

    fn load(&self) -> Result<ExperimentConfig, ExitCode> {
        load_config(self.config.as_deref(), &self.overrides()).map_err(|err| {
            eprintln!("configuration error:\n{err}");
            ExitCode::from(2)
        })
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated photon counts.
    #[arg(long = "photon-counts", default_value = "2,4,6,8,10")]
    photon_counts: String,
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated photon counts.
    #[arg(long = "photon-counts", default_value = "1,2,4,10")]
    photon_counts: String,
}

fn parse_counts(text: &str) -> Result<Vec<usize>, ExitCode> {
    let mut counts = Vec::new();
    for token in text.split(',') {
        match token.trim().parse::<usize>() {
            Ok(v) if v >= 1 => counts.push(v),
            _ => {
                eprintln!("configuration error:\nphoton-counts: expected integers >= 1, got `{token}`");
                return Err(ExitCode::from(2));
            }
        }
    }
    Ok(counts)
}

fn emit(cfg: &ExperimentConfig, report: String, sidecar: Option<String>) -> ExitCode {
    match &cfg.out {
        Some(path) => {
            if let Err(e) = write_text(path, &report) {
                eprintln!("{e}");
                return ExitCode::from(3);
            }
            if let Some(content) = sidecar {
                let mut sidecar_path = path.clone();
                sidecar_path.set_extension("transcripts.json");
                if let Err(e) = write_text(&sidecar_path, &content) {
                    eprintln!("{e}");
                    return ExitCode::from(3);
                }
                println!("transcripts written to {}", sidecar_path.display());
            }
            println!("report written to {}", path.display());
            ExitCode::SUCCESS
        }
        None => {
            print!("{report}");
            ExitCode::SUCCESS
        }
    }
}

fn run_error(err: SimError) -> ExitCode {
    eprintln!("{err}");
    match err {
        SimError::Io { .. } => ExitCode::from(3),
        _ => ExitCode::from(2),
    }
}

fn cmd_run(args: &RunArgs) -> ExitCode {
    let cfg = match args.common.load() {
        Ok(cfg) => cfg,
        Err(code) => return code,
    };
    let (stats, records, runs) = match harness::run_trials(&cfg) {
        Ok(v) => v,
        Err(e) => return run_error(e),
    };
    eprintln!(
        "{} trials: epsilon_r {:.4} [{:.4}, {:.4}], p_m {:.4}, recovery {:.4}, detection {:.4}",
        cfg.trials,
        stats.epsilon_r.mean,
        stats.epsilon_r.wilson_low,
        stats.epsilon_r.wilson_high,
        stats.p_m.mean,
        stats.recovery_rate.mean,
        stats.detection.mean,
    );
    let report = render_run_report(&cfg, &stats, &records);
    let sidecar = cfg
        .save_transcripts
        .then(|| harness::report::render_transcripts(&runs));
    emit(&cfg, report, sidecar)
}

fn cmd_sweep(args: &SweepArgs) -> ExitCode {
    let cfg = match args.common.load() {
        Ok(cfg) => cfg,
        Err(code) => return code,
    };
    let counts = match parse_counts(&args.photon_counts) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let rows = match harness::sweep_photon_count(&counts, cfg.trials, cfg.seed) {
        Ok(rows) => rows,
        Err(e) => return run_error(e),
    };
    for row in &rows {
        eprintln!(
            "n={:<3} pe_paper={:.6e}  pe_exact={:.6e}  monte_carlo={:.6e} [{:.6e}, {:.6e}]",
            row.photons, row.pe_paper, row.pe_exact, row.monte_carlo, row.wilson_low, row.wilson_high
        );
    }
    let report = render_sweep_report(&cfg, &rows);
    emit(&cfg, report, None)
}

fn cmd_detect(args: &DetectArgs) -> ExitCode {
    let mut overrides = args.common.overrides();
    overrides.push(("protocol".to_string(), "improved".to_string()));
    let cfg = match load_config(args.common.config.as_deref(), &overrides) {
        Ok(cfg) => cfg,
        Err(err) => {
            eprintln!("configuration error:\n{err}");
            return ExitCode::from(2);
        }
    };
    let counts = match parse_counts(&args.photon_counts) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let rows = match harness::detect_curves(&cfg, &counts) {
        Ok(rows) => rows,
        Err(e) => return run_error(e),
    };
    for row in &rows {
        eprintln!(
            "n={:<3} depth={} flag_rate={:.4} (theory {:.4})  abort_rate={:.4}",
            row.photons, row.pns_depth, row.flag_rate, row.flag_theory, row.abort_rate
        );
    }
    let report = render_detect_report(&cfg, &rows);
    emit(&cfg, report, None)
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run(args) => cmd_run(&args),
        Command::Sweep(args) => cmd_sweep(&args),
        Command::Detect(args) => cmd_detect(&args),
    }
}
