//! Deterministic report rendering.
//!
//! Reports are byte-identical across repeated runs of the same
//! configuration: struct field order fixes JSON key order, floats are
//! rounded to 12 significant digits before serialization, and CSV floats are
//! printed with a fixed 12-significant-digit scientific format.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::harness::config::ExperimentConfig;
use crate::harness::trials::{DetectRow, SummaryStats, SweepRow, TrialRecord};
use crate::protocol::RunResult;
use crate::{Result, SimError};

/// Rounds to 12 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let magnitude = x.abs().log10().floor() as i32;
    let factor = 10f64.powi(11 - magnitude);
    (x * factor).round() / factor
}

/// Fixed-width float formatting for CSV cells: 12 significant digits in
/// scientific notation, `0` for zero.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x:.11e}")
    }
}

/// Applies `round_sig` to every number in a JSON tree.
fn round_floats(value: &mut Value) {
    match value {
        Value::Number(n) => {
            if let Some(f) = n.as_f64() {
                if n.as_i64().is_none() && n.as_u64().is_none() {
                    if let Some(rounded) = serde_json::Number::from_f64(round_sig(f)) {
                        *value = Value::Number(rounded);
                    }
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

fn to_pretty_json<T: Serialize>(document: &T) -> String {
    let mut value = serde_json::to_value(document).expect("report serialization");
    round_floats(&mut value);
    let mut text = serde_json::to_string_pretty(&value).expect("report rendering");
    text.push('\n');
    text
}

#[derive(Serialize)]
struct RunReport<'a> {
    config: &'a ExperimentConfig,
    stats: &'a SummaryStats,
    trials: &'a [TrialRecord],
}

/// Renders the `run` report in the requested format.
pub fn render_run_report(
    cfg: &ExperimentConfig,
    stats: &SummaryStats,
    records: &[TrialRecord],
) -> String {
    match cfg.format {
        crate::harness::config::ReportFormat::Json => to_pretty_json(&RunReport {
            config: cfg,
            stats,
            trials: records,
        }),
        crate::harness::config::ReportFormat::Csv => {
            let mut out = String::new();
            out.push_str(
                "trial,protocol,attack,epsilon_r,p_m,verdict,recovery_rate,ambiguous_count,signals\n",
            );
            for r in records {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    r.trial,
                    r.protocol,
                    r.attack,
                    fmt_sig(r.epsilon_r),
                    fmt_sig(r.p_m),
                    r.verdict,
                    fmt_sig(r.recovery_rate),
                    r.ambiguous_count,
                    r.signals
                ));
            }
            out
        }
    }
}

#[derive(Serialize)]
struct SweepReport<'a> {
    config: &'a ExperimentConfig,
    rows: &'a [SweepRow],
}

pub fn render_sweep_report(cfg: &ExperimentConfig, rows: &[SweepRow]) -> String {
    match cfg.format {
        crate::harness::config::ReportFormat::Json => {
            to_pretty_json(&SweepReport { config: cfg, rows })
        }
        crate::harness::config::ReportFormat::Csv => {
            let mut out = String::new();
            out.push_str(
                "photons,pe_paper,pe_exact,monte_carlo,wilson_low,wilson_high,misclassified,trials\n",
            );
            for r in rows {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    r.photons,
                    fmt_sig(r.pe_paper),
                    fmt_sig(r.pe_exact),
                    fmt_sig(r.monte_carlo),
                    fmt_sig(r.wilson_low),
                    fmt_sig(r.wilson_high),
                    r.misclassified,
                    r.trials
                ));
            }
            out
        }
    }
}

#[derive(Serialize)]
struct DetectReport<'a> {
    config: &'a ExperimentConfig,
    rows: &'a [DetectRow],
}

pub fn render_detect_report(cfg: &ExperimentConfig, rows: &[DetectRow]) -> String {
    match cfg.format {
        crate::harness::config::ReportFormat::Json => {
            to_pretty_json(&DetectReport { config: cfg, rows })
        }
        crate::harness::config::ReportFormat::Csv => {
            let mut out = String::new();
            out.push_str(
                "photons,pns_depth,runs,sampled,flag_rate,flag_theory,wilson_low,wilson_high,abort_rate\n",
            );
            for r in rows {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    r.photons,
                    r.pns_depth,
                    r.runs,
                    r.sampled,
                    fmt_sig(r.flag_rate),
                    fmt_sig(r.flag_theory),
                    fmt_sig(r.wilson_low),
                    fmt_sig(r.wilson_high),
                    fmt_sig(r.abort_rate)
                ));
            }
            out
        }
    }
}

#[derive(Serialize)]
struct TranscriptDump<'a> {
    trial: u64,
    result: &'a RunResult,
}

/// Renders the transcripts sidecar (full per-pulse records per trial).
pub fn render_transcripts(runs: &[RunResult]) -> String {
    let dumps: Vec<TranscriptDump> = runs
        .iter()
        .enumerate()
        .map(|(i, result)| TranscriptDump { trial: i as u64, result })
        .collect();
    to_pretty_json(&dumps)
}

/// Writes a rendered report, naming the path in any failure.
pub fn write_text(path: &Path, content: &str) -> Result<()> {
    let for_path = |e: std::io::Error| SimError::Io {
        path: path.display().to_string(),
        source: e,
    };
    let mut file = std::fs::File::create(path).map_err(for_path)?;
    file.write_all(content.as_bytes()).map_err(for_path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_keeps_twelve_significant_digits() {
        assert_eq!(round_sig(0.0), 0.0);
        assert_eq!(round_sig(1.0 / 3.0), 0.333333333333);
        assert_eq!(round_sig(1234.5678901234567), 1234.56789012);
        assert_eq!(round_sig(6.510416666666666e-4), 6.51041666667e-4);
    }

    #[test]
    fn fixed_float_format() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(0.25), "2.50000000000e-1");
        assert_eq!(fmt_sig(1.0 / 48.0), "2.08333333333e-2");
    }

    #[test]
    fn json_rendering_is_stable_and_echoes_config() {
        let cfg = ExperimentConfig::default();
        let rows = crate::harness::trials::sweep_photon_count(&[2], 100, 7).unwrap();
        let a = render_sweep_report(&cfg, &rows);
        let b = render_sweep_report(&cfg, &rows);
        assert_eq!(a, b);
        assert!(a.contains("pe_exact"));
        assert!(a.contains("\"sample_fraction\""));
    }

    #[test]
    fn write_text_names_the_path_on_failure() {
        let err = write_text(Path::new("/nonexistent-dir/report.json"), "x").unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/report.json"));
    }
}
