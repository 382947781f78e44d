//! Experiment configuration: a flat `key = value` file format whose keys
//! mirror the CLI flag names, with flag overrides applied on top.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::attack::{default_tree_depth, AttackStrategy, EveSegment};
use crate::photonics::ChannelModel;
use crate::protocol::{OpSet, ProtocolConfig, SecretMessage};

/// All configuration problems found, reported together.
#[derive(Debug)]
pub struct ConfigError {
    pub problems: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.problems.join("\n"))
    }
}

impl std::error::Error for ConfigError {}

impl ConfigError {
    fn one(problem: impl Into<String>) -> Self {
        Self { problems: vec![problem.into()] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    Original,
    Improved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackKind {
    None,
    Trojan,
    Eve,
}

/// A fully resolved experiment description. Every field has a default, so a
/// minimal config file (or none at all) still runs.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub protocol: ProtocolKind,
    pub attack: AttackKind,
    /// Photons per Trojan pulse.
    pub photons: usize,
    /// Whether the Trojan forwards one untouched photon per pulse.
    pub forward_one: bool,
    /// Bob's splitter-tree depth; 0 means ⌈log2(photons)⌉.
    pub tree_depth: u32,
    pub eve_segment: EveSegment,
    pub signals: usize,
    pub trials: u64,
    pub seed: u64,
    pub msg_len: usize,
    pub sample_fraction: f64,
    pub error_threshold: f64,
    pub multiphoton_threshold: f64,
    pub pns_depth: u32,
    pub decoys: bool,
    pub decoy_fraction: f64,
    pub sc_fraction: f64,
    pub flip_probability: f64,
    pub format: ReportFormat,
    pub out: Option<PathBuf>,
    pub save_transcripts: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            protocol: ProtocolKind::Original,
            attack: AttackKind::None,
            photons: 4,
            forward_one: true,
            tree_depth: 0,
            eve_segment: EveSegment::CharlieToAlice,
            signals: 256,
            trials: 100,
            seed: 42,
            msg_len: 64,
            sample_fraction: 0.25,
            error_threshold: 0.1,
            multiphoton_threshold: 0.02,
            pns_depth: 1,
            decoys: false,
            decoy_fraction: 0.2,
            sc_fraction: 0.1,
            flip_probability: 0.0,
            format: ReportFormat::Json,
            out: None,
            save_transcripts: false,
        }
    }
}

impl ExperimentConfig {
    /// The adversary this experiment runs against.
    pub fn attack_strategy(&self) -> AttackStrategy {
        match self.attack {
            AttackKind::None => AttackStrategy::None,
            AttackKind::Trojan => AttackStrategy::TrojanBob {
                n_photons: self.photons,
                forward_one: self.forward_one,
                tree_depth: if self.tree_depth == 0 {
                    default_tree_depth(self.photons)
                } else {
                    self.tree_depth
                },
            },
            AttackKind::Eve => AttackStrategy::InterceptResendEve {
                segment: self.eve_segment,
            },
        }
    }

    /// Per-run protocol configuration around a concrete message.
    pub fn protocol_config(&self, message: SecretMessage) -> ProtocolConfig {
        ProtocolConfig {
            num_signals: self.signals,
            charlie_sample_fraction: self.sample_fraction,
            alice_sample_fraction: self.sample_fraction,
            error_threshold: self.error_threshold,
            multiphoton_threshold: self.multiphoton_threshold,
            op_set: match self.protocol {
                ProtocolKind::Original => OpSet::ThreeOp,
                ProtocolKind::Improved => OpSet::FourOp,
            },
            pns_check_depth: self.pns_depth,
            decoys_enabled: self.decoys,
            decoy_fraction: if self.decoys { self.decoy_fraction } else { 0.0 },
            sc_fraction: self.sc_fraction,
            channel: ChannelModel {
                flip_probability: self.flip_probability,
            },
            message,
        }
    }

    /// Applies one `key = value` entry; the key set mirrors the CLI flags.
    fn apply(&mut self, key: &str, value: &str, problems: &mut Vec<String>) {
        let mut bad = |what: &str| {
            problems.push(format!("{key}: expected {what}, got `{value}`"));
        };
        match key {
            "protocol" => match value {
                "original" => self.protocol = ProtocolKind::Original,
                "improved" => self.protocol = ProtocolKind::Improved,
                _ => bad("original|improved"),
            },
            "attack" => match value {
                "none" => self.attack = AttackKind::None,
                "trojan" => self.attack = AttackKind::Trojan,
                "eve" => self.attack = AttackKind::Eve,
                _ => bad("none|trojan|eve"),
            },
            "photons" => match value.parse::<usize>() {
                Ok(v) if v >= 1 => self.photons = v,
                _ => bad("an integer >= 1"),
            },
            "forward-one" => match parse_switch(value) {
                Some(v) => self.forward_one = v,
                None => bad("on|off"),
            },
            "tree-depth" => match value.parse() {
                Ok(v) => self.tree_depth = v,
                Err(_) => bad("a non-negative integer"),
            },
            "eve-segment" => match value {
                "bob-charlie" => self.eve_segment = EveSegment::BobToCharlie,
                "charlie-alice" => self.eve_segment = EveSegment::CharlieToAlice,
                "alice-charlie" => self.eve_segment = EveSegment::AliceToCharlie,
                _ => bad("bob-charlie|charlie-alice|alice-charlie"),
            },
            "signals" => match value.parse::<usize>() {
                Ok(v) if v >= 1 => self.signals = v,
                _ => bad("an integer >= 1"),
            },
            "trials" => match value.parse::<u64>() {
                Ok(v) if v >= 1 => self.trials = v,
                _ => bad("an integer >= 1"),
            },
            "seed" => match value.parse() {
                Ok(v) => self.seed = v,
                Err(_) => bad("a 64-bit unsigned integer"),
            },
            "msg-len" => match value.parse::<usize>() {
                Ok(v) if v >= 1 => self.msg_len = v,
                _ => bad("an integer >= 1"),
            },
            "sample-fraction" => match value.parse::<f64>() {
                Ok(v) if v > 0.0 && v < 1.0 => self.sample_fraction = v,
                _ => bad("a number strictly between 0 and 1"),
            },
            "error-threshold" => match value.parse::<f64>() {
                Ok(v) if (0.0..=1.0).contains(&v) => self.error_threshold = v,
                _ => bad("a number in [0, 1]"),
            },
            "multiphoton-threshold" => match value.parse::<f64>() {
                Ok(v) if (0.0..=1.0).contains(&v) => self.multiphoton_threshold = v,
                _ => bad("a number in [0, 1]"),
            },
            "pns-depth" => match value.parse::<u32>() {
                Ok(v) if v >= 1 => self.pns_depth = v,
                _ => bad("an integer >= 1"),
            },
            "decoys" => match parse_switch(value) {
                Some(v) => self.decoys = v,
                None => bad("on|off"),
            },
            "decoy-fraction" => match value.parse::<f64>() {
                Ok(v) if (0.0..1.0).contains(&v) => self.decoy_fraction = v,
                _ => bad("a number in [0, 1)"),
            },
            "sc-fraction" => match value.parse::<f64>() {
                Ok(v) if (0.0..1.0).contains(&v) => self.sc_fraction = v,
                _ => bad("a number in [0, 1)"),
            },
            "flip-probability" => match value.parse::<f64>() {
                Ok(v) if (0.0..=1.0).contains(&v) => self.flip_probability = v,
                _ => bad("a number in [0, 1]"),
            },
            "format" => match value {
                "json" => self.format = ReportFormat::Json,
                "csv" => self.format = ReportFormat::Csv,
                _ => bad("json|csv"),
            },
            "out" => self.out = Some(PathBuf::from(value)),
            "save-transcripts" => match parse_switch(value) {
                Some(v) => self.save_transcripts = v,
                None => bad("on|off"),
            },
            _ => problems.push(format!("unknown key `{key}`")),
        }
    }

    /// Cross-field validation on the fully merged configuration.
    fn check(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let improved = self.protocol == ProtocolKind::Improved;
        if self.attack == AttackKind::Trojan && self.photons < 1 {
            problems.push("photons: a Trojan pulse needs at least 1 photon".into());
        }
        if self.decoys && !improved {
            problems.push("decoys: only the improved protocol inserts decoys".into());
        }
        if self.save_transcripts && self.out.is_none() {
            problems.push("save-transcripts: requires an output path (`out`)".into());
        }
        let probe = self.protocol_config(SecretMessage::from_bits(vec![0; self.msg_len]).unwrap());
        if let Err(errs) = probe.validate(improved) {
            problems.extend(errs);
        }
        problems
    }
}

fn parse_switch(value: &str) -> Option<bool> {
    match value {
        "on" | "true" | "yes" | "1" => Some(true),
        "off" | "false" | "no" | "0" => Some(false),
        _ => None,
    }
}

/// Parses the flat config file format: `key = value` lines, `#` comments,
/// blank lines ignored.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut entries = Vec::new();
    let mut problems = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match line.split_once('=') {
            Some((key, value)) => {
                entries.push((key.trim().to_string(), value.trim().to_string()));
            }
            None => problems.push(format!("line {}: expected `key = value`", lineno + 1)),
        }
    }
    if problems.is_empty() {
        Ok(entries)
    } else {
        Err(ConfigError { problems })
    }
}

/// Loads a configuration: defaults, then the file (if any), then flag
/// overrides. Every problem found is reported, each naming its field.
pub fn load_config(
    path: Option<&Path>,
    overrides: &[(String, String)],
) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = ExperimentConfig::default();
    let mut problems = Vec::new();

    if let Some(path) = path {
        let text = std::fs::read_to_string(path).map_err(|e| {
            ConfigError::one(format!("cannot read config file {}: {e}", path.display()))
        })?;
        for (key, value) in parse_config_text(&text)? {
            cfg.apply(&key, &value, &mut problems);
        }
    }
    for (key, value) in overrides {
        cfg.apply(key, value, &mut problems);
    }
    problems.extend(cfg.check());

    if problems.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError { problems })
    }
}
