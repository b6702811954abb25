use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use starnc::channel::CodingModel;
use starnc::netsim::Fidelity;
use starnc::optimizer::SearchConfig;
use starnc::throughput::{BlockSizing, NetworkParams, OverheadModel, Phase, Scheme};

use crate::UsageError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    /// Random-coding error exponent
    Ee,
    /// Finite-blocklength normal approximation
    Ppv,
}

impl From<Model> for CodingModel {
    fn from(m: Model) -> Self {
        match m {
            Model::Ee => CodingModel::ErrorExponent,
            Model::Ppv => CodingModel::Ppv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseArg {
    Mac,
    Broadcast,
    Joint,
}

impl From<PhaseArg> for Phase {
    fn from(p: PhaseArg) -> Self {
        match p {
            PhaseArg::Mac => Phase::Mac,
            PhaseArg::Broadcast => Phase::Broadcast,
            PhaseArg::Joint => Phase::Joint,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeArg {
    Rlnc,
    Tdma,
    Both,
}

impl SchemeArg {
    pub fn schemes(self) -> Vec<Scheme> {
        match self {
            SchemeArg::Rlnc => vec![Scheme::Rlnc],
            SchemeArg::Tdma => vec![Scheme::Tdma],
            SchemeArg::Both => vec![Scheme::Rlnc, Scheme::Tdma],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FidelityArg {
    Symbolic,
    RankOnly,
}

impl From<FidelityArg> for Fidelity {
    fn from(f: FidelityArg) -> Self {
        match f {
            FidelityArg::Symbolic => Fidelity::Symbolic,
            FidelityArg::RankOnly => Fidelity::RankOnly,
        }
    }
}

/// Options shared by every subcommand. Each may also be set in the TOML file
/// given by `--config`, under the same name with underscores.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// TOML file supplying defaults for any option; flags take precedence
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Output file (standard output when absent)
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Block-error model
    #[arg(long, value_enum)]
    pub model: Option<Model>,
    /// Master seed for simulations
    #[arg(long)]
    pub seed: Option<u64>,
    /// Monte Carlo trials per point (0 disables simulation in `overhead`)
    #[arg(long)]
    pub trials: Option<u64>,
    /// Require m * l to divide K instead of padding the message
    #[arg(long, num_args = 0..=1, require_equals = true, default_missing_value = "true", value_name = "BOOL")]
    pub strict_divisibility: Option<bool>,

    /// Sweep one axis: AXIS=LIST, AXIS=A:B (integers), AXIS=lin:A:B:N or AXIS=log:A:B:N.
    /// Axes: K, h, q, Y, m, R, p, p_mac, p_br
    #[arg(long, value_name = "SPEC", help_heading = "Parameters")]
    pub sweep: Option<String>,
    /// Message length K in bits
    #[arg(long = "k", value_name = "BITS", help_heading = "Parameters")]
    pub k: Option<u64>,
    /// Header bits h per block
    #[arg(long = "h", value_name = "BITS", help_heading = "Parameters")]
    pub h: Option<u64>,
    /// Field size q = 2^l
    #[arg(long = "q", help_heading = "Parameters")]
    pub q: Option<u32>,
    /// Number of sources Y
    #[arg(long = "y", help_heading = "Parameters")]
    pub y: Option<u32>,
    /// Blocks per message m
    #[arg(long = "m", help_heading = "Parameters")]
    pub m: Option<u64>,
    /// Channel code rate R
    #[arg(long, help_heading = "Parameters")]
    pub rate: Option<f64>,
    /// Crossover probability of both links
    #[arg(long = "p", help_heading = "Parameters")]
    pub p: Option<f64>,
    /// Crossover probability of the multiple-access link
    #[arg(long, help_heading = "Parameters")]
    pub p_mac: Option<f64>,
    /// Crossover probability of the broadcast link
    #[arg(long, help_heading = "Parameters")]
    pub p_br: Option<f64>,
    /// Largest block count searched
    #[arg(long, help_heading = "Parameters")]
    pub m_max: Option<u64>,

    /// Phase to optimise (optimize, ratio)
    #[arg(long, value_enum, help_heading = "Mode")]
    pub phase: Option<PhaseArg>,
    /// Scheme (optimize, simulate)
    #[arg(long, value_enum, help_heading = "Mode")]
    pub scheme: Option<SchemeArg>,
    /// Simulator fidelity (simulate)
    #[arg(long, value_enum, help_heading = "Mode")]
    pub fidelity: Option<FidelityArg>,
    /// Simulate each point at its joint optimum (m, R) instead of the given m and R (simulate)
    #[arg(long, num_args = 0..=1, require_equals = true, default_missing_value = "true", value_name = "BOOL", help_heading = "Mode")]
    pub at_optimum: Option<bool>,
    /// Scale the analytic slot count by 1 + X before comparing, to check that validation catches errors (simulate)
    #[arg(long, value_name = "X", help_heading = "Mode")]
    pub perturb_analytic: Option<f64>,
    /// Write the full simulation reports as JSON to this file (simulate)
    #[arg(long, value_name = "FILE", help_heading = "Mode")]
    pub report: Option<PathBuf>,
}

impl Settings {
    /// Fields set here win over those set in `lower`.
    pub fn over(&self, lower: &Settings) -> Result<Settings> {
        let mut base = serde_json::to_value(lower)?;
        let top = serde_json::to_value(self)?;
        if let (Some(b), Some(t)) = (base.as_object_mut(), top.as_object()) {
            for (k, v) in t {
                if !v.is_null() {
                    b.insert(k.clone(), v.clone());
                }
            }
        }
        let mut merged: Settings = serde_json::from_value(base)?;
        merged.config = self.config.clone();
        Ok(merged)
    }

    pub fn from_file(path: &Path) -> Result<Settings> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())).into())
    }

    /// Flags over the config file over the defaults.
    pub fn resolve(&self) -> Result<Resolved> {
        let merged = match &self.config {
            Some(path) => self.over(&Settings::from_file(path)?)?,
            None => self.clone(),
        };
        merged.with_defaults()
    }

    fn with_defaults(self) -> Result<Resolved> {
        let p = self.p.unwrap_or(0.11);
        let strict = self.strict_divisibility.unwrap_or(false);
        let model = self.model.unwrap_or(Model::Ee);
        let params = NetworkParams {
            sources: self.y.unwrap_or(2),
            message_bits: self.k.unwrap_or(1000),
            header_bits: self.h.unwrap_or(16),
            field_size: self.q.unwrap_or(4),
            blocks: self.m.unwrap_or(1),
            rate: self.rate.unwrap_or(0.5),
            p_mac: self.p_mac.unwrap_or(p),
            p_br: self.p_br.unwrap_or(p),
            model: model.into(),
            sizing: if strict { BlockSizing::Strict } else { BlockSizing::Padded },
            overhead: OverheadModel::UpperBound,
        };
        let sweep = self.sweep.as_deref().map(Sweep::parse).transpose()?;
        let search = SearchConfig { m_max: self.m_max.unwrap_or(SearchConfig::default().m_max), ..SearchConfig::default() };
        if search.m_max == 0 {
            bail!(UsageError("--m-max must be at least 1".into()));
        }
        let perturb = self.perturb_analytic.unwrap_or(0.0);
        if !perturb.is_finite() || perturb <= -1.0 {
            bail!(UsageError(format!("--perturb-analytic {perturb} must be finite and above -1")));
        }
        Ok(Resolved {
            format: self.format.unwrap_or(Format::Csv),
            model,
            seed: self.seed.unwrap_or(1),
            trials: self.trials.unwrap_or(10_000),
            strict_divisibility: strict,
            params,
            search,
            sweep,
            phase: self.phase.unwrap_or(PhaseArg::Joint),
            scheme: self.scheme,
            fidelity: self.fidelity.unwrap_or(FidelityArg::RankOnly),
            at_optimum: self.at_optimum.unwrap_or(false),
            perturb_analytic: perturb,
            out: self.out,
            report: self.report,
        })
    }
}

/// Settings with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub report: Option<PathBuf>,
    pub format: Format,
    pub model: Model,
    pub seed: u64,
    pub trials: u64,
    pub strict_divisibility: bool,
    pub params: NetworkParams,
    pub search: SearchConfig,
    pub sweep: Option<Sweep>,
    pub phase: PhaseArg,
    pub scheme: Option<SchemeArg>,
    pub fidelity: FidelityArg,
    pub at_optimum: bool,
    pub perturb_analytic: f64,
}

impl Resolved {
    /// The parameter set of every sweep point, in sweep order.
    pub fn points(&self, allowed: &[Axis]) -> Result<Vec<NetworkParams>> {
        let Some(sweep) = &self.sweep else {
            return Ok(vec![self.params]);
        };
        if !allowed.contains(&sweep.axis) {
            let names: Vec<&str> = allowed.iter().map(|a| a.name()).collect();
            bail!(UsageError(format!("cannot sweep {} here; choose one of {}", sweep.axis.name(), names.join(", "))));
        }
        Ok(sweep.values.iter().map(|&v| sweep.axis.apply(self.params, v)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Axis {
    K,
    #[serde(rename = "h")]
    H,
    #[serde(rename = "q")]
    Q,
    Y,
    #[serde(rename = "m")]
    M,
    R,
    #[serde(rename = "p")]
    P,
    #[serde(rename = "p_mac")]
    PMac,
    #[serde(rename = "p_br")]
    PBr,
}

impl Axis {
    pub const NETWORK: [Axis; 7] = [Axis::K, Axis::H, Axis::Q, Axis::Y, Axis::P, Axis::PMac, Axis::PBr];

    fn from_name(s: &str) -> Option<Axis> {
        Some(match s {
            "K" | "k" => Axis::K,
            "h" | "H" => Axis::H,
            "q" | "Q" => Axis::Q,
            "Y" | "y" => Axis::Y,
            "m" | "M" => Axis::M,
            "R" | "r" | "rate" => Axis::R,
            "p" => Axis::P,
            "p_mac" | "p-mac" => Axis::PMac,
            "p_br" | "p-br" => Axis::PBr,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::K => "K",
            Axis::H => "h",
            Axis::Q => "q",
            Axis::Y => "Y",
            Axis::M => "m",
            Axis::R => "R",
            Axis::P => "p",
            Axis::PMac => "p_mac",
            Axis::PBr => "p_br",
        }
    }

    fn integral(self) -> bool {
        matches!(self, Axis::K | Axis::H | Axis::Q | Axis::Y | Axis::M)
    }

    fn apply(self, mut p: NetworkParams, v: f64) -> NetworkParams {
        match self {
            Axis::K => p.message_bits = v as u64,
            Axis::H => p.header_bits = v as u64,
            Axis::Q => p.field_size = v as u32,
            Axis::Y => p.sources = v as u32,
            Axis::M => p.blocks = v as u64,
            Axis::R => p.rate = v,
            Axis::P => {
                p.p_mac = v;
                p.p_br = v;
            }
            Axis::PMac => p.p_mac = v,
            Axis::PBr => p.p_br = v,
        }
        p
    }
}

/// One swept axis and its values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sweep {
    pub axis: Axis,
    pub values: Vec<f64>,
}

impl Sweep {
    pub fn parse(spec: &str) -> Result<Sweep> {
        let usage = |msg: String| UsageError(format!("--sweep {spec}: {msg}"));
        let (name, range) = spec.split_once('=').ok_or_else(|| usage("expected AXIS=VALUES".into()))?;
        let axis = Axis::from_name(name.trim()).ok_or_else(|| usage(format!("unknown axis '{name}'")))?;
        let num = |s: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|_| usage(format!("'{s}' is not a number")).into())
        };
        let parts: Vec<&str> = range.split(':').collect();
        let mut values = match parts.as_slice() {
            [kind @ ("lin" | "log"), a, b, n] => {
                let (a, b) = (num(a)?, num(b)?);
                let n: usize = n.trim().parse().map_err(|_| usage(format!("'{n}' is not a point count")))?;
                if n == 0 {
                    bail!(usage("need at least one point".into()));
                }
                if *kind == "log" && !(a > 0.0 && b > 0.0) {
                    bail!(usage("log spacing needs positive end points".into()));
                }
                let t = |i: usize| if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
                (0..n)
                    .map(|i| if *kind == "log" { (a.ln() + t(i) * (b.ln() - a.ln())).exp() } else { a + t(i) * (b - a) })
                    .collect::<Vec<f64>>()
            }
            [a, b] => {
                let (a, b) = (num(a)?, num(b)?);
                if !axis.integral() || a.fract() != 0.0 || b.fract() != 0.0 || a > b {
                    bail!(usage("A:B ranges take integers with A <= B on an integer axis".into()));
                }
                (a as u64..=b as u64).map(|v| v as f64).collect()
            }
            [list] => list.split(',').map(num).collect::<Result<Vec<f64>>>()?,
            _ => bail!(usage("unrecognised range".into())),
        };
        if axis.integral() {
            let spaced = parts.len() == 4;
            for v in values.iter_mut() {
                if spaced {
                    *v = v.round();
                } else if v.fract() != 0.0 {
                    bail!(usage(format!("{} takes integers, got {v}", axis.name())));
                }
                if *v < 0.0 {
                    bail!(usage(format!("{} must be non-negative", axis.name())));
                }
            }
            values.dedup();
        }
        if values.iter().any(|v| !v.is_finite()) {
            bail!(usage("values must be finite".into()));
        }
        Ok(Sweep { axis, values })
    }
}
