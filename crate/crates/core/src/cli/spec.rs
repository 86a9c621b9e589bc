//! Experiment description shared by flags and configuration files.
//!
//! Configuration files are flat `key = value` text, one pair per line, lists
//! comma-separated, `#` starts a comment. Keys match the long flag names.

use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use crate::model::Feedback;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Solve,
    Eval,
    Optimize,
    Simulate,
    Sweep,
    Validate,
}

impl CommandKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CommandKind::Solve => "solve",
            CommandKind::Eval => "eval",
            CommandKind::Optimize => "optimize",
            CommandKind::Simulate => "simulate",
            CommandKind::Sweep => "sweep",
            CommandKind::Validate => "validate",
        }
    }
}

impl FromStr for CommandKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "solve" => CommandKind::Solve,
            "eval" => CommandKind::Eval,
            "optimize" => CommandKind::Optimize,
            "simulate" => CommandKind::Simulate,
            "sweep" => CommandKind::Sweep,
            "validate" => CommandKind::Validate,
            other => return Err(format!("unknown command '{other}'")),
        })
    }
}

/// A threshold grid entry: a fixed value or the optimizer's choice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaChoice {
    Fixed(f64),
    Optimal,
}

impl fmt::Display for GammaChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GammaChoice::Fixed(g) => write!(f, "{g}"),
            GammaChoice::Optimal => f.write_str("optimal"),
        }
    }
}

impl FromStr for GammaChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("optimal") {
            return Ok(GammaChoice::Optimal);
        }
        let g: f64 = s.parse().map_err(|_| format!("invalid gamma '{s}'"))?;
        if !(g >= 0.0 && g.is_finite()) {
            return Err(format!("gamma must be a nonnegative number (got {s})"));
        }
        Ok(GammaChoice::Fixed(g))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub command: CommandKind,
    pub q: Vec<f64>,
    pub m: Vec<usize>,
    pub settings: Vec<Feedback>,
    pub gamma: Vec<GammaChoice>,
    /// Epochs per source; `None` disables simulation in `sweep`.
    pub epochs: Option<u64>,
    pub seed: u64,
    pub replications: u32,
    pub out: Option<PathBuf>,
    pub trace: bool,
}

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_EPOCHS: u64 = 100_000;

fn q_grid(step_count: usize, step: f64) -> Vec<f64> {
    (0..=step_count).map(|i| (i as f64 * step * 1e6).round() / 1e6).collect()
}

impl ExperimentSpec {
    /// Built-in defaults for `command`. `solve`, `eval`, `optimize` and
    /// `simulate` have no default `q`.
    pub fn defaults(command: CommandKind) -> Self {
        let mut spec = Self {
            command,
            q: Vec::new(),
            m: vec![1],
            settings: Feedback::ALL.to_vec(),
            gamma: vec![GammaChoice::Optimal],
            epochs: None,
            seed: DEFAULT_SEED,
            replications: 1,
            out: None,
            trace: false,
        };
        match command {
            CommandKind::Sweep => spec.q = q_grid(18, 0.05),
            CommandKind::Validate => {
                spec.q = vec![0.1, 0.3, 0.5, 0.7];
                spec.m = vec![1, 2, 4, 8];
                spec.gamma = vec![GammaChoice::Fixed(0.0), GammaChoice::Optimal];
                spec.epochs = Some(DEFAULT_EPOCHS);
            }
            CommandKind::Simulate => spec.epochs = Some(DEFAULT_EPOCHS),
            _ => {}
        }
        spec
    }

    /// Applies one `key = value` pair.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let value = value.trim();
        match key.trim() {
            "command" => {
                let cmd: CommandKind = value.parse()?;
                if cmd != self.command {
                    return Err(format!(
                        "configuration is for '{}' but the command is '{}'",
                        cmd.as_str(),
                        self.command.as_str()
                    ));
                }
            }
            "q" => self.q = parse_list(value, parse_q)?,
            "m" => self.m = parse_list(value, parse_m)?,
            "setting" => self.settings = parse_list(value, |s| s.parse::<Feedback>())?,
            "gamma" => self.gamma = parse_list(value, |s| s.parse::<GammaChoice>())?,
            "epochs" => {
                self.epochs = if value.is_empty() || value == "none" {
                    None
                } else {
                    Some(parse_num::<u64>("epochs", value)?)
                }
            }
            "seed" => self.seed = parse_num("seed", value)?,
            "replications" => {
                self.replications = parse_num("replications", value)?;
                if self.replications == 0 {
                    return Err("replications must be at least 1".into());
                }
            }
            "out" => self.out = (!value.is_empty()).then(|| PathBuf::from(value)),
            "trace" => self.trace = parse_num("trace", value)?,
            other => return Err(format!("unknown configuration key '{other}'")),
        }
        Ok(())
    }

    /// Overlays the pairs in a configuration file onto `self`.
    pub fn apply_config(&mut self, text: &str) -> Result<(), String> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected 'key = value'", no + 1))?;
            self.set(key, value).map_err(|e| format!("line {}: {e}", no + 1))?;
        }
        Ok(())
    }

    /// Parses a complete configuration; the `command` key is required.
    pub fn from_config_str(text: &str) -> Result<Self, String> {
        let command = text
            .lines()
            .filter_map(|l| l.split('#').next()?.split_once('='))
            .find(|(k, _)| k.trim() == "command")
            .map(|(_, v)| v.trim().parse::<CommandKind>())
            .ok_or("configuration lacks a 'command' key")??;
        let mut spec = Self::defaults(command);
        spec.apply_config(text)?;
        Ok(spec)
    }

    /// Serializes every field; `from_config_str` inverts this exactly.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let join = |items: Vec<String>| items.join(",");
        let _ = writeln!(s, "command = {}", self.command.as_str());
        let _ = writeln!(s, "q = {}", join(self.q.iter().map(|v| v.to_string()).collect()));
        let _ = writeln!(s, "m = {}", join(self.m.iter().map(|v| v.to_string()).collect()));
        let _ = writeln!(s, "setting = {}", join(self.settings.iter().map(|v| v.to_string()).collect()));
        let _ = writeln!(s, "gamma = {}", join(self.gamma.iter().map(|v| v.to_string()).collect()));
        let _ = writeln!(
            s,
            "epochs = {}",
            self.epochs.map_or_else(|| "none".to_string(), |e| e.to_string())
        );
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "replications = {}", self.replications);
        let _ = writeln!(s, "out = {}", self.out.as_ref().map_or(String::new(), |p| p.display().to_string()));
        let _ = writeln!(s, "trace = {}", self.trace);
        s
    }

    pub fn check_grids(&self) -> Result<(), String> {
        if self.q.is_empty() {
            return Err(format!("{} needs --q", self.command.as_str()));
        }
        if self.m.is_empty() || self.settings.is_empty() || self.gamma.is_empty() {
            return Err("parameter grids must be non-empty".into());
        }
        Ok(())
    }
}

fn parse_list<T>(value: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|s| item(s.trim())).collect()
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T, String> {
    value.parse().map_err(|_| format!("invalid value for {key}: '{value}'"))
}

fn parse_q(s: &str) -> Result<f64, String> {
    let q: f64 = parse_num("q", s)?;
    if q.is_nan() || q < 0.0 {
        return Err(format!("q must be >= 0 (got {s})"));
    }
    if q >= 1.0 {
        return Err(format!("q must be < 1 (got {s})"));
    }
    Ok(q)
}

fn parse_m(s: &str) -> Result<usize, String> {
    let m: usize = parse_num("m", s)?;
    if m == 0 {
        return Err("m must be at least 1".into());
    }
    Ok(m)
}
