//! Run configuration: the JSON schema, parsing and default filling.

use std::fmt;
use std::path::{Path, PathBuf};

use mpdo_core::mpdo::{EvalOptions, EvalPath, FamilySpec, SymbolSpec, DEFAULT_COST_CAP};
use mpdo_core::sharpness::{DkParams, SlotFamily};
use mpdo_core::weights::Method;
use mpdo_core::Grid;
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Eval,
    Norm,
    WeightTest,
    DecompCheck,
    BoundExperiment,
    SharpnessExperiment,
    Dk,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Eval => "eval",
            Command::Norm => "norm",
            Command::WeightTest => "weight-test",
            Command::DecompCheck => "decomp-check",
            Command::BoundExperiment => "bound-experiment",
            Command::SharpnessExperiment => "sharpness-experiment",
            Command::Dk => "dk",
        }
    }
}

/// An exponent in `(0, inf]`. Infinity is written `"inf"` in JSON.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exp(pub f64);

impl Serialize for Exp {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Exp {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Exp;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a positive number or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Exp, E> {
                if v > 0.0 {
                    Ok(Exp(v))
                } else {
                    Err(E::custom(format!("exponent {v} must be positive")))
                }
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Exp, E> {
                self.visit_f64(v as f64)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Exp, E> {
                self.visit_f64(v as f64)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Exp, E> {
                match v {
                    "inf" | "infinity" | "Infinity" => Ok(Exp(f64::INFINITY)),
                    _ => Err(E::custom(format!("expected a number or \"inf\", got \"{v}\""))),
                }
            }
        }
        d.deserialize_any(V)
    }
}

fn exps(v: &[Exp]) -> Vec<f64> {
    v.iter().map(|e| e.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "M")]
    pub m: usize,
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid, CliError> {
        Grid::new(self.n, self.l, self.m).map_err(|e| CliError::Schema(format!("grid: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentConfig {
    pub q: Vec<Exp>,
    pub r: Exp,
    /// Smoothness indices `s_0, ..., s_N`; checked when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<Exp>,
}

impl ExponentConfig {
    pub fn q(&self) -> Vec<f64> {
        exps(&self.q)
    }
}

/// Input functions for `eval` and `norm`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FunctionSpec {
    /// A field file, resolved against the config directory.
    File { path: String },
    /// `exp(-|x - center|^2 / (2 width^2) + i frequency . x)`.
    Gaussian {
        #[serde(default)]
        center: Vec<f64>,
        width: f64,
        #[serde(default)]
        frequency: Vec<f64>,
    },
    /// A draw from a random family, seeded by the run seed and the
    /// function's position in the list.
    Random {
        #[serde(default)]
        family: Option<FamilySpec>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NormSpec {
    Lebesgue {
        p: Exp,
    },
    Amalgam {
        p: Exp,
        q: Exp,
        #[serde(default = "one")]
        cell: f64,
    },
    L2ul,
    SSquare {
        p: Exp,
        #[serde(default)]
        decay: Option<f64>,
    },
    Bmo,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    #[serde(default = "auto")]
    pub path: EvalPath,
    #[serde(default = "cap")]
    pub cost_cap: f64,
}

fn auto() -> EvalPath {
    EvalPath::Auto
}

fn cap() -> f64 {
    DEFAULT_COST_CAP
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { path: auto(), cost_cap: cap() }
    }
}

impl EvalConfig {
    pub fn options(&self) -> EvalOptions {
        EvalOptions { path: self.path, cost_cap: self.cost_cap }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightTestConfig {
    #[serde(default = "two")]
    pub blocks: usize,
    #[serde(default = "one_usize")]
    pub dim: usize,
    #[serde(default = "default_radii")]
    pub radii: Vec<usize>,
    #[serde(default = "alternating")]
    pub method: Method,
}

fn two() -> usize {
    2
}

fn one_usize() -> usize {
    1
}

fn default_radii() -> Vec<usize> {
    vec![4, 8, 16, 32]
}

fn alternating() -> Method {
    Method::Alternating
}

impl Default for WeightTestConfig {
    fn default() -> Self {
        WeightTestConfig { blocks: two(), dim: one_usize(), radii: default_radii(), method: alternating() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundConfig {
    #[serde(default)]
    pub family: Option<FamilySpec>,
    #[serde(default = "twenty")]
    pub trials: usize,
    /// Factors applied to every radius of a band-limited symbol; one table
    /// row per factor.
    #[serde(default = "unit_scale")]
    pub scales: Vec<f64>,
    /// Sampling grids for the symbol norm on the right-hand side.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_x: Option<GridConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_xi: Option<GridConfig>,
}

fn twenty() -> usize {
    20
}

fn unit_scale() -> Vec<f64> {
    vec![1.0]
}

impl Default for BoundConfig {
    fn default() -> Self {
        BoundConfig { family: None, trials: twenty(), scales: unit_scale(), grid_x: None, grid_xi: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SharpnessConfig {
    /// Norm growth of the slot test functions over `a`.
    Growth {
        family: SlotFamily,
        a_values: Vec<u32>,
        #[serde(default = "two")]
        inputs: usize,
        #[serde(default = "unit_exp")]
        r: Exp,
    },
    /// Partial coefficient sums over truncations `K`.
    CoefficientSums {
        m: f64,
        s0: f64,
        b: Vec<f64>,
        k_values: Vec<usize>,
        #[serde(default = "one_usize")]
        n: usize,
    },
    /// `L^2` norm of the lacunary sum as the damping parameter shrinks.
    Wainger {
        a: f64,
        b: f64,
        t_values: Vec<f64>,
        k_max: usize,
    },
}

fn unit_exp() -> Exp {
    Exp(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// File name of the field written by `eval`, inside the output
    /// directory.
    #[serde(default = "field_name")]
    pub field: String,
}

fn field_name() -> String {
    "field.fld".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { field: field_name() }
    }
}

/// The configuration file. After [`RunConfig::materialize`] every section
/// the command reads is present with its defaults filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbol: Option<SymbolSpec>,
    /// Weight id such as `const` or `power:-0.5`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponents: Option<ExponentConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub functions: Vec<FunctionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm: Option<NormSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval: Option<EvalConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_test: Option<WeightTestConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<BoundConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sharpness: Option<SharpnessConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dk: Option<DkParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputConfig>,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

/// Parse a JSON config. Errors carry the path of the offending field.
pub fn parse_config_str(text: &str) -> Result<RunConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Schema(format!("at '{path}': {}", e.inner()))
    })
}

pub fn parse_config_file(path: impl AsRef<Path>) -> Result<RunConfig, CliError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut cfg = parse_config_str(&text)?;
    cfg.base_dir = path.parent().map(Path::to_path_buf);
    Ok(cfg)
}

fn need<T: Clone>(v: &Option<T>, key: &str, cmd: Command) -> Result<T, CliError> {
    v.clone().ok_or_else(|| CliError::Schema(format!("'{key}' is required for {}", cmd.name())))
}

impl RunConfig {
    /// Settle the command and seed, check that the sections the command
    /// needs are present and fill every default.
    pub fn materialize(mut self, command: Option<Command>, seed: Option<u64>) -> Result<RunConfig, CliError> {
        let cmd = match (command, self.command) {
            (Some(a), Some(b)) if a != b => {
                return Err(CliError::Schema(format!(
                    "command '{}' does not match config command '{}'",
                    a.name(),
                    b.name()
                )))
            }
            (Some(a), _) => a,
            (None, Some(b)) => b,
            (None, None) => return Err(CliError::Schema("no command given".into())),
        };
        self.command = Some(cmd);
        self.seed = Some(seed.or(self.seed).unwrap_or(0));
        let grid = || -> Result<Grid, CliError> { need(&self.grid, "grid", cmd)?.build() };
        match cmd {
            Command::Eval | Command::Norm => {
                let g = grid()?;
                if self.functions.is_empty() {
                    return Err(CliError::Schema(format!("'functions' must be non-empty for {}", cmd.name())));
                }
                for f in &mut self.functions {
                    if let FunctionSpec::Random { family } = f {
                        family.get_or_insert_with(|| FamilySpec::default_for(&g));
                    }
                }
                if cmd == Command::Eval {
                    need(&self.symbol, "symbol", cmd)?;
                    self.eval.get_or_insert_with(EvalConfig::default);
                    self.output.get_or_insert_with(OutputConfig::default);
                } else {
                    need(&self.norm, "norm", cmd)?;
                    if let Some(NormSpec::SSquare { decay, .. }) = &mut self.norm {
                        decay.get_or_insert(2.0 * g.dim() as f64 + 2.0);
                    }
                }
            }
            Command::WeightTest => {
                self.weight.get_or_insert_with(|| "const".into());
                self.weight_test.get_or_insert_with(WeightTestConfig::default);
            }
            Command::DecompCheck => {
                grid()?;
            }
            Command::BoundExperiment => {
                let g = grid()?;
                need(&self.symbol, "symbol", cmd)?;
                let e = need(&self.exponents, "exponents", cmd)?;
                if let Some(s) = &e.s {
                    let chk = mpdo_core::mpdo::theorem61_exponent_check(g.dim(), &e.q(), e.r.0, s);
                    if !chk.pass {
                        return Err(CliError::Schema(format!(
                            "exponents rejected: {}",
                            chk.witness.unwrap_or_default()
                        )));
                    }
                }
                self.eval.get_or_insert_with(EvalConfig::default);
                self.weight.get_or_insert_with(|| "const".into());
                let b = self.bound.get_or_insert_with(BoundConfig::default);
                b.family.get_or_insert_with(|| FamilySpec::default_for(&g));
                if b.grid_x.is_some() != b.grid_xi.is_some() {
                    return Err(CliError::Schema("bound.grid_x and bound.grid_xi must be given together".into()));
                }
                if b.scales.is_empty() || b.scales.iter().any(|s| !(*s > 0.0)) {
                    return Err(CliError::Schema("bound.scales must be non-empty and positive".into()));
                }
            }
            Command::SharpnessExperiment => {
                let s = need(&self.sharpness, "sharpness", cmd)?;
                if !matches!(s, SharpnessConfig::CoefficientSums { .. }) {
                    grid()?;
                }
            }
            Command::Dk => {
                need(&self.dk, "dk", cmd)?;
            }
        }
        Ok(self)
    }

    pub fn command(&self) -> Command {
        self.command.expect("materialized config")
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn resolve(&self, p: &str) -> PathBuf {
        match &self.base_dir {
            Some(b) if Path::new(p).is_relative() => b.join(p),
            _ => PathBuf::from(p),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"command":"eval","grid":{"n":1,"L":8,"M":64},
        "symbol":{"id":"const","c":1},"functions":[{"kind":"random"},{"kind":"random"}]}"#;

    #[test]
    fn minimal_eval_config_gets_defaults() {
        let cfg = parse_config_str(MINIMAL).unwrap().materialize(None, None).unwrap();
        assert_eq!(cfg.seed, Some(0));
        assert_eq!(cfg.eval, Some(EvalConfig::default()));
        assert_eq!(cfg.output, Some(OutputConfig::default()));
        assert!(matches!(cfg.symbol, Some(SymbolSpec::Constant { c, c_im }) if c == 1.0 && c_im == 0.0));
        let echo = serde_json::to_value(&cfg).unwrap();
        assert_eq!(echo["functions"][0]["family"]["kind"], "trig-poly");
        assert_eq!(echo["eval"]["path"], "auto");
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse_config_str(r#"{"command":"eval","gird":{"n":1,"L":8,"M":64}}"#).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("gird"), "{err}");
    }

    #[test]
    fn nested_errors_carry_the_path() {
        let err = parse_config_str(r#"{"grid":{"n":1,"L":"eight","M":64}}"#).unwrap_err();
        assert!(err.to_string().contains("grid.L"), "{err}");
    }

    #[test]
    fn infinite_exponents_round_trip() {
        let e: ExponentConfig = serde_json::from_str(r#"{"q":["inf",2],"r":1}"#).unwrap();
        assert!(e.q[0].0.is_infinite());
        assert_eq!(serde_json::to_string(&e).unwrap(), r#"{"q":["inf",2.0],"r":1.0}"#);
        assert!(serde_json::from_str::<ExponentConfig>(r#"{"q":[0],"r":1}"#).is_err());
    }

    #[test]
    fn violating_exponents_are_rejected_with_witness() {
        let text = r#"{"command":"bound-experiment","grid":{"n":1,"L":8,"M":32},
            "symbol":{"id":"const","c":1},
            "exponents":{"q":[2,"inf"],"r":1,"s":[0.5,0.5,0.0]}}"#;
        let err = parse_config_str(text).unwrap().materialize(None, None).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("s_2 < n/2 - n/q_2"), "{err}");
    }

    #[test]
    fn command_mismatch_and_missing_sections() {
        let cfg = parse_config_str(MINIMAL).unwrap();
        assert!(cfg.clone().materialize(Some(Command::Norm), None).is_err());
        let err = parse_config_str(r#"{"command":"dk"}"#).unwrap().materialize(None, None).unwrap_err();
        assert!(err.to_string().contains("'dk'"));
    }

    #[test]
    fn seed_flag_overrides_config() {
        let cfg = parse_config_str(MINIMAL).unwrap().materialize(None, Some(42)).unwrap();
        assert_eq!(cfg.seed(), 42);
    }
}
