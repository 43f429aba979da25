use std::fmt;
use std::str::FromStr;

use crate::design::Target;
use crate::error::{Error, Result};
use crate::estimators::EstimatorKind;
use crate::synthpop::{LinkageModel, PopulationModel};

/// A column of the simulation tables: an estimator plus its weight variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Column {
    Ht,
    Ideal,
    Sub,
    /// PI with multiplicity weights `1/m_ℓ`.
    PiM,
    /// PI with the generator's `q` incidence weights.
    PiQ,
    Pri,
    Sbl,
    /// SRI with `q` on the best link.
    SriQ,
    Sls,
}

/// Default column order of the summary tables.
pub const TABLE_COLUMNS: [Column; 8] = [
    Column::Ht,
    Column::Ideal,
    Column::Sub,
    Column::PiM,
    Column::PiQ,
    Column::Sbl,
    Column::SriQ,
    Column::Sls,
];

impl Column {
    pub fn label(self) -> &'static str {
        match self {
            Column::Ht => "HT",
            Column::Ideal => "Ideal",
            Column::Sub => "Sub",
            Column::PiM => "PI-m",
            Column::PiQ => "PI-q",
            Column::Pri => "PRI",
            Column::Sbl => "SBL",
            Column::SriQ => "SRI-q",
            Column::Sls => "SLS",
        }
    }

    pub fn estimator(self) -> EstimatorKind {
        match self {
            Column::Ht => EstimatorKind::Ht,
            Column::Ideal => EstimatorKind::Ideal,
            Column::Sub => EstimatorKind::Sub,
            Column::PiM | Column::PiQ => EstimatorKind::Pi,
            Column::Pri => EstimatorKind::Pri,
            Column::Sbl => EstimatorKind::Sbl,
            Column::SriQ => EstimatorKind::Sri,
            Column::Sls => EstimatorKind::Sls,
        }
    }
}

impl fmt::Display for Column {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Column {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "ht" => Column::Ht,
            "ideal" | "greg" => Column::Ideal,
            "sub" => Column::Sub,
            "pi-m" | "pim" => Column::PiM,
            "pi-q" | "piq" | "pi" => Column::PiQ,
            "pri" | "pri-q" => Column::Pri,
            "sbl" => Column::Sbl,
            "sri-q" | "sriq" | "sri" => Column::SriQ,
            "sls" => Column::Sls,
            _ => return Err(Error::InvalidParameter(format!("unknown estimator '{s}'"))),
        })
    }
}

/// One simulation block.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub population_size: usize,
    pub sample_size: usize,
    pub replicates: usize,
    pub p: [f64; 3],
    pub p_match: f64,
    pub p_best_match: f64,
    /// Reverse weight on the best link.
    pub q: f64,
    /// Incidence weight on the favoured unit of PI-q.
    pub q_pi: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub estimators: Vec<Column>,
    pub seed: u64,
    pub target: Target,
    /// Regenerate population and linkage in every replicate.
    pub redraw: bool,
    pub false_link_tilt: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "scenario".into(),
            population_size: 5000,
            sample_size: 100,
            replicates: 2000,
            p: [0.2, 0.4, 0.4],
            p_match: 0.4,
            p_best_match: 0.4,
            q: 0.4,
            q_pi: 0.4,
            sigma: 1.5,
            gamma: 0.0,
            estimators: TABLE_COLUMNS.to_vec(),
            seed: 1,
            target: Target::Mean,
            redraw: false,
            false_link_tilt: 0.0,
        }
    }
}

impl ScenarioConfig {
    pub fn population_model(&self) -> Result<PopulationModel> {
        PopulationModel::new(self.population_size, self.sigma, self.gamma)
    }

    pub fn linkage_model(&self) -> Result<LinkageModel> {
        LinkageModel::new(self.p, self.p_match, self.p_best_match)?.with_tilt(self.false_link_tilt)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates < 2 {
            return Err(Error::InvalidParameter(format!(
                "K = {} replicates; at least 2 are needed",
                self.replicates
            )));
        }
        if self.sample_size < 2 || self.sample_size > self.population_size {
            return Err(Error::InvalidParameter(format!(
                "sample size {} must be in 2..={}",
                self.sample_size, self.population_size
            )));
        }
        for (name, q) in [("q", self.q), ("q_pi", self.q_pi)] {
            if !(q > 0.0 && q <= 1.0) {
                return Err(Error::InvalidParameter(format!("{name} = {q} is outside (0, 1]")));
            }
        }
        self.population_model()?;
        self.linkage_model()?;
        Ok(())
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value.parse().map_err(|_| Error::Parse {
        line,
        message: format!("key '{key}': cannot parse '{value}'"),
    })
}

fn apply(cfg: &mut ScenarioConfig, q_pi_set: &mut bool, key: &str, value: &str, line: usize) -> Result<()> {
    match key {
        "N" | "population_size" => cfg.population_size = parse_value(key, value, line)?,
        "n" | "sample_size" => cfg.sample_size = parse_value(key, value, line)?,
        "K" | "replicates" => cfg.replicates = parse_value(key, value, line)?,
        "p" => {
            let parts = value
                .split(',')
                .map(|v| parse_value::<f64>(key, v.trim(), line))
                .collect::<Result<Vec<_>>>()?;
            cfg.p = parts.try_into().map_err(|_| Error::Parse {
                line,
                message: format!("key '{key}': expected three proportions"),
            })?;
        }
        "p_M" | "p_match" => cfg.p_match = parse_value(key, value, line)?,
        "p_ML" | "p_best_match" => cfg.p_best_match = parse_value(key, value, line)?,
        "q" => {
            cfg.q = parse_value(key, value, line)?;
            if !*q_pi_set {
                cfg.q_pi = cfg.q;
            }
        }
        "q_pi" => {
            cfg.q_pi = parse_value(key, value, line)?;
            *q_pi_set = true;
        }
        "sigma" => cfg.sigma = parse_value(key, value, line)?,
        "gamma" => cfg.gamma = parse_value(key, value, line)?,
        "seed" => cfg.seed = parse_value(key, value, line)?,
        "tilt" | "false_link_tilt" => cfg.false_link_tilt = parse_value(key, value, line)?,
        "redraw" => cfg.redraw = parse_value(key, value, line)?,
        "target" => {
            cfg.target = match value.to_ascii_lowercase().as_str() {
                "mean" => Target::Mean,
                "total" => Target::Total,
                _ => {
                    return Err(Error::Parse {
                        line,
                        message: format!("key '{key}': expected 'mean' or 'total', got '{value}'"),
                    })
                }
            }
        }
        "estimators" => {
            cfg.estimators = value
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<Column>().map_err(|e| Error::Parse {
                        line,
                        message: format!("key '{key}': {e}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
        }
        _ => {
            return Err(Error::Parse {
                line,
                message: format!("unknown key '{key}'"),
            })
        }
    }
    Ok(())
}

/// Parses a scenario file.
///
/// Lines are `key = value`; `#` starts a comment. Keys before the first
/// `[name]` header are defaults for every block. A file without headers is a
/// single block named `scenario`.
pub fn parse_scenarios(text: &str) -> Result<Vec<ScenarioConfig>> {
    let mut defaults = ScenarioConfig::default();
    let mut defaults_q_pi = false;
    let mut blocks: Vec<(ScenarioConfig, bool)> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name.strip_suffix(']').map(str::trim).filter(|n| !n.is_empty());
            let name = name.ok_or_else(|| Error::Parse {
                line,
                message: format!("malformed block header '{content}'"),
            })?;
            if blocks.iter().any(|(b, _)| b.name == name) {
                return Err(Error::Parse {
                    line,
                    message: format!("block '{name}' defined twice"),
                });
            }
            let mut block = defaults.clone();
            block.name = name.to_string();
            blocks.push((block, defaults_q_pi));
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
            line,
            message: format!("expected 'key = value', got '{content}'"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        match blocks.last_mut() {
            Some((block, q_pi_set)) => apply(block, q_pi_set, key, value, line)?,
            None => apply(&mut defaults, &mut defaults_q_pi, key, value, line)?,
        }
    }
    if blocks.is_empty() {
        blocks.push((defaults, defaults_q_pi));
    }
    Ok(blocks.into_iter().map(|(b, _)| b).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_blocks() {
        let text = "\
# shared
N = 1000
n = 50
K = 10
seed = 7

[a]
q = 0.7
estimators = HT, SRI-q

[b]
q = 0.9
q_pi = 0.5
target = total
";
        let blocks = parse_scenarios(text).unwrap();
        assert_eq!(blocks.len(), 2);
        assert_eq!(blocks[0].name, "a");
        assert_eq!(blocks[0].population_size, 1000);
        assert_eq!(blocks[0].q_pi, 0.7);
        assert_eq!(blocks[0].estimators, vec![Column::Ht, Column::SriQ]);
        assert_eq!(blocks[1].q_pi, 0.5);
        assert_eq!(blocks[1].target, Target::Total);
        assert_eq!(blocks[1].estimators, TABLE_COLUMNS.to_vec());
        assert!(blocks.iter().all(|b| b.validate().is_ok()));
    }

    #[test]
    fn errors_name_line_and_key() {
        let err = parse_scenarios("N = 10\nbogus = 3\n").unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("bogus"));
            }
            other => panic!("{other:?}"),
        }
        let err = parse_scenarios("p = 0.5, 0.5\n").unwrap_err();
        assert!(err.to_string().contains("'p'"));
        let err = parse_scenarios("[x]\nestimators = HT, XYZ\n").unwrap_err();
        assert!(err.to_string().contains("line 2"));
        assert!(parse_scenarios("[x\n").is_err());
        assert!(parse_scenarios("[x]\n[x]\n").is_err());
    }

    #[test]
    fn empty_estimator_list() {
        let blocks = parse_scenarios("estimators =\n").unwrap();
        assert!(blocks[0].estimators.is_empty());
    }

    #[test]
    fn validation() {
        let cfg = ScenarioConfig {
            replicates: 1,
            ..ScenarioConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = ScenarioConfig {
            p_best_match: 0.5,
            ..ScenarioConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
