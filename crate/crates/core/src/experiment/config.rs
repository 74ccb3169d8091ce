//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # objective 2 with the fixed Table 1 splits
//! objective = quad2
//! kappa = 100
//! cases = 1,2,3
//! case.7 = 0.3, 0.1, 0.2828
//! controllers = norm, innerOrth, innerOrthOptimalSplit
//! replications = 1000
//! out = quad2.csv
//! ```
//!
//! Blank lines and text after `#` are ignored. Keys may appear in any order;
//! a repeated key is an error. The README lists every key.

use std::collections::BTreeMap;
use std::path::PathBuf;

use super::{Case, ExperimentSpec, ObjectiveKind};
use crate::batch::{DecisionMode, ToleranceConfig};
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::sgd::ControllerKind;

/// An experiment plus where to write its outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub spec: ExperimentSpec,
    pub out: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

const KEYS: [&str; 16] = [
    "objective",
    "kappa",
    "cases",
    "strict",
    "controllers",
    "replications",
    "xi0",
    "seed",
    "budget",
    "b0",
    "b_max",
    "mode",
    "max_iterations",
    "step_size",
    "out",
    "svg",
];

fn invalid(msg: String) -> Error {
    Error::InvalidConfig(msg)
}

fn number<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| invalid(format!("`{key}`: cannot parse `{}`", v.trim())))
}

fn list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(|s| number(key, s)).collect()
}

fn boolean(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(invalid(format!(
            "`{key}`: expected true/false, got `{other}`"
        ))),
    }
}

pub fn parse_mode(v: &str) -> Result<DecisionMode> {
    match v.trim().to_ascii_lowercase().as_str() {
        "oracle" => Ok(DecisionMode::Oracle),
        "plugin" | "plug-in" => Ok(DecisionMode::Plugin),
        other => Err(invalid(format!("unknown mode `{other}`"))),
    }
}

pub fn parse_controllers(v: &str) -> Result<Vec<ControllerKind>> {
    v.split(',').map(ControllerKind::parse).collect()
}

/// Parses the configuration text into an experiment. Unset keys keep the
/// defaults of [`ExperimentSpec::new`].
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut entries: BTreeMap<String, String> = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| invalid(format!("line {}: expected `key = value`", n + 1)))?;
        let k = k.trim().to_string();
        let known = KEYS.contains(&k.as_str())
            || k.strip_prefix("case.")
                .is_some_and(|l| l.parse::<u32>().is_ok());
        if !known {
            return Err(invalid(format!("line {}: unknown key `{k}`", n + 1)));
        }
        if entries.insert(k.clone(), v.trim().to_string()).is_some() {
            return Err(invalid(format!("line {}: repeated key `{k}`", n + 1)));
        }
    }
    let get = |k: &str| entries.get(k).map(String::as_str);

    let kappa = get("kappa")
        .map(|v| number("kappa", v))
        .transpose()?
        .unwrap_or(100.0);
    let objective = ObjectiveKind::parse(get("objective").unwrap_or("quad3"), kappa)?;
    let mut spec = ExperimentSpec::new(objective);
    let strict = get("strict")
        .map(|v| boolean("strict", v))
        .transpose()?
        .unwrap_or(false);

    let mut cases: Vec<Case> = Vec::new();
    if let Some(v) = get("cases") {
        for label in list::<u32>("cases", v)? {
            cases.push(Case::table(label)?);
        }
    }
    for (k, v) in entries.iter().filter(|(k, _)| k.starts_with("case.")) {
        let label: u32 = k["case.".len()..].parse().expect("checked above");
        let t: Vec<f64> = list(k, v)?;
        let [e, th, nu] = t[..] else {
            return Err(invalid(format!("`{k}`: expected `epsilon, theta, nu`")));
        };
        let case = Case {
            label,
            tolerances: ToleranceConfig::coupled(e, th, nu)?,
        };
        match cases.iter_mut().find(|c| c.label == label) {
            Some(existing) => *existing = case,
            None => cases.push(case),
        }
    }
    if !cases.is_empty() {
        cases.sort_by_key(|c| c.label);
        spec.cases = cases;
    }
    if strict {
        for c in &mut spec.cases {
            c.tolerances = ToleranceConfig::strict(c.tolerances.epsilon, c.tolerances.theta)?;
        }
    }

    if let Some(v) = get("controllers") {
        spec.controllers = parse_controllers(v)?;
    }
    if let Some(v) = get("replications") {
        spec.replications = number("replications", v)?;
    }
    if let Some(v) = get("xi0") {
        spec.xi0 = Vector::new(list("xi0", v)?)?;
    }
    if let Some(v) = get("seed") {
        spec.base_seed = number("seed", v)?;
    }
    if let Some(v) = get("budget") {
        spec.budget = number("budget", v)?;
    }
    if let Some(v) = get("b0") {
        spec.b0 = number("b0", v)?;
    }
    if let Some(v) = get("b_max") {
        spec.limits.b_max = number("b_max", v)?;
    }
    if let Some(v) = get("mode") {
        spec.mode = parse_mode(v)?;
    }
    if let Some(v) = get("max_iterations") {
        spec.max_iterations = number("max_iterations", v)?;
    }
    if let Some(v) = get("step_size") {
        spec.step_size_override = Some(number("step_size", v)?);
    }
    spec.validate()?;
    Ok(RunConfig {
        spec,
        out: get("out").map(PathBuf::from),
        svg: get("svg").map(PathBuf::from),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_default_experiment() {
        let c = parse_config("# nothing\n\n").unwrap();
        assert_eq!(c.spec, ExperimentSpec::new(ObjectiveKind::Quad3));
        assert_eq!(c.out, None);
    }

    #[test]
    fn full_config() {
        let text = "
            objective = quad2   # second problem
            kappa = 50
            cases = 1, 3
            case.9 = 0.3, 0.1, 0.2828
            controllers = norm,innerOrthOptimalSplit
            replications = 10
            seed = 7
            budget = 5000
            b0 = 16
            mode = plugin
            step_size = 0.01
            out = a.csv
            svg = a.svg
        ";
        let c = parse_config(text).unwrap();
        let s = &c.spec;
        assert_eq!(s.objective, ObjectiveKind::Quad2 { kappa: 50.0 });
        assert_eq!(
            s.cases.iter().map(|c| c.label).collect::<Vec<_>>(),
            vec![1, 3, 9]
        );
        assert_eq!(
            s.controllers,
            vec![ControllerKind::Norm, ControllerKind::InnerOrthOptimalSplit]
        );
        assert_eq!(s.xi0.as_slice(), &[20.0, 50.0]);
        assert_eq!(
            (s.replications, s.base_seed, s.budget, s.b0),
            (10, 7, 5000, 16)
        );
        assert_eq!(s.mode, DecisionMode::Plugin);
        assert_eq!(s.step_size_override, Some(0.01));
        assert_eq!(c.out, Some(PathBuf::from("a.csv")));
        assert_eq!(c.svg, Some(PathBuf::from("a.svg")));
    }

    #[test]
    fn strict_recomputes_nu() {
        let c = parse_config("cases = 2\nstrict = true").unwrap();
        let t = c.spec.cases[0].tolerances;
        assert_eq!(t.nu, (0.25f64 - 0.0625).sqrt());
    }

    #[test]
    fn errors() {
        for bad in [
            "bogus = 1",
            "objective quad3",
            "seed = 1\nseed = 2",
            "cases = 5",
            "case.1 = 1, 0.1",
            "case.1 = 1, 0.1, 0.1",
            "replications = -3",
            "mode = psychic",
            "xi0 = 1, 2",
            "controllers = norm, sgd",
        ] {
            assert!(parse_config(bad).is_err(), "{bad}");
        }
    }
}
