//! Experiment configuration and the generator file grammar.
//!
//! A config file is the JSON form of [`ExperimentConfig`]; every field is
//! optional and command-line flags override it. Generators can also come
//! from a plain text file (`--generators FILE`):
//!
//! ```text
//! # comments start with '#'
//! name   my-group        optional preset name
//! theta  1,2             optional root subset, comma separated indices
//! functional 1:1,2:0.5   optional ω-coefficients, k:c pairs
//! 4 0 0 0.25             one generator per line: d² numbers, row-major,
//! 2 1 1 1                separated by whitespace or commas
//! ```
//!
//! All generators must have the same d²; d is inferred from the count.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use transverse_core::cartan::{GroupElement, LinearFunctional, RootSubset, Tolerances};
use transverse_core::{presets, Functional, Preset};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: Option<String>,
    /// Inline generators as row-major d² lists; takes precedence over `preset`.
    pub generators: Option<Vec<Vec<f64>>>,
    pub name: Option<String>,
    pub theta: Option<String>,
    pub functional: Option<String>,
    pub radius: usize,
    /// Radii the exponent is estimated at; defaults to `[radius]`.
    pub radii: Option<Vec<usize>>,
    pub budget: usize,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            preset: None,
            generators: None,
            name: None,
            theta: None,
            functional: None,
            radius: 10,
            radii: None,
            budget: 1 << 22,
            seed: 0,
            tolerances: Tolerances::default(),
            out: PathBuf::from("td-out"),
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Reads a generator file into this config.
    pub fn read_generators(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let parsed = parse_generator_text(&text)?;
        self.generators = Some(parsed.generators);
        if parsed.name.is_some() {
            self.name = parsed.name;
        }
        if parsed.theta.is_some() {
            self.theta = parsed.theta;
        }
        if parsed.functional.is_some() {
            self.functional = parsed.functional;
        }
        Ok(())
    }

    pub fn radii(&self) -> Vec<usize> {
        self.radii.clone().unwrap_or_else(|| vec![self.radius])
    }

    /// The preset named or given inline, with θ overridden when set.
    pub fn resolve_preset(&self) -> Result<Preset, CliError> {
        let preset = if let Some(gens) = &self.generators {
            let elements = gens
                .iter()
                .map(|g| element_from_entries(g, &self.tolerances))
                .collect::<Result<Vec<_>, _>>()?;
            let d = elements[0].dim();
            let theta = match &self.theta {
                Some(t) => parse_theta(d, t)?,
                None => RootSubset::full(d),
            };
            let name = self.name.clone().unwrap_or_else(|| "inline".into());
            return Preset::new(name, elements, theta).map_err(config_err);
        } else if let Some(name) = &self.preset {
            presets::by_name(name).map_err(config_err)?
        } else {
            return Err(config_err("no preset or generators given"));
        };
        match &self.theta {
            Some(t) => Ok(preset.clone().with_theta(parse_theta(preset.dim(), t)?)),
            None => Ok(preset),
        }
    }

    /// The configured functional, or ω_k for the smallest k in θ.
    pub fn resolve_functional(&self, theta: &RootSubset) -> Result<Functional, CliError> {
        match &self.functional {
            Some(s) => LinearFunctional::parse(theta, s).map_err(config_err),
            None => LinearFunctional::omega(theta, theta.indices()[0]).map_err(config_err),
        }
    }
}

pub fn parse_theta(d: usize, s: &str) -> Result<RootSubset, CliError> {
    let theta = RootSubset::parse(d, s).map_err(|e| config_err(format!("theta {s:?}: {e}")))?;
    if theta.is_empty() {
        return Err(config_err(format!("theta {s:?} is empty")));
    }
    Ok(theta)
}

pub fn require_symmetric(theta: &RootSubset) -> Result<(), CliError> {
    theta
        .require_symmetric()
        .map_err(|_| config_err(format!("theta {theta} must be symmetric under k ↦ d − k for this command")))
}

/// Parses whitespace or comma separated numbers.
pub fn parse_numbers(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<f64>().map_err(|_| config_err(format!("not a number: {p:?}"))))
        .collect()
}

pub fn element_from_entries(entries: &[f64], tols: &Tolerances) -> Result<GroupElement<f64>, CliError> {
    let n = entries.len();
    let d = (n as f64).sqrt().round() as usize;
    if d < 2 || d * d != n {
        return Err(config_err(format!("{n} entries do not form a d×d matrix with d ≥ 2")));
    }
    GroupElement::from_matrix_with(DMatrix::from_row_slice(d, d, entries), tols).map_err(config_err)
}

#[derive(Debug, Default)]
pub struct GeneratorText {
    pub name: Option<String>,
    pub theta: Option<String>,
    pub functional: Option<String>,
    pub generators: Vec<Vec<f64>>,
}

pub fn parse_generator_text(text: &str) -> Result<GeneratorText, CliError> {
    let mut out = GeneratorText::default();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (head, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let rest = rest.trim().to_string();
        match head {
            "name" => out.name = Some(rest),
            "theta" => out.theta = Some(rest),
            "functional" => out.functional = Some(rest),
            _ => {
                let row = parse_numbers(line).map_err(|e| config_err(format!("line {}: {e}", no + 1)))?;
                if let Some(first) = out.generators.first() {
                    if first.len() != row.len() {
                        return Err(config_err(format!(
                            "line {}: {} entries, expected {}",
                            no + 1,
                            row.len(),
                            first.len()
                        )));
                    }
                }
                out.generators.push(row);
            }
        }
    }
    if out.generators.is_empty() {
        return Err(config_err("generator file has no generators"));
    }
    Ok(out)
}
