use std::path::Path;

use nlmot::solver::SolveOptions;
use nlmot::{DiscreteMarginal, GainSpec, PieceMeasure};
use serde::{Deserialize, Deserializer};

use crate::CliError;

/// First marginal as given in the file: `{"atoms","weights"}` or `{"pieces"}`.
#[derive(Debug, Clone)]
pub enum FirstMarginal {
    Discrete(DiscreteMarginal),
    General(PieceMeasure),
}

impl FirstMarginal {
    pub fn measure(&self) -> PieceMeasure {
        match self {
            FirstMarginal::Discrete(d) => d.to_measure(),
            FirstMarginal::General(m) => m.clone(),
        }
    }

    /// The discrete form; a purely atomic `{"pieces"}` measure also qualifies.
    pub fn discrete(&self) -> Result<DiscreteMarginal, CliError> {
        match self {
            FirstMarginal::Discrete(d) => Ok(d.clone()),
            FirstMarginal::General(m) if m.is_discrete() => Ok(DiscreteMarginal::from_measure(m)?),
            FirstMarginal::General(_) => Err(CliError::Usage(
                "mu1 must be finitely supported for this command (use `approx` for diffuse mu1)".into(),
            )),
        }
    }
}

impl<'de> Deserialize<'de> for FirstMarginal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let value = serde_json::Value::deserialize(d)?;
        if value.get("atoms").is_some() {
            DiscreteMarginal::deserialize(value)
                .map(FirstMarginal::Discrete)
                .map_err(D::Error::custom)
        } else if value.get("pieces").is_some() {
            PieceMeasure::deserialize(value)
                .map(FirstMarginal::General)
                .map_err(D::Error::custom)
        } else {
            Err(D::Error::custom("mu1 needs either `atoms` and `weights` or `pieces`"))
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct InstanceOptions {
    #[serde(flatten)]
    pub solve: SolveOptions,
    /// Dyadic depths for `approx`.
    #[serde(default)]
    pub levels: Option<Vec<u32>>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Instance {
    pub mu1: FirstMarginal,
    pub mu2: PieceMeasure,
    pub gain: GainSpec,
    #[serde(default)]
    pub options: InstanceOptions,
}

impl Instance {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.display().to_string(), e))?;
        let inst: Instance = serde_json::from_str(&text)?;
        inst.mu1.measure().ensure_probability()?;
        inst.mu2.ensure_probability()?;
        Ok(inst)
    }
}
