use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::reference::ReferenceSpec;
use crate::field::{FieldModulus, BN254_MODULUS};
use crate::inputgen::{parse_bnf, shipped_grammar, Grammar};
use crate::mutator::StrategyWeights;
use crate::oracle::BugCategory;
use crate::regex::Alphabet;
use crate::transpiler::BugInjection;

/// Generator behind every seeded stream; recorded in configs and stats.
pub const RNG_ALGORITHM: &str = "rand_chacha 0.3 ChaCha8Rng";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config {path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Budget {
    /// Work units: regex iterations, or input assignments for witness campaigns.
    pub iterations: Option<u64>,
    /// Regex campaigns only: stop after this many (regex, string) pairs.
    pub pairs: Option<u64>,
    pub seconds: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphabetSpec {
    pub lo: u8,
    pub hi: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulusSpec {
    pub name: String,
    /// Decimal.
    pub p: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StringCounts {
    pub valid: usize,
    pub invalid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    /// Mutation iterations per probed honest run; 0 disables probing.
    pub iterations: u64,
    /// How many of each regex's strings get probed (valid and invalid alternate).
    pub strings_per_regex: usize,
    pub weights: StrategyWeights,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig { iterations: 2000, strings_per_regex: 2, weights: StrategyWeights::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    pub seed: u64,
    pub workers: usize,
    pub budget: Budget,
    /// `None` uses the grammar compiled into the library.
    pub grammar: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub alphabet: AlphabetSpec,
    pub max_len: usize,
    pub strings_per_regex: StringCounts,
    /// `kind:site`, for efficacy runs.
    pub injection: Option<String>,
    pub reference: ReferenceSpec,
    pub modulus: ModulusSpec,
    pub out_dir: PathBuf,
    pub regex_max_depth: u32,
    pub regex_max_len: usize,
    pub max_dfa_states: usize,
    pub probe: ProbeConfig,
    /// Units dispatched between deterministic feedback updates.
    pub batch_size: usize,
    /// Odds that a generated-regex slot re-runs a regex that raised coverage.
    pub requeue_probability: f64,
    pub flush_interval_seconds: f64,
    /// End the campaign as soon as a report of this category appears.
    pub stop_on: Option<BugCategory>,
    pub rng: String,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            seed: 0,
            workers: 1,
            budget: Budget { iterations: Some(100), pairs: None, seconds: None },
            grammar: None,
            corpus: None,
            alphabet: AlphabetSpec { lo: Alphabet::PRINTABLE.lo, hi: Alphabet::PRINTABLE.hi },
            max_len: 12,
            strings_per_regex: StringCounts { valid: 16, invalid: 16 },
            injection: None,
            reference: ReferenceSpec::Builtin,
            modulus: ModulusSpec { name: "bn254".into(), p: BN254_MODULUS.into() },
            out_dir: PathBuf::from("circfuzz-out"),
            regex_max_depth: 6,
            regex_max_len: 24,
            max_dfa_states: crate::transpiler::DEFAULT_MAX_DFA_STATES,
            probe: ProbeConfig::default(),
            batch_size: 8,
            requeue_probability: 0.25,
            flush_interval_seconds: 30.0,
            stop_on: None,
            rng: RNG_ALGORITHM.into(),
        }
    }
}

impl CampaignConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        let mut c: CampaignConfig =
            serde_json::from_str(&text).map_err(|source| ConfigError::Json { path: path.into(), source })?;
        // Relative grammar and corpus paths are taken from the config's directory.
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut c.grammar, &mut c.corpus].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(c)
    }

    /// Launch checks: positive budget and worker count, existing input files,
    /// parsable modulus, alphabet and injection.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.workers == 0 {
            return Err(invalid("workers must be at least 1"));
        }
        let b = &self.budget;
        let positive = b.iterations.is_some_and(|n| n > 0)
            || b.pairs.is_some_and(|n| n > 0)
            || b.seconds.is_some_and(|s| s > 0.0);
        if !positive || b.iterations == Some(0) || b.pairs == Some(0) || b.seconds.is_some_and(|s| s <= 0.0) {
            return Err(invalid("budget must set a positive iteration count, pair count, or duration"));
        }
        for (what, p) in [("grammar", &self.grammar), ("corpus", &self.corpus)] {
            if let Some(p) = p {
                if !p.is_file() {
                    return Err(invalid(format!("{what} file {} does not exist", p.display())));
                }
            }
        }
        if self.batch_size == 0 {
            return Err(invalid("batch_size must be at least 1"));
        }
        if self.rng != RNG_ALGORITHM {
            return Err(invalid(format!("rng is pinned to {RNG_ALGORITHM:?}, config asks for {:?}", self.rng)));
        }
        self.alphabet()?;
        self.field()?;
        self.bug_injection()?;
        Ok(())
    }

    pub fn alphabet(&self) -> Result<Alphabet, ConfigError> {
        Alphabet::new(self.alphabet.lo, self.alphabet.hi)
            .ok_or_else(|| invalid(format!("alphabet {:?} is empty", self.alphabet)))
    }

    pub fn field(&self) -> Result<FieldModulus, ConfigError> {
        FieldModulus::from_decimal(&self.modulus.p, &self.modulus.name)
            .map_err(|e| invalid(format!("modulus {}: {e}", self.modulus.name)))
    }

    pub fn bug_injection(&self) -> Result<Option<BugInjection>, ConfigError> {
        self.injection
            .as_deref()
            .map(|s| s.parse::<BugInjection>().map_err(|e| invalid(format!("injection {s:?}: {e}"))))
            .transpose()
    }

    pub fn load_grammar(&self) -> Result<Grammar, ConfigError> {
        match &self.grammar {
            None => Ok(shipped_grammar()),
            Some(p) => {
                let text =
                    std::fs::read_to_string(p).map_err(|source| ConfigError::Read { path: p.clone(), source })?;
                parse_bnf(&text).map_err(|e| invalid(format!("grammar {}: {e}", p.display())))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = CampaignConfig::default();
        c.validate().unwrap();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<CampaignConfig>(&text).unwrap(), c);
    }

    #[test]
    fn shipped_default_config_loads() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../config/campaign.default.json");
        let c = CampaignConfig::from_file(Path::new(path)).unwrap();
        assert_eq!(c.rng, RNG_ALGORITHM);
        assert_eq!(c.field().unwrap(), FieldModulus::bn254());
    }

    #[test]
    fn bad_configs_are_rejected() {
        let bad = |f: fn(&mut CampaignConfig)| {
            let mut c = CampaignConfig::default();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(|c| c.workers = 0));
        assert!(bad(|c| c.budget = Budget::default()));
        assert!(bad(|c| c.budget.iterations = Some(0)));
        assert!(bad(|c| c.corpus = Some("/nonexistent/corpus.txt".into())));
        assert!(bad(|c| c.modulus.p = "15".into()));
        assert!(bad(|c| c.injection = Some("drop_everything".into())));
        assert!(bad(|c| c.alphabet = AlphabetSpec { lo: b'z', hi: b'a' }));
        assert!(serde_json::from_str::<CampaignConfig>(r#"{"sed": 1}"#).is_err());
    }
}
