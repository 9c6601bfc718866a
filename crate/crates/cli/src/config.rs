//! Runtime configuration. Every knob has an explicit default; a JSON file
//! (via --config or TMTEST_CONFIG) overrides them. The sha256 of the
//! effective configuration is stamped into every report so runs can be
//! matched to the settings that produced them.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Letters of the alphabet, designated letter first.
    pub alphabet: String,
    /// Per-question cycle budget for machine participants.
    pub budget: u64,
    /// Arena step cap (questions per test run).
    pub step_cap: u64,
    /// Cycle budget of the recognition oracle.
    pub pi_budget: u64,
    /// At most this many certified zoo machines form the recognition universe.
    pub pi_universe: usize,
    /// Highest enumeration index the session tester searches per question.
    pub search_cap: u64,
    /// Per-question configuration-space cap for memory-class enumeration.
    pub space_cap: u64,
    /// Master seed for randomized runs.
    pub seed: u64,
    /// Default Monte-Carlo trial count.
    pub trials: u64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            alphabet: "ab".into(),
            budget: 10_000,
            step_cap: 200,
            pi_budget: 10_000,
            pi_universe: 64,
            search_cap: 5_000,
            space_cap: 10_000_000,
            seed: 0,
            trials: 2_000,
        }
    }
}

impl Config {
    /// Loads the configuration: explicit path, else $TMTEST_CONFIG, else
    /// the built-in defaults.
    pub fn load(explicit: Option<&Path>) -> Result<Config, String> {
        let path: Option<PathBuf> = match explicit {
            Some(p) => Some(p.to_path_buf()),
            None => std::env::var_os("TMTEST_CONFIG").map(PathBuf::from),
        };
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Hex digest of the effective settings; field order is fixed by the
    /// struct, so equal settings hash equally.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(self).expect("config serializes");
        let mut h = Sha256::new();
        h.update(canon.as_bytes());
        format!("{:x}", h.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_hash_stably() {
        let a = Config::default();
        let b = Config::default();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn overrides_change_the_hash() {
        let mut c = Config::default();
        c.budget = 99;
        assert_ne!(c.hash(), Config::default().hash());
    }

    #[test]
    fn partial_files_fill_in_defaults() {
        let c: Config = serde_json::from_str(r#"{"step_cap": 50}"#).unwrap();
        assert_eq!(c.step_cap, 50);
        assert_eq!(c.budget, Config::default().budget);
        assert!(serde_json::from_str::<Config>(r#"{"bogus": 1}"#).is_err());
    }
}
