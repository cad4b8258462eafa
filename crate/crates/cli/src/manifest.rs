use std::path::Path;

use mfbsde::config::SolverConfig;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Everything needed to reproduce a run. Contains no timestamps, so the
/// same inputs give the same hash.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool_version: &'static str,
    pub scenario_path: String,
    pub scenario_sha256: String,
    pub solver: String,
    pub config: SolverConfig,
    pub seed: u64,
    pub outputs: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunManifest {
    pub fn new(scenario_path: &Path, scenario_text: &[u8], solver: &str, config: &SolverConfig) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION"),
            scenario_path: scenario_path.display().to_string(),
            scenario_sha256: sha256_hex(scenario_text),
            solver: solver.to_string(),
            config: config.clone(),
            seed: config.seed,
            outputs: Vec::new(),
        }
    }

    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("manifest serializes"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_depends_on_the_seed_only_through_the_config() {
        let cfg = SolverConfig::default();
        let a = RunManifest::new(Path::new("s.toml"), b"x", "local", &cfg);
        let b = RunManifest::new(Path::new("s.toml"), b"x", "local", &cfg);
        assert_eq!(a.hash(), b.hash());
        let c = RunManifest::new(Path::new("s.toml"), b"x", "local", &SolverConfig { seed: 9, ..cfg });
        assert_ne!(a.hash(), c.hash());
        assert_eq!(sha256_hex(b"").len(), 64);
    }
}
