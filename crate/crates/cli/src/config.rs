use gcmf::group_core::{GroupSpec, SubgroupDecomposition};
use gcmf::nonabelian_d8::JoinKind;
use gcmf::proj_reps::CocycleClass;
use serde::Deserialize;
use std::path::{Path, PathBuf};

/// Raw TOML config. Every key is optional; each command checks what it needs.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub group: Option<Vec<(u64, u32)>>,
    pub subgroup: Option<Vec<u32>>,
    pub mu: Option<Vec<Vec<usize>>>,
    pub n: Option<usize>,
    pub mode: Option<ModeName>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub kind: Option<String>,
    pub l: Option<usize>,
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    #[default]
    Enumerate,
    Sample,
}

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_TRIALS: usize = 1000;

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))
    }

    pub fn group(&self) -> Result<GroupSpec, String> {
        let factors = self.group.as_ref().ok_or("missing key `group`")?;
        GroupSpec::new(factors).map_err(|e| format!("group: {e}"))
    }

    /// The subgroup defaults to the whole group.
    pub fn subgroup(&self, g: &GroupSpec) -> Result<SubgroupDecomposition, String> {
        match &self.subgroup {
            None => Ok(SubgroupDecomposition::whole(g)),
            Some(e) => SubgroupDecomposition::new(g, e).map_err(|e| format!("subgroup: {e}")),
        }
    }

    /// The class defaults to zero.
    pub fn class(&self, sub: &SubgroupDecomposition) -> Result<CocycleClass, String> {
        match &self.mu {
            None => Ok(CocycleClass::zero(sub.h_group())),
            Some(mu) => CocycleClass::new(sub.h_group(), mu.clone()).map_err(|e| format!("mu: {e}")),
        }
    }

    pub fn kind(&self) -> Result<JoinKind, String> {
        match &self.kind {
            None => Ok(JoinKind::Spt),
            Some(k) => k.parse().map_err(|e| format!("kind: {e}")),
        }
    }

    pub fn n(&self, default: usize) -> Result<usize, String> {
        let n = self.n.unwrap_or(default);
        if n == 0 {
            return Err("n must be positive".into());
        }
        Ok(n)
    }
}
