//! Versioned JSON layouts (`layouts/*.json`, schema in `layouts/layout.schema.json`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LAYOUT_VERSION: u32 = 1;

const KITCHEN_DEFAULT: &str = include_str!("../../layouts/kitchen_lite.json");
const TILT_DEFAULT: &str = include_str!("../../layouts/tilt_maze.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KitchenRewards {
    pub soup: f64,
    pub step_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KitchenStart {
    /// Start with a random number of onions (or a cooking soup) in the pot.
    pub random_pot: bool,
    /// Chance that each staging counter starts with an onion on it.
    pub staged_onion_prob: f64,
}

impl Default for KitchenStart {
    fn default() -> Self {
        Self {
            random_pot: false,
            staged_onion_prob: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KitchenLayout {
    pub grid: Vec<String>,
    pub staging_row: usize,
    /// Idle cell for each role's expert.
    pub rest: [[usize; 2]; 2],
    pub pot_capacity: u8,
    pub cook_time: u8,
    pub segment_length: usize,
    pub gamma: f64,
    pub rewards: KitchenRewards,
    #[serde(default)]
    pub start: KitchenStart,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiltRewards {
    pub exit: f64,
    pub step_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiltLayout {
    pub width: usize,
    pub segment_length: usize,
    pub gamma: f64,
    pub rewards: TiltRewards,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvSpec {
    KitchenLite(KitchenLayout),
    TiltMaze(TiltLayout),
}

#[derive(Serialize, Deserialize)]
struct LayoutFile {
    version: u32,
    #[serde(flatten)]
    env: EnvSpec,
}

impl EnvSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: LayoutFile = serde_json::from_str(text)?;
        if file.version != LAYOUT_VERSION {
            return Err(Error::Config(format!(
                "layout version {} is not supported (expected {LAYOUT_VERSION})",
                file.version
            )));
        }
        Ok(file.env)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&LayoutFile {
            version: LAYOUT_VERSION,
            env: self.clone(),
        })?)
    }

    pub fn kitchen_default() -> Self {
        Self::from_json(KITCHEN_DEFAULT).expect("bundled kitchen layout parses")
    }

    pub fn tilt_default() -> Self {
        Self::from_json(TILT_DEFAULT).expect("bundled tilt layout parses")
    }

    /// Bundled layout by kind name.
    pub fn builtin(kind: &str) -> Result<Self> {
        match kind {
            "kitchen_lite" => Ok(Self::kitchen_default()),
            "tilt_maze" => Ok(Self::tilt_default()),
            other => Err(Error::Config(format!("unknown environment `{other}`"))),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            EnvSpec::KitchenLite(_) => "kitchen_lite",
            EnvSpec::TiltMaze(_) => "tilt_maze",
        }
    }
}
