//! Task definitions: one declarative TOML file per scenario.
//!
//! Eight tasks ship with the crate, one per benchmark slot. Each file names
//! its family and carries exactly the budget fields that family needs:
//!
//! | family | required           | forbidden                         |
//! |--------|--------------------|-----------------------------------|
//! | EoW    | -                  | `av_budget`, `c_max`, `as_weights`|
//! | MoC    | `c_max`, >= 2 waves| `av_budget`, `as_weights`         |
//! | PF     | `av_budget`        | `c_max`, `as_weights`             |
//! | AS     | `av_budget`, `as_weights` | `c_max`                    |

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::kit::{standard_team, AllyKit, EnemySpec};
use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    EoW,
    MoC,
    PF,
    AS,
}

impl Family {
    pub fn long_name(self) -> &'static str {
        match self {
            Family::EoW => "Echo of War",
            Family::MoC => "Memory of Chaos",
            Family::PF => "Pure Fiction",
            Family::AS => "Apocalyptic Shadow",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Engine constants. Defaults: `av_base` 10000, 3 starting skill points,
/// cap 5, break delay 25% of a turn, broken targets take 10% more damage,
/// allies gain 10 energy when hit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub av_base: f64,
    pub sp_initial: u32,
    pub sp_cap: u32,
    pub break_delay: f64,
    pub break_vulnerability: f64,
    pub energy_on_hit: f64,
    /// Fraction of each ally's energy meter filled at battle start.
    pub initial_energy: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            av_base: 10_000.0,
            sp_initial: 3,
            sp_cap: 5,
            break_delay: 0.25,
            break_vulnerability: 0.10,
            energy_on_hit: 10.0,
            initial_energy: 0.5,
        }
    }
}

/// Reward scaling constants. Unset values are derived:
/// `dmg_ref` = largest enemy max HP / 20, `r_min` = -0.5 * step_budget,
/// `r_max` = `min_win_steps` (every step at the maximum reward of 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardCalibration {
    pub dmg_ref: Option<f64>,
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
    pub min_win_steps: u32,
}

impl Default for RewardCalibration {
    fn default() -> Self {
        Self {
            dmg_ref: None,
            r_min: None,
            r_max: None,
            min_win_steps: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsWeights {
    pub w_hp: f64,
    pub w_av: f64,
}

impl Default for AsWeights {
    fn default() -> Self {
        Self {
            w_hp: 30.0,
            w_av: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Wave {
    pub enemies: Vec<EnemySpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_id: u8,
    pub name: String,
    pub family: Family,
    #[serde(default)]
    pub notes: Option<String>,
    /// Metadata only: the original activity disables outside assistance.
    #[serde(default)]
    pub no_assistance: bool,
    pub step_budget: u32,
    #[serde(default)]
    pub av_budget: Option<f64>,
    #[serde(default)]
    pub c_max: Option<u32>,
    #[serde(default)]
    pub as_weights: Option<AsWeights>,
    pub seed_base: u64,
    #[serde(default)]
    pub engine: EngineConfig,
    #[serde(default)]
    pub reward: RewardCalibration,
    #[serde(default = "standard_team")]
    pub allies: Vec<AllyKit>,
    pub waves: Vec<Wave>,
}

pub const MAX_ENEMIES_PER_WAVE: usize = 5;
pub const TEAM_SIZE: usize = 4;
pub const MAX_SP_CAP: u32 = 8;

fn err(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

fn positive(x: f64) -> bool {
    x > 0.0
}

impl TaskSpec {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let spec: TaskSpec = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(1..=8).contains(&self.task_id) {
            return Err(err("task_id", "must be in 1..=8"));
        }
        if self.step_budget == 0 {
            return Err(err("step_budget", "must be positive"));
        }
        match self.family {
            Family::EoW => {
                self.forbid_av_budget()?;
                self.forbid_c_max()?;
                self.forbid_as_weights()?;
            }
            Family::MoC => {
                if self.c_max.is_none() {
                    return Err(err("c_max", "required for MoC tasks"));
                }
                if self.waves.len() < 2 {
                    return Err(err("waves", "MoC tasks need at least two waves"));
                }
                self.forbid_av_budget()?;
                self.forbid_as_weights()?;
            }
            Family::PF => {
                self.require_av_budget()?;
                self.forbid_c_max()?;
                self.forbid_as_weights()?;
            }
            Family::AS => {
                self.require_av_budget()?;
                if self.as_weights.is_none() {
                    return Err(err("as_weights", "required for AS tasks"));
                }
                self.forbid_c_max()?;
            }
        }

        let e = &self.engine;
        if !positive(e.av_base) {
            return Err(err("engine.av_base", "must be positive"));
        }
        if e.sp_cap == 0 || e.sp_cap > MAX_SP_CAP {
            return Err(err("engine.sp_cap", format!("must be in 1..={MAX_SP_CAP}")));
        }
        if e.sp_initial > e.sp_cap {
            return Err(err("engine.sp_initial", "exceeds sp_cap"));
        }
        if e.break_delay < 0.0 || e.break_vulnerability < 0.0 || e.energy_on_hit < 0.0 {
            return Err(err(
                "engine",
                "break and energy constants must be non-negative",
            ));
        }
        if !(0.0..=1.0).contains(&e.initial_energy) {
            return Err(err("engine.initial_energy", "must be in [0, 1]"));
        }

        if self.allies.len() != TEAM_SIZE {
            return Err(err(
                "allies",
                format!("exactly {TEAM_SIZE} ally kits required"),
            ));
        }
        for (i, kit) in self.allies.iter().enumerate() {
            let f = |name: &str| format!("allies[{i}].{name}");
            if !positive(kit.max_hp) {
                return Err(err(&f("max_hp"), "must be positive"));
            }
            if !positive(kit.speed) {
                return Err(err(&f("speed"), "must be positive"));
            }
            if !positive(kit.energy_max) {
                return Err(err(&f("energy_max"), "must be positive"));
            }
            if !(0.0..=1.0).contains(&kit.crit_rate) {
                return Err(err(&f("crit_rate"), "must be in [0, 1]"));
            }
        }

        if self.waves.is_empty() {
            return Err(err("waves", "at least one wave required"));
        }
        for (w, wave) in self.waves.iter().enumerate() {
            if wave.enemies.is_empty() || wave.enemies.len() > MAX_ENEMIES_PER_WAVE {
                return Err(err(
                    &format!("waves[{w}].enemies"),
                    format!("1..={MAX_ENEMIES_PER_WAVE} enemies per wave"),
                ));
            }
            for (i, en) in wave.enemies.iter().enumerate() {
                let f = |name: &str| format!("waves[{w}].enemies[{i}].{name}");
                if !positive(en.max_hp) {
                    return Err(err(&f("max_hp"), "must be positive"));
                }
                if !positive(en.speed) {
                    return Err(err(&f("speed"), "must be positive"));
                }
                if !positive(en.toughness) {
                    return Err(err(&f("toughness"), "must be positive"));
                }
                if en.attacks.is_empty() {
                    return Err(err(&f("attacks"), "at least one attack required"));
                }
            }
        }
        Ok(())
    }

    fn require_av_budget(&self) -> Result<(), ConfigError> {
        match self.av_budget {
            Some(b) if b > 0.0 => Ok(()),
            Some(_) => Err(err("av_budget", "must be positive")),
            None => Err(err(
                "av_budget",
                format!("required for {} tasks", self.family),
            )),
        }
    }

    fn forbid_av_budget(&self) -> Result<(), ConfigError> {
        match self.av_budget {
            Some(_) => Err(err(
                "av_budget",
                format!("not allowed for {} tasks", self.family),
            )),
            None => Ok(()),
        }
    }

    fn forbid_c_max(&self) -> Result<(), ConfigError> {
        match self.c_max {
            Some(_) => Err(err(
                "c_max",
                format!("not allowed for {} tasks", self.family),
            )),
            None => Ok(()),
        }
    }

    fn forbid_as_weights(&self) -> Result<(), ConfigError> {
        match self.as_weights {
            Some(_) => Err(err(
                "as_weights",
                format!("not allowed for {} tasks", self.family),
            )),
            None => Ok(()),
        }
    }

    /// AV limit that ends the battle, if the family has one. MoC derives it
    /// from the cycle budget: cycle `c` ends at `50 + 100c` AV.
    pub fn effective_av_budget(&self) -> Option<f64> {
        match self.family {
            Family::EoW => None,
            Family::MoC => self.c_max.map(|c| 50.0 + 100.0 * f64::from(c)),
            Family::PF | Family::AS => self.av_budget,
        }
    }

    pub fn dmg_ref(&self) -> f64 {
        self.reward.dmg_ref.unwrap_or_else(|| {
            let biggest = self
                .waves
                .iter()
                .flat_map(|w| w.enemies.iter())
                .map(|e| e.max_hp)
                .fold(0.0, f64::max);
            biggest / 20.0
        })
    }

    pub fn reward_bounds(&self) -> (f64, f64) {
        let r_min = self
            .reward
            .r_min
            .unwrap_or(-0.5 * f64::from(self.step_budget));
        let r_max = self
            .reward
            .r_max
            .unwrap_or(f64::from(self.reward.min_win_steps));
        (r_min, r_max)
    }

    pub fn as_weights_or_default(&self) -> AsWeights {
        self.as_weights.unwrap_or_default()
    }
}

const BUILTIN_SOURCES: [(&str, &str); 8] = [
    (
        "01_cocolia.toml",
        include_str!("../../tasks/01_cocolia.toml"),
    ),
    (
        "02_phantylia.toml",
        include_str!("../../tasks/02_phantylia.toml"),
    ),
    (
        "03_swarm_king.toml",
        include_str!("../../tasks/03_swarm_king.toml"),
    ),
    (
        "04_theater.toml",
        include_str!("../../tasks/04_theater.toml"),
    ),
    (
        "05_feixiao.toml",
        include_str!("../../tasks/05_feixiao.toml"),
    ),
    (
        "06_xianzhou.toml",
        include_str!("../../tasks/06_xianzhou.toml"),
    ),
    (
        "07_cliched.toml",
        include_str!("../../tasks/07_cliched.toml"),
    ),
    (
        "08_stardevourer.toml",
        include_str!("../../tasks/08_stardevourer.toml"),
    ),
];

/// The eight shipped tasks, ordered by id.
pub fn builtin_tasks() -> Vec<TaskSpec> {
    BUILTIN_SOURCES
        .iter()
        .map(|(file, text)| {
            TaskSpec::from_toml(text)
                .unwrap_or_else(|e| panic!("shipped task {file} is invalid: {e}"))
        })
        .collect()
}

pub fn builtin_task(task_id: u8) -> Option<TaskSpec> {
    builtin_tasks().into_iter().find(|t| t.task_id == task_id)
}

/// Raw TOML of the shipped tasks, for `validate` and documentation.
pub fn builtin_sources() -> &'static [(&'static str, &'static str)] {
    &BUILTIN_SOURCES
}
