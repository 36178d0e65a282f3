//! JSON file formats for games, policies and reports.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{GameInstance, JointPolicy, SignalingPolicy, TieRule};
use crate::matrix::Matrix;

pub const GAME_FORMAT: &str = "persuade-game/1";
pub const POLICY_FORMAT: &str = "persuade-policy/1";

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse(path, &text)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| Error::Internal(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.display().to_string(),
            source,
        })?;
    }
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// `dir/name.json` → `dir/name.<suffix>.json`.
pub fn companion(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let stem = stem.strip_suffix(".game").unwrap_or(&stem).to_string();
    path.with_file_name(format!("{stem}.{suffix}.json"))
}

fn check_format(path: &Path, found: &str, expected: &str) -> Result<()> {
    if found != expected {
        return Err(Error::Parse {
            path: path.display().to_string(),
            message: format!("format '{found}', expected '{expected}'"),
        });
    }
    Ok(())
}

/// On-disk game. `tie` is the receiver rule the instance was built for; the
/// CLI's `--tie` flag overrides it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameFile {
    pub format: String,
    pub prior: Vec<f64>,
    pub signals: usize,
    pub receiver_utility: Matrix,
    pub sender_utilities: Vec<Matrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tie: Option<TieRule>,
}

impl GameFile {
    pub fn new(game: &GameInstance, tie: Option<TieRule>) -> Self {
        GameFile {
            format: GAME_FORMAT.into(),
            prior: game.prior().to_vec(),
            signals: game.signals(),
            receiver_utility: game.receiver_utility().clone(),
            sender_utilities: game.sender_utilities().to_vec(),
            tie,
        }
    }

    pub fn into_game(self) -> Result<(GameInstance, Option<TieRule>)> {
        let game = GameInstance::new(
            self.prior,
            self.signals,
            self.receiver_utility,
            self.sender_utilities,
        )?;
        if let Some(TieRule::FixedMap(map)) = &self.tie {
            map.validate(&game)?;
        }
        Ok((game, self.tie))
    }
}

pub fn save_game(path: &Path, game: &GameInstance, tie: Option<&TieRule>) -> Result<()> {
    write_json(path, &GameFile::new(game, tie.cloned()))
}

pub fn load_game(path: &Path) -> Result<(GameInstance, Option<TieRule>)> {
    let file: GameFile = read_json(path)?;
    game_from_file(path, file)
}

/// Parses a game document held in memory.
pub fn game_from_str(text: &str) -> Result<(GameInstance, Option<TieRule>)> {
    let path = Path::new("<memory>");
    let file: GameFile = parse(path, text)?;
    game_from_file(path, file)
}

fn game_from_file(path: &Path, file: GameFile) -> Result<(GameInstance, Option<TieRule>)> {
    check_format(path, &file.format, GAME_FORMAT)?;
    file.into_game().map_err(|e| match e {
        Error::Argument(m) => Error::Parse {
            path: path.display().to_string(),
            message: m,
        },
        other => other,
    })
}

fn parse<T: DeserializeOwned>(path: &Path, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn game_to_string(game: &GameInstance, tie: Option<&TieRule>) -> String {
    serde_json::to_string(&GameFile::new(game, tie.cloned())).expect("game serializes")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyFile {
    pub format: String,
    /// One `|Ω|×|S|` row-stochastic matrix per sender.
    pub policies: Vec<Matrix>,
}

pub fn save_policy(path: &Path, policy: &JointPolicy) -> Result<()> {
    write_json(
        path,
        &PolicyFile {
            format: POLICY_FORMAT.into(),
            policies: policy.iter().map(|p| p.matrix().clone()).collect(),
        },
    )
}

pub fn load_policy(path: &Path) -> Result<JointPolicy> {
    let file: PolicyFile = read_json(path)?;
    policy_from_file(path, file)
}

pub fn policy_from_str(text: &str) -> Result<JointPolicy> {
    let path = Path::new("<memory>");
    let file: PolicyFile = parse(path, text)?;
    policy_from_file(path, file)
}

pub fn policy_to_string(policy: &JointPolicy) -> String {
    serde_json::to_string(&PolicyFile {
        format: POLICY_FORMAT.into(),
        policies: policy.iter().map(|p| p.matrix().clone()).collect(),
    })
    .expect("policy serializes")
}

fn policy_from_file(path: &Path, file: PolicyFile) -> Result<JointPolicy> {
    check_format(path, &file.format, POLICY_FORMAT)?;
    let policies = file
        .policies
        .into_iter()
        .map(SignalingPolicy::new)
        .collect::<Result<Vec<_>>>()
        .map_err(|e| Error::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
    Ok(JointPolicy::new(policies))
}
