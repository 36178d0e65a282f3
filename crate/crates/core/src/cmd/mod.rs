use std::fs;
use std::path::{Path, PathBuf};

use persuade::io::write_json;
use persuade::{Error, GameInstance, Result, TieRule};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::{Cli, Command, TieArg};

mod exact;
mod gen;
mod learn;
mod reduce;
pub mod report;

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_SPEC: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_REFUTED: u8 = 10;

pub enum Outcome {
    Success,
    Refuted,
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => EXIT_IO,
        _ => EXIT_SPEC,
    }
}

pub fn run(cli: &Cli, argv: &[String]) -> Result<Outcome> {
    if cli.threads == 0 {
        return Err(Error::Argument("--threads must be at least 1".into()));
    }
    if !(cli.eps > 0.0) || !cli.eps.is_finite() {
        return Err(Error::Argument("--eps must be positive".into()));
    }
    let ctx = Context { cli, argv };
    match &cli.command {
        Command::Gen(kind) => gen::run(&ctx, kind),
        Command::Exact(kind) => exact::run(&ctx, kind),
        Command::Learn(args) => learn::run(&ctx, args),
        Command::Reduce(kind) => reduce::run(&ctx, kind),
        Command::Report(args) => report::run(&ctx, args),
    }
}

pub struct Context<'a> {
    pub cli: &'a Cli,
    pub argv: &'a [String],
}

impl Context<'_> {
    pub fn out_or(&self, default: &str) -> PathBuf {
        self.cli
            .out
            .clone()
            .unwrap_or_else(|| PathBuf::from(default))
    }

    /// Flag first, then the rule stored with the game, then lexicographic.
    pub fn tie_for(&self, game: &GameInstance, stored: Option<TieRule>) -> TieRule {
        match self.cli.tie {
            Some(TieArg::Lex) => TieRule::Lexicographic,
            Some(TieArg::SenderFavoring) => TieRule::sender_favoring(game.n_senders()),
            None => stored.unwrap_or(TieRule::Lexicographic),
        }
    }

    /// Writes the run manifest to `path`.
    pub fn manifest(&self, path: &Path, inputs: &[&Path], config: serde_json::Value) -> Result<()> {
        let inputs = inputs
            .iter()
            .map(|p| {
                let bytes = fs::read(p).map_err(|source| Error::Io {
                    path: p.display().to_string(),
                    source,
                })?;
                Ok(InputDigest {
                    path: p.display().to_string(),
                    sha256: hex::encode(Sha256::digest(&bytes)),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        write_json(
            path,
            &Manifest {
                tool: "persuade",
                version: env!("CARGO_PKG_VERSION"),
                command: self.argv.to_vec(),
                inputs,
                config,
                seed: self.cli.seed,
                threads: self.cli.threads,
                timestamp: chrono::Utc::now().to_rfc3339(),
            },
        )
    }
}

#[derive(Serialize)]
struct InputDigest {
    path: String,
    sha256: String,
}

/// Enough to re-run a command: its argv, digests of its inputs and the
/// resolved configuration.
#[derive(Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    command: Vec<String>,
    inputs: Vec<InputDigest>,
    config: serde_json::Value,
    seed: u64,
    threads: usize,
    timestamp: String,
}
