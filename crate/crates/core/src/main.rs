use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod cmd;

use cmd::Outcome;

/// Multi-sender Bayesian persuasion workbench.
#[derive(Debug, Parser)]
#[command(name = "persuade", version, about)]
pub struct Cli {
    /// Root seed; every random quantity derives from it via named streams.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output file (gen, exact, reduce) or directory (learn, report).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for learning restarts.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    /// Neighborhood radius of the local equilibrium check.
    #[arg(long, global = true, default_value_t = 0.005)]
    pub eps: f64,
    /// Receiver tie-breaking; defaults to the rule stored with the game, else lex.
    #[arg(long, global = true, value_enum)]
    pub tie: Option<TieArg>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TieArg {
    Lex,
    SenderFavoring,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a game instance.
    #[command(subcommand)]
    Gen(GenKind),
    /// Exact equilibrium tools.
    #[command(subcommand)]
    Exact(ExactKind),
    /// Learn surrogates and search for local equilibria.
    Learn(LearnArgs),
    /// Build instances from hardness reductions.
    #[command(subcommand)]
    Reduce(ReduceKind),
    /// Aggregate learning summaries into CSV tables.
    Report(ReportArgs),
}

#[derive(Debug, Subcommand)]
pub enum GenKind {
    /// Gaussian benchmark game.
    Synthetic {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        states: usize,
        #[arg(long)]
        signals: usize,
        #[arg(long)]
        actions: usize,
    },
    /// Firms advertise high or low quality.
    QualityAds {
        #[arg(long)]
        firms: usize,
        #[arg(long, default_value_t = 2)]
        signals: usize,
        #[arg(long, default_value_t = 1.0)]
        shock: f64,
    },
    /// Firms with public prices and private qualities.
    ProductAds {
        #[arg(long, default_value_t = 2)]
        firms: usize,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[arg(long, default_value_t = 3)]
        signals: usize,
        #[arg(long, default_value_t = 1.0)]
        shock: f64,
    },
    /// Two ride-hailing platforms and one driver.
    RideHailing {
        #[arg(long, default_value_t = 4)]
        m: usize,
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        cost_levels: usize,
        /// Value orders by driver payment instead of price.
        #[arg(long)]
        payment_utility: bool,
    },
    /// Built-in reference games (writes a policy file too when one exists).
    Fixture {
        #[arg(long, value_enum)]
        name: FixtureName,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FixtureName {
    Didactic,
    Nonunique,
}

#[derive(Debug, Subcommand)]
pub enum ExactKind {
    /// Best response of one sender against the others' policies.
    BestResponse {
        #[arg(long)]
        game: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        sender: usize,
    },
    /// Check a joint policy for an exact Nash equilibrium.
    Verify {
        #[arg(long)]
        game: PathBuf,
        #[arg(long)]
        policy: PathBuf,
    },
    /// Construct the full-revelation equilibrium.
    FullReveal {
        #[arg(long)]
        game: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct LearnArgs {
    #[arg(long)]
    pub game: PathBuf,
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum ReduceKind {
    /// Public persuasion instance to a best-response instance.
    Public {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        c: Option<f64>,
        #[arg(long = "n-const")]
        n_const: Option<f64>,
        #[arg(long)]
        m: Option<f64>,
    },
    /// 0/1 bimatrix game to a persuasion game with a fixed interpretation.
    Bimatrix {
        #[arg(long)]
        source: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Glob over learning summary files.
    #[arg(long)]
    pub results: String,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(cmd::EXIT_USAGE),
            };
        }
    };
    let argv: Vec<String> = std::env::args().skip(1).collect();
    match cmd::run(&cli, &argv) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::Refuted) => ExitCode::from(cmd::EXIT_REFUTED),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cmd::exit_code(&e))
        }
    }
}
