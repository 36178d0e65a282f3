pub mod equilibria;
pub mod error;
pub mod fixtures;
pub mod game;
pub mod io;
pub mod learning;
pub mod lp;
pub mod matrix;
pub mod neural;
pub mod reductions;
pub mod rng;
pub mod scenarios;

pub use error::{Error, Result};
pub use game::{ExAnte, FixedMap, GameInstance, JointPolicy, Posterior, SignalingPolicy, TieRule};
pub use matrix::Matrix;
