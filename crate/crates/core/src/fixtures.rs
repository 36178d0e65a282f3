//! Small reference games used by tests, examples and the CLI.

use crate::game::{GameInstance, JointPolicy, SignalingPolicy};
use crate::matrix::Matrix;

/// Two senders, two states, two signals, two actions. The receiver wants to
/// match the state; sender 1 prefers action 1 in state 1, sender 2 prefers
/// action 0 in state 0. Uniform prior.
pub fn didactic_game() -> GameInstance {
    GameInstance::new(
        vec![0.5, 0.5],
        2,
        Matrix::identity(2),
        vec![
            Matrix::from_rows(&[vec![1.0, 1.0], vec![-1.0, 3.0]]).unwrap(),
            Matrix::from_rows(&[vec![4.0, 1.0], vec![1.0, 1.0]]).unwrap(),
        ],
    )
    .unwrap()
}

/// Four-state, two-sender game with a partially informative equilibrium that
/// gives both senders 0.3, twice what full revelation gives them. Sender 1 is
/// paid only when action 0 is taken and sender 2 only when action 2 is taken.
/// Four signals per sender; the profile uses three of them.
pub fn nonunique_equilibrium_game() -> (GameInstance, JointPolicy) {
    let v = Matrix::from_rows(&[
        vec![1.0, -1.0, 0.0, 0.0],
        vec![-1.0, 1.0, 0.0, 0.0],
        vec![0.0, 0.0, 1.0, -1.0],
        vec![0.0, 0.0, -1.0, 1.0],
    ])
    .unwrap();
    let paid_on = |action: usize| {
        let mut m = Matrix::zeros(4, 4);
        for w in 0..4 {
            m[(w, action)] = 1.0;
        }
        m
    };
    let game = GameInstance::new(
        vec![0.15, 0.35, 0.15, 0.35],
        4,
        v,
        vec![paid_on(0), paid_on(2)],
    )
    .unwrap();
    let pi1 = SignalingPolicy::from_rows(&[
        vec![0.0, 1.0, 0.0, 0.0],
        vec![4.0 / 7.0, 3.0 / 7.0, 0.0, 0.0],
        vec![1.0, 0.0, 0.0, 0.0],
        vec![1.0, 0.0, 0.0, 0.0],
    ])
    .unwrap();
    let pi2 = SignalingPolicy::from_rows(&[
        vec![0.0, 0.0, 1.0, 0.0],
        vec![0.0, 0.0, 1.0, 0.0],
        vec![0.0, 1.0, 0.0, 0.0],
        vec![4.0 / 7.0, 3.0 / 7.0, 0.0, 0.0],
    ])
    .unwrap();
    (game, JointPolicy::new(vec![pi1, pi2]))
}
