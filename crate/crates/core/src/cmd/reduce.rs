use persuade::io::{companion, read_json, save_game, save_policy, write_json};
use persuade::reductions::{
    bimatrix_to_persuasion, public_to_best_response, BimatrixGame, PublicPersuasionInstance,
    ReductionParams,
};
use persuade::{JointPolicy, Result, SignalingPolicy};
use serde_json::json;

use super::{Context, Outcome};
use crate::ReduceKind;

pub fn run(ctx: &Context, kind: &ReduceKind) -> Result<Outcome> {
    let out = ctx.out_or("reduced.json");
    match kind {
        ReduceKind::Public {
            source,
            c,
            n_const,
            m,
        } => {
            let inst: PublicPersuasionInstance = read_json(source)?;
            inst.validate()?;
            let defaults = ReductionParams::for_size(inst.receivers());
            let params = ReductionParams {
                c: c.unwrap_or(defaults.c),
                n: n_const.unwrap_or(defaults.n),
                m: m.unwrap_or(defaults.m),
            };
            let (game, pi2) = public_to_best_response(&inst, &params)?;
            save_game(&out, &game, None)?;
            // sender 1's entry is a placeholder; only sender 2's policy is fixed
            let profile = JointPolicy::new(vec![
                SignalingPolicy::uniform(game.states(), game.signals()),
                pi2,
            ]);
            save_policy(&companion(&out, "policy"), &profile)?;
            write_json(
                &companion(&out, "sidecar"),
                &json!({ "source": inst, "params": params }),
            )?;
            ctx.manifest(
                &companion(&out, "manifest"),
                &[source],
                json!({ "params": params }),
            )?;
            println!(
                "wrote {} ({} states, {} actions, C = {}, N = {}, M = {})",
                out.display(),
                game.states(),
                game.actions(),
                params.c,
                params.n,
                params.m
            );
        }
        ReduceKind::Bimatrix { source } => {
            let bg: BimatrixGame = read_json(source)?;
            bg.validate()?;
            let (game, tie) = bimatrix_to_persuasion(&bg)?;
            save_game(&out, &game, Some(&tie))?;
            write_json(
                &companion(&out, "sidecar"),
                &json!({ "source": bg, "interpretation": tie }),
            )?;
            ctx.manifest(&companion(&out, "manifest"), &[source], json!({}))?;
            println!(
                "wrote {} ({} states, {} actions, fixed interpretation)",
                out.display(),
                game.states(),
                game.actions()
            );
        }
    }
    Ok(Outcome::Success)
}
