use persuade::io::{companion, save_game, save_policy, write_json};
use persuade::scenarios::{
    product_ads_instance, quality_ads_instance, ride_hailing_instance, synthetic_instance,
    SyntheticSpec,
};
use persuade::{fixtures, Result, TieRule};
use serde_json::json;

use super::{Context, Outcome};
use crate::{FixtureName, GenKind};

pub fn run(ctx: &Context, kind: &GenKind) -> Result<Outcome> {
    let seed = ctx.cli.seed;
    let out = ctx.out_or("game.json");
    let (game, tie, sidecar, policy) = match *kind {
        GenKind::Synthetic {
            n,
            states,
            signals,
            actions,
        } => {
            let (g, s) =
                synthetic_instance(&SyntheticSpec::new(n, states, signals, actions, seed))?;
            (g, None, Some(s), None)
        }
        GenKind::QualityAds {
            firms,
            signals,
            shock,
        } => {
            let (g, s) = quality_ads_instance(firms, signals, shock, seed)?;
            (g, None, Some(s), None)
        }
        GenKind::ProductAds {
            firms,
            levels,
            signals,
            shock,
        } => {
            let (g, s) = product_ads_instance(firms, levels, signals, shock, seed)?;
            (g, None, Some(s), None)
        }
        GenKind::RideHailing {
            m,
            n,
            cost_levels,
            payment_utility,
        } => {
            let (g, s) = ride_hailing_instance(m, n, cost_levels, payment_utility, seed)?;
            (g, None, Some(s), None)
        }
        GenKind::Fixture { name } => match name {
            FixtureName::Didactic => (fixtures::didactic_game(), None, None, None),
            FixtureName::Nonunique => {
                let (g, p) = fixtures::nonunique_equilibrium_game();
                let tie = TieRule::sender_favoring(g.n_senders());
                (g, Some(tie), None, Some(p))
            }
        },
    };
    save_game(&out, &game, tie.as_ref())?;
    if let Some(s) = &sidecar {
        write_json(&companion(&out, "sidecar"), s)?;
    }
    if let Some(p) = &policy {
        save_policy(&companion(&out, "policy"), p)?;
    }
    ctx.manifest(
        &companion(&out, "manifest"),
        &[],
        json!({ "kind": format!("{kind:?}"), "seed": seed }),
    )?;
    println!(
        "wrote {} (senders {}, states {}, signals {}, actions {})",
        out.display(),
        game.n_senders(),
        game.states(),
        game.signals(),
        game.actions()
    );
    Ok(Outcome::Success)
}
