use persuade::equilibria::{
    best_response_exact, best_response_fixed_interpretation, full_revelation_profile, verify_nash,
    FixedResponse, Verdict, DEFAULT_NASH_TOL,
};
use persuade::game::ex_ante_utilities_any;
use persuade::io::{companion, load_game, load_policy, save_policy, write_json};
use persuade::{Error, Result, TieRule};
use serde_json::json;

use super::{Context, Outcome};
use crate::ExactKind;

pub const REPORT_FORMAT: &str = "persuade-report/1";

pub fn run(ctx: &Context, kind: &ExactKind) -> Result<Outcome> {
    let out = ctx.out_or("report.json");
    match kind {
        ExactKind::BestResponse {
            game,
            policy,
            sender,
        } => {
            let (g, stored) = load_game(game)?;
            let tie = ctx.tie_for(&g, stored);
            let p = load_policy(policy)?;
            g.check_policy(&p)?;
            if *sender >= g.n_senders() {
                return Err(Error::Argument(format!(
                    "sender {sender} out of range (game has {})",
                    g.n_senders()
                )));
            }
            let br = match &tie {
                TieRule::FixedMap(map) => match best_response_fixed_interpretation(&g, *sender, &p, map)? {
                    FixedResponse::Optimal(br) => br,
                    FixedResponse::Infeasible => {
                        return Err(Error::Precondition(format!(
                            "no policy of sender {sender} makes the fixed interpretation incentive compatible"
                        )))
                    }
                },
                _ => best_response_exact(&g, *sender, &p, &tie)?,
            };
            let incumbent = ex_ante_utilities_any(&g, &p, &tie)?.senders[*sender];
            write_json(
                &out,
                &json!({
                    "format": REPORT_FORMAT,
                    "command": "best-response",
                    "sender": sender,
                    "utility": br.utility,
                    "incumbent_utility": incumbent,
                    "realized_utility": br.realized_utility,
                    "policy": br.policy.matrix(),
                    "realized_policy": br.realized_policy.matrix(),
                    "action_map": br.action_map.table,
                    "maps_explored": br.maps_explored,
                }),
            )?;
            ctx.manifest(
                &companion(&out, "manifest"),
                &[game, policy],
                json!({ "tie": tie }),
            )?;
            println!(
                "best response of sender {sender}: utility {:.9} (incumbent {incumbent:.9})",
                br.utility
            );
            Ok(Outcome::Success)
        }
        ExactKind::Verify { game, policy } => {
            let (g, stored) = load_game(game)?;
            let tie = ctx.tie_for(&g, stored);
            let p = load_policy(policy)?;
            let report = verify_nash(&g, &p, &tie, DEFAULT_NASH_TOL)?;
            write_json(
                &out,
                &json!({
                    "format": REPORT_FORMAT,
                    "command": "verify",
                    "verdict": report.verdict,
                    "utilities": report.utilities,
                    "welfare": report.welfare(),
                    "max_improvement": report.max_improvement,
                    "witness": report.witness,
                }),
            )?;
            ctx.manifest(
                &companion(&out, "manifest"),
                &[game, policy],
                json!({ "tie": tie }),
            )?;
            let verdict = serde_json::to_value(report.verdict).expect("verdict serializes");
            println!(
                "{} utilities {:?} max improvement {:.3e}",
                verdict.as_str().unwrap_or("?"),
                report.utilities,
                report.max_improvement
            );
            Ok(if report.verdict == Verdict::Refuted {
                Outcome::Refuted
            } else {
                Outcome::Success
            })
        }
        ExactKind::FullReveal { game } => {
            let (g, stored) = load_game(game)?;
            let (profile, cert) = full_revelation_profile(&g)?;
            let tie = ctx.tie_for(&g, stored);
            let u = ex_ante_utilities_any(&g, &profile, &tie)?;
            let policy_path = companion(&out, "policy");
            save_policy(&policy_path, &profile)?;
            write_json(
                &out,
                &json!({
                    "format": REPORT_FORMAT,
                    "command": "full-reveal",
                    "utilities": u.senders,
                    "receiver_utility": u.receiver,
                    "policy_file": policy_path.display().to_string(),
                    "certificate": cert,
                }),
            )?;
            ctx.manifest(&companion(&out, "manifest"), &[game], json!({ "tie": tie }))?;
            println!("full revelation: utilities {:?}", u.senders);
            Ok(Outcome::Success)
        }
    }
}
