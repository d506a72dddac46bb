//! Fits a score threshold from neutral and explicit samples, then projects only the neutral-looking ones.

use biopro::selection::{fit_policy, selective_project, LambdaSide};
use biopro::subspace::{difference_matrix, fit_subspace, orthogonal_projector};
use biopro::synthgen::{generate_counterfactual_pairs, generate_labeled_set, SynthConfig};
use biopro::Group;

fn main() -> biopro::Result<()> {
    let cfg = SynthConfig::planted(32, &[4.0], 3)?;
    let s = fit_subspace(&difference_matrix(&generate_counterfactual_pairs(&cfg)?.data), 1)?;
    let p = orthogonal_projector(&s)?;
    let h = generate_labeled_set(&cfg)?.data;

    for lambda_c in [1.0, 3.0, 10.0] {
        let policy = fit_policy(&h, &s, 0, lambda_c, LambdaSide::WeightsExplicit)?;
        let r = selective_project(&h, &p, &policy, &s)?;
        let (mut neutral, mut explicit) = (0, 0);
        for (l, m) in h.labels().iter().zip(&r.projected) {
            if *m && l.group == Group::Neutral {
                neutral += 1;
            } else if *m {
                explicit += 1;
            }
        }
        println!(
            "lambda_c={lambda_c:>4}: delta_c={:.3} ({}), projected {neutral} neutral and {explicit} explicit",
            policy.delta_c,
            policy.method.as_str()
        );
    }
    Ok(())
}
