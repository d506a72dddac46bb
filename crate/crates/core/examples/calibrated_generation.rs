//! Calibrates the projector so that one group is pulled toward the other, for several weights.

use biopro::calibration::{apply_calibrated, calibrate_direction, Direction, PairPooling};
use biopro::reference::ReferenceConfig;
use biopro::subspace::{difference_matrix, fit_subspace, orthogonal_projector};
use biopro::synthgen::{generate_counterfactual_pairs, SynthConfig};

fn main() -> biopro::Result<()> {
    let mut cfg = SynthConfig::planted(32, &[4.0], 11)?;
    cfg.n_pairs = 80;
    let pairs = generate_counterfactual_pairs(&cfg)?.data;
    let p_perp = orthogonal_projector(&fit_subspace(&difference_matrix(&pairs), 1)?)?;
    let (za, zb) = (pairs.side_a(), pairs.side_b());
    let target = zb.values().column_mean();
    let dist = |m: &nalgebra::DMatrix<f64>| (m.column_mean() - &target).norm();
    println!("centroid gap before: {:.4}", dist(za.values()));

    let reference = ReferenceConfig::shipped();
    let model = reference.model_index("LLaVA-1.5")?;
    let doctor = reference.lambda_g("doctor", model).unwrap_or(1.0);
    for lambda_g in [0.0, 0.1, doctor, 10.0] {
        let c = calibrate_direction(&p_perp, za, zb, lambda_g, Direction::AToB, PairPooling::Raw)?;
        let moved = apply_calibrated(&c.projector, za)?;
        println!(
            "lambda_g={lambda_g:<6} gap after: {:.4}  relative gradient {:.1e}",
            dist(moved.values()),
            c.report.relative_gradient
        );
    }
    Ok(())
}
