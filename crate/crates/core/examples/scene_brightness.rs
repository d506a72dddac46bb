//! Removes a continuous brightness attribute and checks what a linear probe can still read.

use biopro::calibration::{apply_calibrated, calibrate_direction, Direction, PairPooling};
use biopro::subspace::{difference_matrix, fit_subspace, orthogonal_projector, CounterfactualPairSet};
use biopro::synthgen::{generate_attribute_set, SynthConfig};

fn mean_reading(h: &biopro::EmbeddingMatrix, v: &nalgebra::DVector<f64>) -> f64 {
    (v.transpose() * h.values()).mean()
}

fn main() -> biopro::Result<()> {
    let mut cfg = SynthConfig::planted(32, &[1.0], 9)?;
    cfg.n_attribute = 200;
    cfg.noise_sigma = 0.05;
    let dir = cfg.bias_dirs[0].direction.clone();
    let light = generate_attribute_set(&cfg.clone().with_attribute(dir.clone(), (0.5, 1.0)))?.data;
    // same seed: both sets share their bases, so pairs differ only in brightness
    let dark = generate_attribute_set(&cfg.with_attribute(dir.clone(), (-1.0, -0.5)))?.data;

    let pairs = CounterfactualPairSet::new(light.clone(), dark.clone())?;
    let p_perp = orthogonal_projector(&fit_subspace(&difference_matrix(&pairs), 1)?)?;
    println!("brightness reading  light {:+.3}  dark {:+.3}", mean_reading(&light, &dir), mean_reading(&dark, &dir));
    println!("after projection    light {:+.3}", mean_reading(&p_perp.apply(&light)?, &dir));
    for lambda_g in [0.5, 2.0, 8.0] {
        let c = calibrate_direction(&p_perp, &light, &dark, lambda_g, Direction::AToB, PairPooling::Raw)?;
        let moved = apply_calibrated(&c.projector, &light)?;
        println!("calibrated λ={lambda_g:<4}   light {:+.3}", mean_reading(&moved, &dir));
    }
    Ok(())
}
