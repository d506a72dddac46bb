//! Fits a bias subspace from counterfactual pairs and removes it by orthogonal projection.

use biopro::subspace::{difference_matrix, fit_subspace, orthogonal_projector};
use biopro::synthgen::{generate_counterfactual_pairs, generate_labeled_set, SynthConfig};

fn main() -> biopro::Result<()> {
    let mut cfg = SynthConfig::planted(64, &[4.0], 7)?;
    cfg.n_pairs = 500;
    let pairs = generate_counterfactual_pairs(&cfg)?.data;
    let s = fit_subspace(&difference_matrix(&pairs), 1)?;
    let planted = &cfg.bias_dirs[0].direction;
    println!("sigma_1 = {:.3}", s.singular_values()[0]);
    println!("|cos(fitted, planted)| = {:.4}", s.basis().column(0).dot(planted).abs());

    let p = orthogonal_projector(&s)?;
    let h = generate_labeled_set(&cfg)?.data;
    let moved = p.apply(&h)?;
    let along = |m: &nalgebra::DMatrix<f64>| (planted.transpose() * m).abs().max();
    println!("largest bias component before: {:.3}", along(h.values()));
    println!("largest bias component after:  {:.3e}", along(moved.values()));
    Ok(())
}
