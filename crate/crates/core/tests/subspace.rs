mod common;

use biopro::subspace::{
    decompose, difference_matrix, fit_subspace, orthogonal_projector, project, BiasSubspace,
    CounterfactualPairSet,
};
use biopro::synthgen::{generate_counterfactual_pairs, SynthConfig};
use biopro::EmbeddingMatrix;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn emb(m: DMatrix<f64>) -> EmbeddingMatrix {
    EmbeddingMatrix::unlabeled(m).unwrap()
}

fn unit(d: usize, i: usize) -> DVector<f64> {
    let mut v = DVector::zeros(d);
    v[i] = 1.0;
    v
}

#[test]
fn identical_sides_give_zero_differences() {
    let m = DMatrix::from_fn(3, 4, |i, j| (i as f64) - (j as f64));
    let pairs = CounterfactualPairSet::new(emb(m.clone()), emb(m)).unwrap();
    assert_eq!(difference_matrix(&pairs), DMatrix::zeros(3, 4));
}

#[test]
fn difference_is_side_a_minus_side_b() {
    let pairs = CounterfactualPairSet::new(
        emb(DMatrix::from_column_slice(2, 1, &[2.0, 0.0])),
        emb(DMatrix::zeros(2, 1)),
    )
    .unwrap();
    assert_eq!(difference_matrix(&pairs), DMatrix::from_column_slice(2, 1, &[2.0, 0.0]));
}

#[test]
fn mismatched_sides_name_both_shapes() {
    let err = CounterfactualPairSet::new(emb(DMatrix::zeros(2, 3)), emb(DMatrix::zeros(2, 4))).unwrap_err();
    let text = err.to_string();
    assert_eq!(err.code(), "dimension");
    assert!(text.contains("2x3") && text.contains("2x4"), "{text}");
}

#[test]
fn differences_follow_the_generator_log() {
    let mut cfg = SynthConfig::planted(24, &[3.0], 2).unwrap();
    cfg.noise_sigma = 0.0;
    cfg.gap_jitter = 0.3;
    cfg.n_pairs = 40;
    let s = generate_counterfactual_pairs(&cfg).unwrap();
    let d = difference_matrix(&s.data);
    let v = &cfg.bias_dirs[0].direction;
    for (col, row) in d.column_iter().zip(&s.log.rows) {
        let g = row.magnitudes[0];
        assert!((col.norm() - g).abs() < 1e-12);
        assert!((col - v * g).amax() < 1e-12);
    }
}

#[test]
fn rank_one_analytic_svd() {
    let d = DMatrix::from_fn(4, 5, |i, _| if i == 0 { 3.0 } else { 0.0 });
    let s = fit_subspace(&d, 1).unwrap();
    assert_eq!(s.basis().column(0).into_owned(), unit(4, 0));
    assert!((s.singular_values()[0] - 3.0 * 5f64.sqrt()).abs() < 1e-12);
}

#[test]
fn orthogonal_columns_come_out_in_order() {
    let d = DMatrix::from_fn(4, 6, |i, j| match (i, j % 2) {
        (0, 0) => 5.0,
        (1, 1) => 2.0,
        _ => 0.0,
    });
    let s = fit_subspace(&d, 2).unwrap();
    assert!((s.basis().column(0) - unit(4, 0)).amax() < 1e-12);
    assert!((s.basis().column(1) - unit(4, 1)).amax() < 1e-12);
}

#[test]
fn random_basis_matches_jacobi_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let d = common::gaussian_matrix(16, 40, &mut rng);
    let s = fit_subspace(&d, 2).unwrap();
    let (sv, vecs) = common::top_singular(&d, 2);
    for i in 0..2 {
        let cos = s.basis().column(i).dot(&vecs.column(i)).abs();
        assert!(cos >= 1.0 - 1e-10, "column {i}: |cos| = {cos}");
        assert!((s.singular_values()[i] - sv[i]).abs() <= 1e-10 * sv[0]);
    }
}

#[test]
fn sign_convention_makes_largest_entry_positive() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let s = fit_subspace(&common::gaussian_matrix(9, 12, &mut rng), 3).unwrap();
    for c in s.basis().column_iter() {
        let big = c.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap();
        assert!(big > 0.0);
    }
}

#[test]
fn k_out_of_range_is_an_argument_error() {
    let d = DMatrix::from_element(3, 2, 1.0);
    assert_eq!(fit_subspace(&d, 0).unwrap_err().code(), "invalid-argument");
    assert_eq!(fit_subspace(&d, 3).unwrap_err().code(), "invalid-argument");
}

#[test]
fn rank_deficiency_is_flagged_not_fatal() {
    let s = fit_subspace(&DMatrix::zeros(4, 3), 2).unwrap();
    assert_eq!(s.degenerate(), &[0, 1]);
    let d = DMatrix::from_fn(4, 3, |i, _| if i == 2 { 1.0 } else { 0.0 });
    assert_eq!(fit_subspace(&d, 2).unwrap().degenerate(), &[1]);
}

#[test]
fn coordinate_subspace_projector() {
    let s = BiasSubspace::from_basis(DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]), vec![1.0]).unwrap();
    let p = orthogonal_projector(&s).unwrap();
    assert_eq!(p.matrix(), &DMatrix::from_diagonal(&DVector::from_column_slice(&[0.0, 1.0, 1.0])));

    let h = emb(DMatrix::from_column_slice(3, 1, &[7.0, 2.0, -1.0]));
    assert_eq!(project(&p, &h).unwrap().values().as_slice(), &[0.0, 2.0, -1.0]);
    let fixed = emb(DMatrix::from_column_slice(3, 1, &[0.0, 2.0, -1.0]));
    assert_eq!(project(&p, &fixed).unwrap(), fixed);
}

#[test]
fn full_basis_gives_zero_projector() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let s = fit_subspace(&common::gaussian_matrix(4, 6, &mut rng), 4).unwrap();
    assert!(orthogonal_projector(&s).unwrap().matrix().amax() < 1e-14);
}

#[test]
fn non_orthonormal_basis_is_refused() {
    let u = DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]);
    assert!(BiasSubspace::from_basis(u, vec![2.0, 1.0]).is_err());
}

#[test]
fn decomposition_splits_along_the_basis() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let s = fit_subspace(&common::gaussian_matrix(5, 8, &mut rng), 2).unwrap();
    let u0 = emb(s.basis().columns(0, 1).into_owned());
    let (bias, sem) = decompose(&u0, &s).unwrap();
    assert!((bias.values() - u0.values()).amax() < 1e-14);
    assert!(sem.values().amax() < 1e-14);

    let p = orthogonal_projector(&s).unwrap();
    let ortho = emb(p.matrix() * common::gaussian_matrix(5, 3, &mut rng));
    let (bias, _) = decompose(&ortho, &s).unwrap();
    assert!(bias.values().amax() < 1e-13);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn projector_invariants(d in 2usize..40, extra in 0usize..6, seed in any::<u64>(), kf in 0.0f64..1.0) {
        let k = 1 + ((d.min(8) - 1) as f64 * kf) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = fit_subspace(&common::gaussian_matrix(d, k + extra, &mut rng), k).unwrap();
        let p = orthogonal_projector(&s).unwrap();
        let m = p.matrix();
        prop_assert!(common::frob(&(m * m - m)) <= 1e-9 * d as f64);
        prop_assert!(common::frob(&(m - m.transpose())) <= 1e-10 * d as f64);
        prop_assert!((m.trace() - (d - k) as f64).abs() <= 1e-8);
        prop_assert!(common::frob(&(m * s.basis())) <= 1e-10);
        // projection never lengthens a vector
        let h = common::gaussian_matrix(d, 1, &mut rng);
        prop_assert!((m * &h).norm() <= h.norm() * (1.0 + 1e-12));
    }

    #[test]
    fn decomposition_is_exact(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = fit_subspace(&common::gaussian_matrix(7, 9, &mut rng), 2).unwrap();
        let h = emb(common::gaussian_matrix(7, 4, &mut rng));
        let (bias, sem) = decompose(&h, &s).unwrap();
        prop_assert!((bias.values() + sem.values() - h.values()).amax() < 1e-12);
        prop_assert!((s.basis().transpose() * sem.values()).amax() < 1e-12);
    }
}
