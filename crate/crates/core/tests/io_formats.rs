mod common;

use std::path::Path;

use biopro::io::{
    fnv1a64, labels_path, manifest_path, read_embeddings, read_embeddings_with_dtype, read_labels,
    read_manifest, read_policy, read_projector, read_scores, read_subspace, write_embeddings,
    write_labels, write_policy, write_projector, write_scores, write_subspace, Dtype, EMB_HEADER_LEN,
};
use biopro::selection::{LambdaSide, SelectionPolicy, SkewNormalParams, SolveMethod};
use biopro::subspace::{fit_subspace, orthogonal_projector, Projector, ProjectorKind, Provenance};
use biopro::{EmbeddingMatrix, Group, LabelRecord};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn bits_equal(a: &DMatrix<f64>, b: &DMatrix<f64>) -> bool {
    a.shape() == b.shape() && a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits())
}

fn flip(path: &Path, pos: usize, mask: u8) {
    let mut bytes = std::fs::read(path).unwrap();
    bytes[pos] ^= mask;
    std::fs::write(path, bytes).unwrap();
}

#[test]
fn ones_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("ones.emb");
    let m = EmbeddingMatrix::unlabeled(DMatrix::from_element(4, 3, 1.0)).unwrap();
    write_embeddings(&m, &p, Dtype::F64).unwrap();
    assert_eq!(read_embeddings(&p).unwrap().values(), m.values());
}

#[test]
fn empty_matrix_is_valid() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("empty.emb");
    let m = EmbeddingMatrix::unlabeled(DMatrix::zeros(2, 0)).unwrap();
    write_embeddings(&m, &p, Dtype::F64).unwrap();
    let back = read_embeddings(&p).unwrap();
    assert_eq!((back.dim(), back.len()), (2, 0));
}

#[test]
fn large_random_matrix_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("big.emb");
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let m = EmbeddingMatrix::unlabeled(common::gaussian_matrix(512, 1000, &mut rng)).unwrap();
    write_embeddings(&m, &p, Dtype::F64).unwrap();
    let back = read_embeddings(&p).unwrap();
    assert_eq!((back.values() - m.values()).amax(), 0.0);
}

#[test]
fn payload_corruption_is_a_checksum_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("h.emb");
    let m = EmbeddingMatrix::unlabeled(DMatrix::from_fn(3, 4, |i, j| (i * 4 + j) as f64)).unwrap();
    write_embeddings(&m, &p, Dtype::F64).unwrap();
    flip(&p, EMB_HEADER_LEN + 5, 0x10);
    assert_eq!(read_embeddings(&p).unwrap_err().code(), "checksum-mismatch");
}

#[test]
fn wrong_magic_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("h.emb");
    let m = EmbeddingMatrix::unlabeled(DMatrix::from_element(2, 2, 0.5)).unwrap();
    write_embeddings(&m, &p, Dtype::F64).unwrap();
    flip(&p, 0, 0x20);
    assert_eq!(read_embeddings(&p).unwrap_err().code(), "bad-magic");
}

#[test]
fn truncated_file_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("h.emb");
    let m = EmbeddingMatrix::unlabeled(DMatrix::from_element(2, 2, 0.5)).unwrap();
    write_embeddings(&m, &p, Dtype::F64).unwrap();
    std::fs::remove_file(manifest_path(&p)).unwrap();
    let bytes = std::fs::read(&p).unwrap();
    std::fs::write(&p, &bytes[..bytes.len() - 3]).unwrap();
    assert_eq!(read_embeddings(&p).unwrap_err().code(), "truncated");
}

#[test]
fn non_finite_values_name_the_column() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = DMatrix::from_element(2, 3, 1.0);
    v[(1, 2)] = f64::NAN;
    // the matrix type itself refuses NaN; the writer refuses f32 overflow
    assert!(EmbeddingMatrix::unlabeled(v).is_err());
    let mut w = DMatrix::from_element(2, 3, 1.0);
    w[(0, 1)] = 1e300;
    let m = EmbeddingMatrix::unlabeled(w).unwrap();
    let err = write_embeddings(&m, &dir.path().join("x.emb"), Dtype::F32).unwrap_err();
    assert!(matches!(err, biopro::Error::NonFinite { column: 1, .. }), "{err}");
}

#[test]
fn manifest_and_labels_sidecars() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("set.emb");
    let labels = vec![
        LabelRecord::new("n0", Group::Neutral),
        LabelRecord::new("e0", Group::ExplicitA),
        LabelRecord::new("s0", Group::Unlabeled).with_attribute(0.25),
    ];
    let m = EmbeddingMatrix::new(DMatrix::from_fn(2, 3, |i, j| (i + 2 * j) as f64), labels.clone()).unwrap();
    let manifest = write_embeddings(&m, &p, Dtype::F32).unwrap();
    assert_eq!(read_manifest(&manifest_path(&p)).unwrap(), manifest);
    assert_eq!((manifest.d, manifest.n, manifest.dtype), (2, 3, Dtype::F32));
    assert_eq!(read_labels(&labels_path(&p)).unwrap(), labels);
    let (back, dtype) = read_embeddings_with_dtype(&p).unwrap();
    assert_eq!(dtype, Dtype::F32);
    assert_eq!(back, m);
}

#[test]
fn stale_manifest_is_caught() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.emb");
    let b = dir.path().join("b.emb");
    write_embeddings(&EmbeddingMatrix::unlabeled(DMatrix::from_element(2, 2, 1.0)).unwrap(), &a, Dtype::F64).unwrap();
    write_embeddings(&EmbeddingMatrix::unlabeled(DMatrix::from_element(2, 2, 2.0)).unwrap(), &b, Dtype::F64).unwrap();
    std::fs::copy(manifest_path(&b), manifest_path(&a)).unwrap();
    assert_eq!(read_embeddings(&a).unwrap_err().code(), "checksum-mismatch");
}

#[test]
fn labels_without_manifest_are_optional() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("h.emb");
    let m = EmbeddingMatrix::unlabeled(DMatrix::from_element(3, 2, 0.0)).unwrap();
    write_embeddings(&m, &p, Dtype::F64).unwrap();
    std::fs::remove_file(manifest_path(&p)).unwrap();
    std::fs::remove_file(labels_path(&p)).unwrap();
    assert_eq!(read_embeddings(&p).unwrap().len(), 2);
    let bad = vec![LabelRecord::new("only one", Group::Neutral)];
    write_labels(&bad, &labels_path(&p)).unwrap();
    assert!(read_embeddings(&p).is_err());
}

#[test]
fn identity_projector_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("id.prj");
    write_projector(&Projector::identity(3), &p).unwrap();
    let back = read_projector(&p).unwrap();
    assert_eq!(back.matrix(), &DMatrix::<f64>::identity(3, 3));
    assert_eq!(back.kind(), ProjectorKind::Orthogonal);
}

#[test]
fn artifacts_reject_each_others_magic() {
    let dir = tempfile::tempdir().unwrap();
    let prj = dir.path().join("p.prj");
    write_projector(&Projector::identity(2), &prj).unwrap();
    assert_eq!(read_subspace(&prj).unwrap_err().code(), "bad-magic");
    assert_eq!(read_policy(&prj).unwrap_err().code(), "bad-magic");
    assert_eq!(read_embeddings(&prj).unwrap_err().code(), "bad-magic");
}

#[test]
fn policy_with_infinite_threshold_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("all.pol");
    let policy = SelectionPolicy {
        neutral: SkewNormalParams::new(0.1, 1.0, 2.0).unwrap(),
        explicit: SkewNormalParams::new(6.0, 2.0, -1.0).unwrap(),
        delta_c: f64::INFINITY,
        lambda_c: 3.0,
        score_dim: 1,
        lambda_side: LambdaSide::WeightsNeutral,
        method: SolveMethod::Boundary,
    };
    write_policy(&policy, &p).unwrap();
    assert_eq!(read_policy(&p).unwrap(), policy);
}

#[test]
fn fnv_matches_published_vectors() {
    assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
    assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
    assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn embeddings_round_trip_bit_exact(d in 1usize..8, n in 0usize..8, seed in any::<u64>(), f32_store in any::<bool>()) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.emb");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = common::gaussian_matrix(d, n, &mut rng) * 1e3;
        let dtype = if f32_store { Dtype::F32 } else { Dtype::F64 };
        if f32_store {
            v = v.map(|x| x as f32 as f64);
        }
        let labels = (0..n).map(|j| {
            let g = [Group::Neutral, Group::ExplicitA, Group::ExplicitB, Group::Unlabeled][j % 4];
            LabelRecord::new(format!("id{j}"), g)
        }).collect();
        let m = EmbeddingMatrix::new(v, labels).unwrap();
        write_embeddings(&m, &p, dtype).unwrap();
        let back = read_embeddings(&p).unwrap();
        prop_assert!(bits_equal(back.values(), m.values()));
        prop_assert_eq!(back.labels(), m.labels());
    }

    #[test]
    fn any_byte_flip_in_a_subspace_file_is_detected(seed in any::<u64>(), pos_frac in 0.0f64..1.0, mask in 1u8..=255) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.sub");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = fit_subspace(&common::gaussian_matrix(6, 5, &mut rng), 2).unwrap();
        write_subspace(&s, &p).unwrap();
        let len = std::fs::read(&p).unwrap().len();
        flip(&p, ((len as f64) * pos_frac) as usize % len, mask);
        prop_assert!(read_subspace(&p).is_err());
    }

    #[test]
    fn projector_round_trip_keeps_provenance(seed in any::<u64>(), params in "[a-z_=;0-9.]{0,40}") {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.prj");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = fit_subspace(&common::gaussian_matrix(5, 4, &mut rng), 1).unwrap();
        let base = orthogonal_projector(&s).unwrap();
        let prj = Projector::from_parts(
            base.matrix().clone(),
            ProjectorKind::Calibrated,
            Provenance { source_checksum: seed, params },
        ).unwrap();
        write_projector(&prj, &p).unwrap();
        prop_assert_eq!(read_projector(&p).unwrap(), prj);
    }

    #[test]
    fn scores_round_trip(scores in proptest::collection::vec(-1e6f64..1e6, 0..50)) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("scores.txt");
        write_scores(&scores, &p).unwrap();
        let back = read_scores(&p).unwrap();
        prop_assert_eq!(back.len(), scores.len());
        prop_assert!(back.iter().zip(&scores).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}
