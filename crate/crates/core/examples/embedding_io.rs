//! Writes a labeled embedding matrix to disk and reads it back.

use biopro::io::{read_embeddings, read_manifest, write_embeddings, Dtype};
use biopro::synthgen::{generate_labeled_set, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let mut cfg = SynthConfig::planted(16, &[3.0], 1)?;
    cfg.n_neutral = 4;
    cfg.n_explicit = 4;
    let set = generate_labeled_set(&cfg)?.data;

    for dtype in [Dtype::F64, Dtype::F32] {
        let path = dir.path().join(format!("labeled_{dtype:?}.emb"));
        write_embeddings(&set, &path, dtype)?;
        let back = read_embeddings(&path)?;
        let err = (back.values() - set.values()).amax();
        println!("{dtype:?}: {} x {}, max round-trip error {err:e}", back.dim(), back.len());
        print!("{}", read_manifest(&biopro::io::manifest_path(&path))?.to_text());
    }
    for l in set.labels().iter().take(3) {
        println!("{}\t{:?}", l.source_id, l.group);
    }
    Ok(())
}
