//! Computes caption bias rates, generation skew, and a constraint audit.

use biopro::constraints::{audit_captioning, audit_generation, ConstraintBudget};
use biopro::metrics::{BiasReport, CaptionFlag, CaptionFlagSet, CategoryCounts, GenerationCountSet};
use biopro::Group;

fn main() -> biopro::Result<()> {
    let mut flags: Vec<CaptionFlag> = (0..100)
        .map(|i| CaptionFlag {
            source_id: format!("n{i}"),
            group: Group::Neutral,
            gendered_word_present: i < 12,
            predicted_gender_correct: None,
        })
        .collect();
    flags.extend((0..100).map(|i| CaptionFlag {
        source_id: format!("e{i}"),
        group: if i % 2 == 0 { Group::ExplicitA } else { Group::ExplicitB },
        gendered_word_present: i < 70,
        predicted_gender_correct: Some(i < 70),
    }));
    let captions = BiasReport::from_captions(&CaptionFlagSet::new(flags)?, Some(75.0))?;
    print!("{}", captions.to_kv());
    let budget = ConstraintBudget::default();
    print!("{}", audit_captioning(&captions, 0.0, &budget)?.to_text());

    let row = |id: &str, a, b| CategoryCounts {
        category_id: id.into(),
        n_a: a,
        n_b: b,
        total: a + b,
        explicit_mismatches: 1,
        explicit_total: 200,
    };
    let counts = GenerationCountSet::new(vec![row("pilot", 62, 38), row("nurse", 30, 70), row("chef", 55, 45)])?;
    let generation = BiasReport::from_generation(&counts, &["pilot", "chef"], &["nurse"])?;
    println!("{}", generation.to_json_line());
    print!("{}", audit_generation(&counts, 0.0, &budget)?.to_text());
    Ok(())
}
