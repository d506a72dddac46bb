//! Expands the shipped template catalog into prompt pairs and lists catalog problems.

use biopro::prompts::{expand, validate_catalog, Mode, Split, TemplateCatalog};

fn main() -> biopro::Result<()> {
    let catalog = TemplateCatalog::shipped();
    for mode in [Mode::Gender, Mode::Scene] {
        for split in [Split::Train, Split::Test] {
            let prompts = expand(&catalog, mode, split)?;
            println!("{mode:?}/{split:?}: {} tuples", prompts.len());
            if let Some(t) = prompts.first() {
                println!("  {} | {} | {}", t.prompt_a, t.prompt_b, t.neutral.as_deref().unwrap_or("-"));
            }
        }
    }
    for v in validate_catalog(&catalog) {
        println!("warning: {v}");
    }
    Ok(())
}
