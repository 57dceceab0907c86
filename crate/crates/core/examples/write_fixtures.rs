//! Writes the score fixtures under `fixtures/`.
//!
//! ```text
//! cargo run -p astro-core --example write_fixtures [out_dir]
//! ```

use astro_core::synth::{bimodal_scores, imbalanced_scores, overlapping_scores, reference_confusion_scores};

fn main() -> astro_core::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "fixtures".into());
    std::fs::create_dir_all(&dir).expect("create fixture directory");
    let sets = [
        ("reference_scores.csv", reference_confusion_scores(0)),
        ("bimodal_scores.csv", bimodal_scores(1000, 0)),
        ("overlapping_scores.csv", overlapping_scores(1000, 0)),
        ("imbalanced_scores.csv", imbalanced_scores(10000, 20, 0)),
    ];
    for (name, s) in sets {
        let path = format!("{dir}/{name}");
        s.write_csv(&path)?;
        println!("{path}: {} scores, {} positive", s.len(), s.n_positive());
    }
    Ok(())
}
