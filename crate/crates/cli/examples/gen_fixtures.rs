//! Rewrites the bundled sample data under `crates/cli/fixtures/`.

use std::path::Path;

fn main() -> anyhow::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("synthetic_log.csv"), kra_cli::fixtures::synthetic_log_csv())?;
    std::fs::write(dir.join("synthetic_labels.csv"), kra_cli::fixtures::synthetic_labels_csv()?)?;
    std::fs::write(dir.join("planted_matrix.csv"), kra_cli::fixtures::planted_matrix_csv()?)?;
    std::fs::write(dir.join("planted_labels.csv"), kra_cli::fixtures::planted_labels_csv())?;
    println!("wrote {}", dir.display());
    Ok(())
}
