//! `gen-moons`: write a synthetic two-moons dataset CSV.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};

use swcal::dataio::{make_moons, Dataset};

/// Writes `ds` in the dataset CSV format (`id,f0,...,f{d-1},label`).
pub fn write_dataset_csv(path: &Path, ds: &Dataset) -> Result<()> {
    let mut file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut header = String::from("id");
    for j in 0..ds.n_features() {
        header.push_str(&format!(",f{j}"));
    }
    header.push_str(",label");
    writeln!(file, "{header}")?;
    for i in 0..ds.len() {
        let mut line = ds.ids()[i].clone();
        for v in ds.row(i) {
            line.push(',');
            line.push_str(&format!("{v}"));
        }
        line.push_str(&format!(",{}", ds.labels()[i]));
        writeln!(file, "{line}")?;
    }
    Ok(())
}

pub fn cmd_gen_moons(n: usize, noise: f64, seed: u64, out: &Path) -> Result<()> {
    let ds = make_moons(n, noise, seed)?;
    write_dataset_csv(out, &ds)?;
    eprintln!("wrote {} items to {}", ds.len(), out.display());
    Ok(())
}
