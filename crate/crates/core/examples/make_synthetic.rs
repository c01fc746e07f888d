//! Writes the bundled synthetic dataset: `cargo run --example make_synthetic [out_dir] [seed]`.

use std::path::PathBuf;

use nnopls::filterbank::{philips_bank, save_bank};
use nnopls::io::{format_lines, write_atomic, write_matrix};
use nnopls::synthetic::{band_dataset, BandSpec};

fn main() -> nnopls::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "data/synthetic".into()));
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed must be an integer"));
    std::fs::create_dir_all(&dir)?;

    let spec = BandSpec::default();
    let ds = band_dataset(&spec, seed)?;
    write_matrix(&dir.join("inputs.csv"), &ds.inputs, Some("inputs"))?;
    write_atomic(&dir.join("labels.txt"), format_lines(&ds.labels).as_bytes())?;
    write_atomic(&dir.join("groups.txt"), format_lines(&ds.groups).as_bytes())?;
    write_atomic(&dir.join("planted_indices.txt"), format_lines(&spec.planted_indices()).as_bytes())?;
    save_bank(
        &philips_bank(spec.bins(), spec.frame_rate_hz, spec.n_coeffs)?,
        &dir.join("philips.bank"),
    )?;

    let config = serde_json::json!({
        "inputs": "inputs.csv",
        "labels": "labels.txt",
        "groups": "groups.txt",
        "classes": 3,
        "folds": 5,
        "seed": seed,
        "solver": { "n_f": 3 }
    });
    write_atomic(&dir.join("config.json"), serde_json::to_string_pretty(&config)?.as_bytes())?;
    println!(
        "wrote {} samples of dimension {} to {}",
        ds.labels.len(),
        spec.dim(),
        dir.display()
    );
    Ok(())
}
