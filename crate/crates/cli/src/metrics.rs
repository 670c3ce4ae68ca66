use std::path::Path;

use anyhow::{bail, Context, Result};

/// Creates `dir` and refuses to clobber any of `files` unless `force`.
pub fn prepare_out(dir: &Path, files: &[&str], force: bool) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    if !force {
        for f in files {
            let p = dir.join(f);
            if p.exists() {
                bail!("{} already exists; pass --force to overwrite", p.display());
            }
        }
    }
    Ok(())
}

/// Writes a CSV file with a header row.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}
