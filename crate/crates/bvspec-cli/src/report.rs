//! Report persistence: a JSON envelope carrying the config hash and the
//! effective tolerances, plus plain CSV tables.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Numerics;
use crate::CliError;

#[derive(Debug, Serialize)]
pub struct Envelope<T: Serialize> {
    pub command: &'static str,
    pub config_sha256: String,
    pub seed: u64,
    pub tolerances: Numerics,
    pub pass: bool,
    pub results: T,
}

pub fn config_hash(raw: &[u8]) -> String {
    hex::encode(Sha256::digest(raw))
}

pub fn write_json<T: Serialize>(dir: &Path, envelope: &Envelope<T>) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Input(format!("cannot create output dir: {e}")))?;
    let path = dir.join("report.json");
    let mut out = serde_json::to_vec_pretty(envelope)
        .map_err(|e| CliError::Numeric(format!("report serialization failed: {e}")))?;
    out.push(b'\n');
    std::fs::write(&path, out)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

pub fn write_csv(
    dir: &Path,
    name: &str,
    header: &str,
    rows: impl IntoIterator<Item = String>,
) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Input(format!("cannot create output dir: {e}")))?;
    let path = dir.join(name);
    let file = std::fs::File::create(&path)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
    let mut w = std::io::BufWriter::new(file);
    let emit = |w: &mut std::io::BufWriter<std::fs::File>| -> std::io::Result<()> {
        writeln!(w, "{header}")?;
        for row in rows {
            writeln!(w, "{row}")?;
        }
        w.flush()
    };
    emit(&mut w).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}
