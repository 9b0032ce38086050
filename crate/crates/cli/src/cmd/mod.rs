pub mod decompose;
pub mod prepare;
pub mod score;
pub mod session;
pub mod simulate;

use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

/// Pretty JSON via temp file and rename.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let tmp = path.with_extension("json.tmp");
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(&tmp, text).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
