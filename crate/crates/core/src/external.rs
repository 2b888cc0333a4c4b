//! Shell command hooks for out-of-process codecs and enhancers.

use std::path::Path;
use std::process::Command;

use crate::error::{Error, Result};

fn shell_quote(path: &Path) -> String {
    format!("'{}'", path.display().to_string().replace('\'', r"'\''"))
}

pub(crate) fn run_template(template: &str, input: &Path, output: &Path) -> Result<()> {
    let cmd = template
        .replace("{input}", &shell_quote(input))
        .replace("{output}", &shell_quote(output));
    let out = Command::new("sh")
        .arg("-c")
        .arg(&cmd)
        .output()
        .map_err(|e| Error::External(format!("cannot spawn `{cmd}`: {e}")))?;
    if !out.status.success() {
        return Err(Error::External(format!(
            "`{cmd}` exited with {}: {}",
            out.status,
            String::from_utf8_lossy(&out.stderr).trim()
        )));
    }
    if !output.exists() {
        return Err(Error::External(format!("`{cmd}` produced no output file")));
    }
    Ok(())
}
