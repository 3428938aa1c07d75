use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Commented reference configuration written by [`init_project`].
pub const REFERENCE_CONFIG: &str = include_str!("../../assets/config.yaml");

/// Demonstration model where the two perspectives disagree at 20,000/QALY.
pub const DEMO_CONFIG: &str = include_str!("../../assets/demo_discordance.yaml");

const README_STUB: &str = "\
# Cost-effectiveness project

- `config.yaml` documents every configuration key; edit it to describe your model.
- `demo_discordance.yaml` is a worked example where the health-system and
  societal perspectives reach different decisions.

Run an analysis with

    pcea run --config config.yaml --output-dir results

and read `results/report.md`.
";

/// Creates `dir` (if needed) with a reference config, the demo config and a
/// README. Refuses to touch a directory that already has entries.
pub fn init_project(dir: &Path) -> Result<Vec<String>> {
    if dir.exists() {
        let mut entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        if entries.next().is_some() {
            return Err(Error::InvalidInput(format!(
                "{} is not empty; refusing to overwrite",
                dir.display()
            )));
        }
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = [
        ("config.yaml", REFERENCE_CONFIG),
        ("demo_discordance.yaml", DEMO_CONFIG),
        ("README.md", README_STUB),
    ];
    for (name, text) in files {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(files.iter().map(|(n, _)| n.to_string()).collect())
}
