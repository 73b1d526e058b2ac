//! Click lists on disk: `[{"pos":[x,y,z],"polarity":"fg"}, ...]`.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use guidance_core::ClickSet;

pub fn load_clicks(path: &Path) -> Result<ClickSet> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing clicks in {}", path.display()))
}

pub fn save_clicks(clicks: &ClickSet, path: &Path) -> Result<()> {
    let text = serde_json::to_string(clicks)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use guidance_core::{Click, Polarity};

    #[test]
    fn reads_the_documented_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        fs::write(&p, r#"[{"pos":[1,2,3],"polarity":"fg"},{"pos":[4,5,6],"polarity":"bg"}]"#).unwrap();
        let c = load_clicks(&p).unwrap();
        assert_eq!(c.as_slice(), &[Click::fg(1, 2, 3), Click::bg(4, 5, 6)]);
        assert_eq!(c.positions(Polarity::Background), vec![[4, 5, 6]]);

        save_clicks(&c, &p).unwrap();
        assert_eq!(load_clicks(&p).unwrap(), c);
    }

    #[test]
    fn duplicate_positions_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        fs::write(&p, r#"[{"pos":[1,2,3],"polarity":"fg"},{"pos":[1,2,3],"polarity":"fg"}]"#).unwrap();
        assert!(load_clicks(&p).is_err());
    }
}
