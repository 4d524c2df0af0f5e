//! Flat key-value config files with one section per command.
//!
//! ```text
//! seed = 7
//! [train]
//! alpha = 0.1
//! epochs = 300
//! ```
//!
//! Keys before the first section header are global. A command reads its own
//! section first, then the global keys; flags override both.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::Failure;

#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    /// `section -> key -> value`; global keys live under `""`.
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = String::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                current = name.trim().to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| format!("line {}: expected key = value", k + 1))?;
            let key = key.trim().replace('-', "_");
            if key.is_empty() {
                return Err(format!("line {}: empty key", k + 1));
            }
            let prev = sections.entry(current.clone()).or_default().insert(key.clone(), value.trim().to_string());
            if prev.is_some() {
                return Err(format!("line {}: duplicate key {key}", k + 1));
            }
        }
        Ok(Self { sections })
    }

    /// Lookup view for one command. Fails on keys the command does not know.
    pub fn view<'a>(&'a self, section: &'a str, known: &[&str]) -> Result<View<'a>, Failure> {
        if let Some(keys) = self.sections.get(section) {
            if let Some(key) = keys.keys().find(|k| !known.contains(&k.as_str()) && !GLOBAL_KEYS.contains(&k.as_str())) {
                return Err(Failure::usage(format!("unknown key [{section}] {key}")));
            }
        }
        Ok(View { file: self, section })
    }
}

/// Keys every command accepts at top level.
pub const GLOBAL_KEYS: &[&str] = &["seed", "dataset", "classifier_ckpt", "explainer_ckpt", "out_dir"];

pub struct View<'a> {
    file: &'a ConfigFile,
    section: &'a str,
}

impl View<'_> {
    fn raw(&self, key: &str) -> Option<&str> {
        let lookup = |s: &str| self.file.sections.get(s).and_then(|m| m.get(key)).map(String::as_str);
        lookup(self.section).or_else(|| lookup(""))
    }

    /// Flag value if given, else the file's, else `None`.
    pub fn opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, Failure> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Failure::usage(format!("config key {key}: cannot parse {v:?}"))),
        }
    }

    pub fn or<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, Failure> {
        Ok(self.opt(flag, key)?.unwrap_or(default))
    }

    pub fn required<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<T, Failure> {
        self.opt(flag, key)?
            .ok_or_else(|| Failure::usage(format!("missing --{} (or `{key}` in the config file)", key.replace('_', "-"))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = "seed = 3\n# comment\n[train]\nalpha = 0.2 # trailing\nout-ckpt = x.ckpt\n[sample]\nk = 5\n";

    #[test]
    fn section_then_global_then_flag() {
        let f = ConfigFile::parse(TEXT).unwrap();
        let v = f.view("train", &["alpha", "out_ckpt"]).unwrap();
        assert_eq!(v.or(None, "alpha", 1.0).unwrap(), 0.2);
        assert_eq!(v.or(Some(0.5), "alpha", 1.0).unwrap(), 0.5);
        assert_eq!(v.or::<u64>(None, "seed", 0).unwrap(), 3);
        assert_eq!(v.required::<String>(None, "out_ckpt").unwrap(), "x.ckpt");
        // other sections are invisible
        assert_eq!(v.opt::<usize>(None, "k").unwrap(), None);
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        let f = ConfigFile::parse(TEXT).unwrap();
        assert!(f.view("train", &["alpha"]).is_err());
        assert!(ConfigFile::parse("[a]\nnovalue\n").is_err());
        assert!(ConfigFile::parse("a = 1\na = 2\n").is_err());
        let v = f.view("train", &["alpha", "out_ckpt"]).unwrap();
        assert!(v.or::<usize>(None, "alpha", 0).is_err());
    }
}
