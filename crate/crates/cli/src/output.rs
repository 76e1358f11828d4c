//! Output artifacts. JSON files carry the canonical config and seed as
//! top-level keys; CSV files carry them in leading `#` comment lines.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::fail::Failure;

pub struct Out {
    dir: PathBuf,
    command: &'static str,
    config: Value,
    seed: u64,
}

impl Out {
    pub fn new(dir: &Path, command: &'static str, config: Value, seed: u64) -> Result<Self, Failure> {
        std::fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command,
            config,
            seed,
        })
    }

    fn write(&self, name: &str, body: &str) -> Result<PathBuf, Failure> {
        let path = self.dir.join(name);
        std::fs::write(&path, body).map_err(|e| Failure::io(&path, e))?;
        Ok(path)
    }

    pub fn json(&self, name: &str, mut value: Value) -> Result<PathBuf, Failure> {
        if let Value::Object(m) = &mut value {
            m.insert("command".into(), Value::from(self.command));
            m.insert("seed".into(), Value::from(self.seed));
            m.insert("config".into(), self.config.clone());
        }
        let mut body = serde_json::to_string_pretty(&value).expect("serializable");
        body.push('\n');
        self.write(name, &body)
    }

    pub fn csv(&self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<PathBuf, Failure> {
        let mut s = String::new();
        let _ = writeln!(s, "# supou-lqc {} seed={}", self.command, self.seed);
        let _ = writeln!(s, "# config: {}", serde_json::to_string(&self.config).expect("serializable"));
        s.push_str(&header.join(","));
        s.push('\n');
        for r in rows {
            let cells: Vec<String> = r.iter().map(|x| x.to_string()).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        self.write(name, &s)
    }
}
