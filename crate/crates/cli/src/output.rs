//! Output directories: everything is rendered in memory first so a failing
//! command never leaves partial files behind.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::plot;
use crate::{Common, Format};

#[derive(Serialize, Debug)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub scenario: String,
    pub seed: u64,
    /// Inclusive seed range of a campaign.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<[u64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    pub out: String,
    pub variant: String,
    pub adversary: String,
    pub rushing: bool,
    pub format: Format,
    pub allow_invalid: bool,
    /// `ok`, `constraints-violated`, or `aborted`.
    pub status: String,
    pub violated: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn new(command: &'static str, c: &Common, s: &ssbpr::sim::Scenario, out: &Path, format: Format) -> Self {
        Manifest {
            tool: "ssbpr",
            version: env!("CARGO_PKG_VERSION"),
            command,
            scenario: c.scenario.display().to_string(),
            seed: s.seed,
            seeds: None,
            trials: None,
            workers: None,
            out: out.display().to_string(),
            variant: format!("{:?}", s.variant),
            adversary: s.adversary.strategy.name().to_string(),
            rushing: s.adversary.rushing,
            format,
            allow_invalid: c.allow_invalid,
            status: "ok".into(),
            violated: Vec::new(),
            error: None,
            files: Vec::new(),
        }
    }

    pub fn stamp_violations(&mut self, violated: &[&str]) {
        if !violated.is_empty() {
            self.status = "constraints-violated".into();
            self.violated = violated.iter().map(|v| v.to_string()).collect();
        }
    }
}

/// Files to be written into one output directory.
#[derive(Default)]
pub struct Bundle {
    files: Vec<(String, Vec<u8>)>,
}

impl Bundle {
    pub fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    pub fn add_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    pub fn add_csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r)?;
        }
        self.add(name, w.into_inner().context("flushing csv")?);
        Ok(())
    }

    pub fn names(&self) -> Vec<String> {
        self.files.iter().map(|f| f.0.clone()).collect()
    }

    /// Writes the manifest last, listing every file (plots included).
    pub fn write(self, dir: &Path, mut manifest: Manifest, plots: &[(&str, plot::Chart)]) -> Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut names = self.names();
        for (name, bytes) in &self.files {
            fs::write(dir.join(name), bytes).with_context(|| format!("writing {name}"))?;
        }
        for (name, chart) in plots {
            match chart.render_svg(&dir.join(name)) {
                Ok(()) => names.push(name.to_string()),
                Err(e) => eprintln!("warning: could not render {name} ({e}); plot data is still written"),
            }
        }
        names.push("manifest.json".into());
        manifest.files = names;
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        fs::write(dir.join("manifest.json"), bytes).context("writing manifest.json")?;
        Ok(())
    }
}

pub fn default_out(command: &str, seed: u64) -> PathBuf {
    PathBuf::from(format!("ssbpr-{command}-{seed}"))
}
