//! Run manifest: what was run, on which inputs, and how long each phase took.

use std::fs::File;
use std::io::{self, BufReader, Read, Write};
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
struct InputDigest {
    path: String,
    sha256: String,
    bytes: u64,
}

#[derive(Debug, Serialize)]
struct Phase {
    name: &'static str,
    seconds: f64,
}

#[derive(Debug, Serialize)]
struct IterationStats {
    round: usize,
    iterations: usize,
    seconds: f64,
    mean_iteration_seconds: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    subcommand: &'static str,
    version: &'static str,
    flags: serde_json::Value,
    seed: Option<u64>,
    inputs: Vec<InputDigest>,
    phases: Vec<Phase>,
    iterations: Vec<IterationStats>,
    total_seconds: f64,
    error: Option<String>,
    #[serde(skip)]
    started: Option<Instant>,
}

impl Manifest {
    pub fn new(subcommand: &'static str, flags: serde_json::Value) -> Self {
        Self {
            subcommand,
            version: env!("CARGO_PKG_VERSION"),
            flags,
            seed: None,
            inputs: Vec::new(),
            phases: Vec::new(),
            iterations: Vec::new(),
            total_seconds: 0.0,
            error: None,
            started: Some(Instant::now()),
        }
    }

    pub fn seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    /// Hashes an input file.
    pub fn digest(&mut self, path: &Path) -> io::Result<()> {
        let mut r = BufReader::new(File::open(path).map_err(|e| {
            io::Error::new(e.kind(), format!("{}: {e}", path.display()))
        })?);
        let mut hasher = Sha256::new();
        let mut buf = [0u8; 1 << 16];
        let mut bytes = 0u64;
        loop {
            let k = r.read(&mut buf)?;
            if k == 0 {
                break;
            }
            hasher.update(&buf[..k]);
            bytes += k as u64;
        }
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: hex::encode(hasher.finalize()),
            bytes,
        });
        Ok(())
    }

    pub fn phase(&mut self, name: &'static str, started: Instant) {
        self.phases.push(Phase { name, seconds: started.elapsed().as_secs_f64() });
    }

    pub fn iterations(&mut self, round: usize, iterations: usize, seconds: f64) {
        self.iterations.push(IterationStats {
            round,
            iterations,
            seconds,
            mean_iteration_seconds: (iterations > 0).then(|| seconds / iterations as f64),
        });
    }

    pub fn finish(&mut self, error: Option<&str>) {
        self.total_seconds = self.started.map_or(0.0, |s| s.elapsed().as_secs_f64());
        self.error = error.map(str::to_owned);
    }

    /// Writes to `path`, or one compact line on stderr.
    pub fn emit(&self, path: Option<&Path>) -> io::Result<()> {
        match path {
            Some(p) => {
                let mut w = File::create(p)?;
                serde_json::to_writer_pretty(&mut w, self)?;
                writeln!(w)
            }
            None => {
                let line = serde_json::to_string(self)?;
                writeln!(io::stderr(), "{line}")
            }
        }
    }
}
