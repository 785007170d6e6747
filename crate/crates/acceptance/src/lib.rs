//! Reporting helpers for the acceptance suite.
//!
//! Each criterion is a list of named checks. A criterion prints a single
//! `PASS`/`FAIL` line with every measured value, then the calling test
//! asserts on the verdict. Lines go straight to the process's stderr so that
//! they show up even when the test harness captures output.

use std::io::Write;
use std::sync::{Mutex, MutexGuard};
use std::time::Instant;

static SERIAL: Mutex<()> = Mutex::new(());

/// Runs criteria one at a time so that wall-clock limits measure the
/// criterion and not its neighbours.
pub fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

#[derive(Debug)]
pub struct Criterion {
    id: String,
    title: String,
    started: Instant,
    checks: Vec<(String, bool)>,
}

impl Criterion {
    pub fn new(id: impl Into<String>, title: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            title: title.into(),
            started: Instant::now(),
            checks: Vec::new(),
        }
    }

    /// Records one check; `detail` should carry the measured value.
    pub fn check(&mut self, ok: bool, detail: impl Into<String>) -> bool {
        self.checks.push((detail.into(), ok));
        ok
    }

    pub fn elapsed(&self) -> f64 {
        self.started.elapsed().as_secs_f64()
    }

    /// Adds a wall-clock check against `limit` seconds.
    pub fn runtime_below(&mut self, limit: f64) -> bool {
        let t = self.elapsed();
        self.check(t < limit, format!("runtime {t:.2}s < {limit}s"))
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|(_, ok)| *ok)
    }

    /// Prints the verdict line and returns whether every check passed.
    pub fn finish(self) -> bool {
        let pass = self.passed();
        let mut line = format!(
            "[acceptance] criterion {} {} ({}) in {:.1}s:",
            self.id,
            if pass { "PASS" } else { "FAIL" },
            self.title,
            self.elapsed()
        );
        for (detail, ok) in &self.checks {
            line.push_str(&format!(" [{}] {detail};", if *ok { "ok" } else { "x" }));
        }
        line.push('\n');
        let _ = std::io::stderr().write_all(line.as_bytes());
        pass
    }
}

/// `|a - b| <= tol`, with a small allowance for grid arithmetic.
pub fn within(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + 1e-9) + 1e-12
}
