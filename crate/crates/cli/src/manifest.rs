//! Run manifest: a flat `key=value` text file per run, diff-able in CI.
//!
//! Carries the config hash, tool versions, the wrap-around time, the
//! command's headline measurements, and one `check_<name>=pass|fail` line
//! per built-in check. Wall time is appended last so everything above it is
//! reproducible byte for byte.

use std::fmt::Display;
use std::io;
use std::path::Path;

/// 64-bit FNV-1a over the given bytes.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Ordered `key=value` collector.
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    /// Start a manifest with the run identity block.
    pub fn new(command: &str, canonical_config: &str, seed: u64, threads: usize) -> Manifest {
        let mut m = Manifest {
            entries: Vec::new(),
        };
        m.push("command", command);
        m.push(
            "config_hash",
            format!("{:016x}", fnv1a64(canonical_config.as_bytes())),
        );
        m.push("seed", seed);
        m.push("threads", threads);
        m.push("version", env!("CARGO_PKG_VERSION"));
        m.push("checkpoint_format", "KSPEC1");
        m
    }

    /// Append one entry; keys are written in insertion order.
    pub fn push(&mut self, key: &str, value: impl Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    /// Append a `check_<name>` entry as pass/fail.
    pub fn push_check(&mut self, name: &str, pass: bool) {
        self.push(
            &format!("check_{name}"),
            if pass { "pass" } else { "fail" },
        );
    }

    /// Whether every recorded check passed.
    pub fn all_checks_pass(&self) -> bool {
        self.entries
            .iter()
            .filter(|(k, _)| k.starts_with("check_"))
            .all(|(_, v)| v == "pass")
    }

    /// Render the flat key=value text.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    /// Append the wall time and write `manifest.txt` under `dir`.
    pub fn write(mut self, dir: &Path, wall_seconds: f64) -> io::Result<()> {
        self.push("wall_time_s", wall_seconds);
        std::fs::write(dir.join("manifest.txt"), self.render())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv1a64_matches_reference_vectors() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn render_is_flat_and_ordered() {
        let mut m = Manifest::new("validate", "x", 7, 0);
        m.push("alpha_star", 0.45);
        m.push_check("viscosity", true);
        m.push_check("pressure_slope", false);
        let text = m.render();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "command=validate");
        assert!(lines.contains(&"seed=7"));
        assert!(lines.contains(&"alpha_star=0.45"));
        assert!(lines.contains(&"check_viscosity=pass"));
        assert!(lines.contains(&"check_pressure_slope=fail"));
        assert!(text.ends_with('\n'));
        assert!(!m.all_checks_pass());
    }

    #[test]
    fn config_hash_is_stable_across_runs() {
        let a = Manifest::new("eigen", "same-config", 0, 0).render();
        let b = Manifest::new("eigen", "same-config", 0, 0).render();
        assert_eq!(a, b);
    }
}
