#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};

use serde_json::Value;
use sha2::{Digest, Sha256};

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_smartchair"))
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn run_cli(args: &[&str]) -> Run {
    let out = Command::new(bin()).args(args).output().expect("spawn smartchair");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

pub fn run_ok(args: &[&str]) -> Run {
    let r = run_cli(args);
    assert_eq!(r.code, 0, "smartchair {args:?} failed:\n{}\n{}", r.stdout, r.stderr);
    r
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

pub fn sha256(path: &Path) -> String {
    Sha256::digest(std::fs::read(path).unwrap()).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn manifest(dir: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

/// `(path, sha256)` of every output listed in a manifest, each checked
/// against the file on disk.
pub fn output_digests(dir: &Path) -> Result<Vec<(String, String)>, String> {
    let m = manifest(dir);
    let mut out = Vec::new();
    for o in m["outputs"].as_array().ok_or("manifest has no outputs")? {
        let rel = o["path"].as_str().unwrap().to_string();
        let sha = o["sha256"].as_str().unwrap().to_string();
        let actual = sha256(&dir.join(&rel));
        if actual != sha {
            return Err(format!("{rel}: manifest checksum does not match the file"));
        }
        out.push((rel, sha));
    }
    Ok(out)
}

pub struct Served {
    pub child: Child,
    pub ingest: SocketAddr,
    pub api: SocketAddr,
    pub checksum: String,
}

/// Starts `smartchair serve` on ephemeral ports and reads back its addresses.
pub fn spawn_serve(model: &Path, out: &Path, extra: &[&str]) -> Served {
    let mut args = vec![
        "serve", "--model", p(model), "--out", p(out), "--ingest-addr", "127.0.0.1:0", "--http-addr", "127.0.0.1:0",
    ];
    args.extend_from_slice(extra);
    let mut child = Command::new(bin()).args(&args).stdout(Stdio::piped()).stderr(Stdio::null()).spawn().unwrap();
    let mut lines = BufReader::new(child.stdout.take().unwrap()).lines();
    let mut field = |name: &str| {
        let l = lines.next().expect("serve exited early").unwrap();
        l.strip_prefix(name).unwrap_or_else(|| panic!("expected {name}, got {l}")).trim().to_string()
    };
    let ingest = field("ingest").parse().unwrap();
    let api = field("api").parse().unwrap();
    let checksum = field("model_checksum");
    // Keep draining stdout so the server never blocks on a full pipe.
    std::thread::spawn(move || for _ in lines.by_ref() {});
    Served { child, ingest, api, checksum }
}
