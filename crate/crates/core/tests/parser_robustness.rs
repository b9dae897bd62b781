//! Drives the parser entry points (the same surface the fuzz targets hit)
//! over the checked-in corpus seeds and deterministic mutations of them.
//! Parsers must return Ok or Err, never panic, on arbitrary input.

use std::path::PathBuf;

use mercer_core::formats::{
    parse_matrix_csv, parse_matrix_json, parse_run_config, parse_vector_csv,
};

fn corpus_dir(target: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fuzz/corpus")
        .join(target)
}

fn seeds(target: &str) -> Vec<Vec<u8>> {
    let dir = corpus_dir(target);
    let mut out = Vec::new();
    for entry in std::fs::read_dir(&dir).unwrap_or_else(|_| panic!("missing corpus {dir:?}")) {
        out.push(std::fs::read(entry.unwrap().path()).unwrap());
    }
    assert!(!out.is_empty(), "empty corpus for {target}");
    out
}

fn lcg(state: &mut u64) -> u64 {
    *state = state
        .wrapping_mul(6364136223846793005)
        .wrapping_add(1442695040888963407);
    *state >> 11
}

/// Deterministic byte-level mutations: truncation, splice, flip, insert.
fn mutations(seed: &[u8], rounds: usize, state: &mut u64) -> Vec<Vec<u8>> {
    let mut out = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let mut m = seed.to_vec();
        match lcg(state) % 4 {
            0 => {
                let cut = (lcg(state) as usize) % (m.len() + 1);
                m.truncate(cut);
            }
            1 => {
                if !m.is_empty() {
                    let at = (lcg(state) as usize) % m.len();
                    m[at] = (lcg(state) % 256) as u8;
                }
            }
            2 => {
                let at = (lcg(state) as usize) % (m.len() + 1);
                m.insert(at, b"0123456789eE+-.,[]{}\"nul"[(lcg(state) as usize) % 24]);
            }
            _ => {
                if m.len() > 2 {
                    let a = (lcg(state) as usize) % m.len();
                    let b = (lcg(state) as usize) % m.len();
                    let (lo, hi) = (a.min(b), a.max(b));
                    let chunk: Vec<u8> = m[lo..hi].to_vec();
                    m.extend_from_slice(&chunk);
                }
            }
        }
        out.push(m);
    }
    out
}

fn drive(target: &str, parse: impl Fn(&str)) {
    let mut state = 0xC0FFEEu64;
    for seed in seeds(target) {
        if let Ok(text) = std::str::from_utf8(&seed) {
            parse(text);
        }
        for m in mutations(&seed, 400, &mut state) {
            if let Ok(text) = std::str::from_utf8(&m) {
                parse(text);
            }
        }
    }
}

#[test]
fn corpus_seeds_parse_as_intended() {
    let dir = corpus_dir("matrix_json");
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        let parsed = parse_matrix_json(&text);
        // short.json is a deliberately malformed seed; the rest are valid.
        if path.file_name().unwrap() == "short.json" {
            assert!(parsed.is_err());
        } else {
            assert!(parsed.is_ok(), "seed {path:?} failed to parse");
        }
    }
    for seed in seeds("run_config") {
        parse_run_config(std::str::from_utf8(&seed).unwrap()).unwrap();
    }
    for seed in seeds("vector_csv") {
        parse_vector_csv(std::str::from_utf8(&seed).unwrap()).unwrap();
    }
    for seed in seeds("matrix_csv") {
        parse_matrix_csv(std::str::from_utf8(&seed).unwrap()).unwrap();
    }
}

#[test]
fn matrix_json_never_panics() {
    drive("matrix_json", |t| {
        let _ = parse_matrix_json(t);
    });
}

#[test]
fn matrix_csv_never_panics() {
    drive("matrix_csv", |t| {
        let _ = parse_matrix_csv(t);
    });
}

#[test]
fn vector_csv_never_panics() {
    drive("vector_csv", |t| {
        let _ = parse_vector_csv(t);
    });
}

#[test]
fn run_config_never_panics() {
    drive("run_config", |t| {
        let _ = parse_run_config(t);
    });
}
