//! Replays the checked-in fuzz corpus through the parser entry points on
//! stable, checking which seeds are meant to parse.

use std::fs;
use std::path::PathBuf;

use qdiscrim::config::ExperimentConfig;
use qdiscrim::io::{read_field, read_fits, read_m_table, read_sweep};

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_stem().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn replay(target: &str, valid: &[&str], parse: impl Fn(&[u8]) -> bool) {
    for (name, bytes) in seeds(target) {
        assert_eq!(parse(&bytes), valid.contains(&name.as_str()), "{target}/{name}");
    }
}

#[test]
fn config_seeds() {
    let valid = [
        "explicit_guesses",
        "ramsey_baseline",
        "dephasing_peak",
        "relaxation_kicks",
        "dephasing_m_curve",
        "relaxation_m_curve",
        "tiny_optimize",
    ];
    replay("config_toml", &valid, |b| {
        let Ok(text) = std::str::from_utf8(b) else { return false };
        ExperimentConfig::from_toml_str(text).is_ok_and(|c| c.jobs().is_ok())
    });
}

#[test]
fn field_seeds() {
    replay("field_csv", &["comment_and_spaces", "constant", "valid"], |b| {
        read_field(b).is_ok_and(|s| s.grid().is_ok())
    });
}

#[test]
fn m_table_seeds() {
    replay("m_table", &["reordered", "valid"], |b| read_m_table(b).is_ok());
}

#[test]
fn sweep_seeds() {
    replay("sweep_table", &["valid"], |b| read_sweep(b).is_ok());
}

#[test]
fn fits_seeds() {
    replay("fits_table", &["valid"], |b| read_fits(b).is_ok());
}

mod mutations {
    use super::*;
    use proptest::prelude::*;

    fn all_seeds() -> Vec<Vec<u8>> {
        ["config_toml", "field_csv", "m_table", "sweep_table", "fits_table"]
            .iter()
            .flat_map(|t| seeds(t).into_iter().map(|(_, b)| b))
            .collect()
    }

    /// A seed with a few bytes overwritten, inserted or cut.
    fn mutated() -> impl Strategy<Value = Vec<u8>> {
        let corpus = all_seeds();
        (0..corpus.len(), prop::collection::vec((any::<prop::sample::Index>(), any::<u8>(), 0u8..3), 1..8)).prop_map(
            move |(i, edits)| {
                let mut bytes = corpus[i].clone();
                for (at, byte, op) in edits {
                    if bytes.is_empty() {
                        bytes.push(byte);
                        continue;
                    }
                    let k = at.index(bytes.len());
                    match op {
                        0 => bytes[k] = byte,
                        1 => bytes.insert(k, byte),
                        _ => bytes.truncate(k),
                    }
                }
                bytes
            },
        )
    }

    fn exercise(bytes: &[u8]) {
        if let Ok(text) = std::str::from_utf8(bytes) {
            if let Ok(config) = ExperimentConfig::from_toml_str(text) {
                let _ = config.jobs();
            }
        }
        if let Ok(samples) = read_field(bytes) {
            let _ = samples.grid();
        }
        let _ = read_m_table(bytes);
        let _ = read_sweep(bytes);
        let _ = read_fits(bytes);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn parsers_survive_mutated_seeds(bytes in mutated()) {
            exercise(&bytes);
        }

        #[test]
        fn parsers_survive_arbitrary_bytes(bytes in prop::collection::vec(any::<u8>(), 0..256)) {
            exercise(&bytes);
        }
    }
}
