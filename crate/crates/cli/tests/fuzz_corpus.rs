//! Replays the checked-in fuzz seeds through the same checks the fuzz targets make.

use std::path::PathBuf;

use vll_cli::config::parse_config_str;
use vll_core::snapshot::Snapshot;

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds in {}", dir.display());
    out
}

#[test]
fn snapshot_seeds() {
    let mut accepted = 0;
    for (name, bytes) in seeds("snapshot_decode") {
        if let Ok(s) = Snapshot::decode(&bytes) {
            accepted += 1;
            let again = Snapshot::decode(&s.encode()).unwrap();
            assert_eq!(again.encode(), s.encode(), "{name}");
        } else {
            assert!(!name.starts_with("valid"), "{name} rejected");
        }
    }
    assert!(accepted >= 1);
}

#[test]
fn config_seeds() {
    for (name, bytes) in seeds("config_parse") {
        let Ok(text) = std::str::from_utf8(&bytes) else { continue };
        match parse_config_str(text) {
            Ok(p) => {
                let _ = p.config.validate();
                parse_config_str(&p.config.to_toml()).unwrap_or_else(|e| panic!("{name}: {e:?}"));
            }
            Err(e) => assert!(!e.message.is_empty(), "{name}"),
        }
    }
}
