//! Replays the checked-in fuzz corpus through the decoders on stable.

use std::path::PathBuf;

use shapereg::data::{read_csv, read_numeric_csv};
use shapereg::simgen::ScenarioId;
use shapereg::{decode_model_json, AlphaGrid, ScenarioSpec};

fn seeds(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            let bytes = std::fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn csv_seeds() {
    let mut accepted = 0;
    for (_, b) in seeds("parse_csv") {
        let _ = read_numeric_csv(b.as_slice());
        accepted += usize::from(read_csv(b.as_slice(), "y").is_ok());
    }
    assert!(accepted >= 2);
}

#[test]
fn grid_seeds() {
    for (p, b) in seeds("parse_grid") {
        let text = String::from_utf8(b).unwrap();
        let ok = AlphaGrid::parse(&text, true).is_ok();
        assert_eq!(ok, !p.ends_with("zero_lo.txt"), "{}", p.display());
    }
}

#[test]
fn model_seeds() {
    for (p, b) in seeds("decode_model_json") {
        let text = String::from_utf8(b).unwrap();
        let decoded = decode_model_json(&text);
        assert_eq!(decoded.is_ok(), !p.ends_with("truncated.json"), "{}", p.display());
        if let Ok(m) = decoded {
            assert!(m.model.predict(&vec![0.5; m.model.dim()]).unwrap().is_finite());
        }
    }
}

#[test]
fn scenario_seeds() {
    for (p, b) in seeds("parse_scenario") {
        let text = String::from_utf8(b).unwrap();
        if p.extension().is_some_and(|e| e == "json") {
            let spec: ScenarioSpec = serde_json::from_str(&text).unwrap();
            spec.validate().unwrap();
        } else {
            assert_eq!(text.parse::<ScenarioId>().is_ok(), text != "S9", "{text}");
        }
    }
}
