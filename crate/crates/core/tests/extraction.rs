mod common;

use common::fixture;
use filmcrew::provider::extract_json;
use serde_json::Value;

fn corpus(prefix: &str) -> Vec<std::path::PathBuf> {
    let mut files: Vec<_> = std::fs::read_dir(fixture("extraction"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| {
            let name = p.file_name().unwrap().to_str().unwrap();
            name.starts_with(prefix) && name.ends_with(".txt")
        })
        .collect();
    files.sort();
    files
}

#[test]
fn positive_fixtures_parse_to_their_labels() {
    let files = corpus("pos_");
    assert_eq!(files.len(), 20);
    for raw_path in files {
        let raw = std::fs::read_to_string(&raw_path).unwrap();
        let expected: Value =
            serde_json::from_str(&std::fs::read_to_string(raw_path.with_extension("expected.json")).unwrap()).unwrap();
        let got = extract_json(&raw).unwrap_or_else(|e| panic!("{}: {e}", raw_path.display()));
        assert_eq!(got, expected, "{}", raw_path.display());
    }
}

#[test]
fn negative_fixtures_find_nothing() {
    let files = corpus("neg_");
    assert_eq!(files.len(), 3);
    for path in files {
        let raw = std::fs::read_to_string(&path).unwrap();
        assert!(extract_json(&raw).is_err(), "{}", path.display());
    }
}

#[test]
fn extraction_round_trips_every_labeled_document() {
    for raw_path in corpus("pos_") {
        let expected: Value =
            serde_json::from_str(&std::fs::read_to_string(raw_path.with_extension("expected.json")).unwrap()).unwrap();
        assert_eq!(extract_json(&expected.to_string()).unwrap(), expected);
        assert_eq!(extract_json(&serde_json::to_string_pretty(&expected).unwrap()).unwrap(), expected);
    }
}
