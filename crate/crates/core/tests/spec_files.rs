//! The sample experiment specs shipped in `specs/` stay valid.

use std::path::Path;

use anomaly_ipp::experiment::ExperimentSpec;

#[test]
fn shipped_specs_parse_and_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../specs");
    let mut n = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let spec = ExperimentSpec::from_file(&path, &[]).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            spec.validate().unwrap();
            n += 1;
        }
    }
    assert!(n >= 4);
}

#[test]
fn overrides_reach_nested_fields() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../specs/quick.toml");
    let spec = ExperimentSpec::from_file(&path, &["mission.planner.lookahead=0.3".into(), "replicates=5".into()]).unwrap();
    assert_eq!(spec.mission.planner.lookahead, 0.3);
    assert_eq!(spec.replicates, 5);
    assert_eq!(spec.mission.planner.n_candidates, 32);
}
