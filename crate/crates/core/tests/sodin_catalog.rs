use std::path::PathBuf;
use std::time::Instant;

use anticonc::sodin::{run_pipeline, PipelineScenario};

fn catalog() -> Vec<PathBuf> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("catalog/sodin");
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    files.sort();
    files
}

#[test]
fn every_catalog_scenario_passes() {
    let files = catalog();
    assert_eq!(files.len(), 10);
    for f in files {
        let t = Instant::now();
        let s = PipelineScenario::from_toml_str(&std::fs::read_to_string(&f).unwrap()).unwrap();
        let rep = run_pipeline(&s).unwrap();
        eprintln!(
            "{} L={} q={} tau={} e2e={} direct={} {:?}",
            s.config.name,
            s.lcd.theta_star,
            rep.tilt_constants.q,
            rep.tilt_constants.tau,
            rep.end_to_end.assembled,
            rep.end_to_end.direct.value,
            t.elapsed()
        );
        for c in rep.checks.iter().filter(|c| !c.pass) {
            eprintln!("  FAIL {c:?}");
        }
        assert!(rep.passed, "{}", s.config.name);
    }
}
