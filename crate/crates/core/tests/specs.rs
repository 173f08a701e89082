use std::path::{Path, PathBuf};

use robrel::lanes::{reference_hyper, LanesExperiment};
use robrel::specfile::{HyperOverrides, Mode, SpecFile};

fn specs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("specs")
}

#[test]
fn shipped_lanes_spec_matches_the_builder() {
    let built = LanesExperiment::reference()
        .spec_file(reference_hyper())
        .unwrap();
    let text = std::fs::read_to_string(specs().join("lanes.json")).unwrap();
    assert_eq!(text, built.to_json());
    assert_eq!(SpecFile::from_json(&text).unwrap(), built);
}

#[test]
fn estimated_lanes_differs_only_in_mode() {
    let exact = SpecFile::load(&specs().join("lanes.json")).unwrap();
    let mut est = SpecFile::load(&specs().join("lanes-estimated.json")).unwrap();
    assert_eq!(est.mode, Mode::Estimated);
    est.mode = Mode::Exact;
    est.estimation = None;
    assert_eq!(est, exact);
}

#[test]
fn every_shipped_spec_builds() {
    for entry in std::fs::read_dir(specs()).unwrap() {
        let path = entry.unwrap().path();
        let spec = SpecFile::load(&path).unwrap();
        let loaded = spec.build(
            &specs(),
            &HyperOverrides {
                iters: Some(10),
                ..Default::default()
            },
        );
        let loaded = loaded.unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert!(
            loaded.warnings.is_empty(),
            "{}: {:?}",
            path.display(),
            loaded.warnings
        );
        assert!(loaded.slater_margin.unwrap() > 0.0);
    }
}
