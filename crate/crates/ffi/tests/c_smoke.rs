//! Compiles `smoke.c` against the generated header, links the static library
//! and checks the numbers it prints against the Rust API.

use std::path::{Path, PathBuf};
use std::process::Command;

use robrel::lanes::{reference_hyper, LanesExperiment};
use robrel::solver::rob_rel;

/// `target/<profile>`, found from the test executable in `target/<profile>/deps`.
fn profile_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

fn static_lib() -> Option<PathBuf> {
    let name = if cfg!(windows) {
        "robrel_ffi.lib"
    } else {
        "librobrel_ffi.a"
    };
    let dir = profile_dir();
    [dir.join(name), dir.join("deps").join(name)]
        .into_iter()
        .find(|p| p.exists())
}

#[test]
#[cfg(unix)]
fn c_program_solves_the_lanes_problem() {
    let Some(lib) = static_lib() else {
        panic!(
            "static library not found next to {}",
            profile_dir().display()
        );
    };
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let work = tempfile::tempdir().unwrap();
    let exe = work.path().join("smoke");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let compiled = Command::new(&cc)
        .arg(manifest.join("tests/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status();
    let status = match compiled {
        Ok(s) => s,
        Err(e) => {
            eprintln!("skipping: no C compiler `{cc}` ({e})");
            return;
        }
    };
    assert!(status.success(), "C compilation failed");

    let spec = LanesExperiment::reference()
        .spec_file(reference_hyper())
        .unwrap();
    let spec_path = work.path().join("lanes.json");
    spec.save(&spec_path).unwrap();
    let out = Command::new(&exe).arg(&spec_path).output().unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let printed: Vec<f64> = String::from_utf8(out.stdout)
        .unwrap()
        .split_whitespace()
        .map(|x| x.parse().unwrap())
        .collect();

    let loaded = spec.build(work.path(), &Default::default()).unwrap();
    let r = rob_rel(&loaded.problem).unwrap();
    assert_eq!(
        printed,
        vec![r.min.value, r.max.value, r.prediction, r.uninformativeness]
    );
}
