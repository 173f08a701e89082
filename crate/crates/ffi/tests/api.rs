use std::ffi::{CStr, CString};
use std::ptr;

use robrel::lanes::{reference_hyper, LanesExperiment};
use robrel::oracle::{grid_extrema, RewardGrid, DEFAULT_GRID_CAP};
use robrel::solver::rob_rel;
use robrel_ffi::*;

fn lanes_json() -> CString {
    let spec = LanesExperiment::reference()
        .spec_file(reference_hyper())
        .unwrap();
    CString::new(spec.to_json()).unwrap()
}

fn last_error() -> Option<String> {
    let p = robrel_last_error();
    (!p.is_null()).then(|| unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned())
}

fn load(json: &CString) -> *mut RobrelProblem {
    let mut problem = ptr::null_mut();
    let status = unsafe { robrel_problem_from_json(json.as_ptr(), ptr::null(), &mut problem) };
    assert_eq!(status, RobrelStatus::Ok, "{:?}", last_error());
    problem
}

#[test]
fn lanes_through_the_c_api_matches_the_library() {
    let json = lanes_json();
    let problem = load(&json);
    let (mut params, mut constraints) = (0usize, 0usize);
    let (mut iters, mut alpha, mut radius) = (0usize, 0.0, 0.0);
    unsafe {
        assert_eq!(
            robrel_problem_dims(problem, &mut params, &mut constraints),
            RobrelStatus::Ok
        );
        assert_eq!(
            robrel_problem_hyper(problem, &mut iters, &mut alpha, &mut radius),
            RobrelStatus::Ok
        );
    }
    assert_eq!((params, constraints), (3, 6));
    assert_eq!((iters, alpha, radius), (1200, 0.01, 100.0));

    let mut report = ptr::null_mut();
    assert_eq!(
        unsafe { robrel_solve(problem, &mut report) },
        RobrelStatus::Ok
    );
    let (mut m, mut big_m, mut x, mut i) = (0.0, 0.0, 0.0, 0.0);
    let status = unsafe { robrel_report_values(report, &mut m, &mut big_m, &mut x, &mut i) };
    assert_eq!(status, RobrelStatus::Ok);

    let loaded = robrel::specfile::SpecFile::from_json(json.to_str().unwrap())
        .unwrap()
        .build(std::path::Path::new("."), &Default::default())
        .unwrap();
    let direct = rob_rel(&loaded.problem).unwrap();
    assert_eq!(
        (m, big_m, x, i),
        (
            direct.min.value,
            direct.max.value,
            direct.prediction,
            direct.uninformativeness
        )
    );

    let mut needed = 0usize;
    unsafe {
        assert_eq!(
            robrel_report_reward(
                report,
                RobrelDirection::Max,
                ptr::null_mut(),
                0,
                &mut needed
            ),
            RobrelStatus::Ok
        );
    }
    assert_eq!(needed, 3);
    let mut theta = vec![f64::NAN; needed];
    unsafe {
        robrel_report_reward(
            report,
            RobrelDirection::Max,
            theta.as_mut_ptr(),
            theta.len(),
            &mut needed,
        );
    }
    assert_eq!(theta.as_slice(), direct.max.reward.theta().unwrap());

    let mut text = ptr::null_mut();
    assert_eq!(
        unsafe { robrel_report_json(report, &mut text) },
        RobrelStatus::Ok
    );
    let parsed: serde_json::Value =
        serde_json::from_str(unsafe { CStr::from_ptr(text) }.to_str().unwrap()).unwrap();
    assert_eq!(parsed["prediction"].as_f64(), Some(x));
    unsafe { robrel_string_free(text) };

    let (mut lo, mut hi) = (0.0, 0.0);
    assert_eq!(
        unsafe { robrel_oracle(problem, 0.05, &mut lo, &mut hi) },
        RobrelStatus::Ok
    );
    let space = loaded.problem.space();
    let grid = RewardGrid::for_space(space, 0.05).unwrap();
    let e = grid_extrema(
        &loaded.exact_constraints,
        &loaded.exact_objective,
        space,
        &grid,
        DEFAULT_GRID_CAP,
    )
    .unwrap();
    assert_eq!((lo, hi), (e.min, e.max));

    unsafe {
        robrel_report_free(report);
        robrel_problem_free(problem);
    }
}

#[test]
fn failures_set_status_and_message() {
    let mut problem = ptr::null_mut();
    let status = unsafe { robrel_problem_from_json(ptr::null(), ptr::null(), &mut problem) };
    assert_eq!(status, RobrelStatus::NullPointer);
    assert!(last_error().unwrap().contains("json"));
    assert!(problem.is_null());

    let bad = CString::new("{\"schema_version\": 1,").unwrap();
    let status = unsafe { robrel_problem_from_json(bad.as_ptr(), ptr::null(), &mut problem) };
    assert_eq!(status, RobrelStatus::InvalidSpec);
    assert!(last_error().is_some());

    let json = lanes_json();
    let problem = load(&json);
    assert!(last_error().is_none(), "success clears the message");
    assert_eq!(
        unsafe { robrel_problem_set_hyper(problem, 0, 0.01, 1.0) },
        RobrelStatus::InvalidArgument
    );
    assert!(last_error().unwrap().contains("iteration"));
    let (mut lo, mut hi) = (0.0, 0.0);
    assert_eq!(
        unsafe { robrel_oracle(problem, 0.0, &mut lo, &mut hi) },
        RobrelStatus::InvalidArgument
    );

    let mut out = 0.0;
    assert_eq!(
        unsafe { robrel_worst_case_loss(0.0, 1.0, -1.0, &mut out) },
        RobrelStatus::InvalidArgument
    );
    assert_eq!(
        unsafe { robrel_worst_case_loss(0.2, -0.62, 1.02, &mut out) },
        RobrelStatus::Ok
    );
    assert!((out - 0.82).abs() < 1e-12);

    let mut needed = 0;
    let mut report = ptr::null_mut();
    unsafe {
        robrel_problem_set_hyper(problem, 10, 0.01, 1.0);
        assert_eq!(robrel_solve(problem, &mut report), RobrelStatus::Ok);
        assert_eq!(
            robrel_report_reward(
                report,
                RobrelDirection::Min,
                ptr::null_mut(),
                2,
                &mut needed
            ),
            RobrelStatus::NullPointer
        );
        robrel_report_free(report);
        robrel_problem_free(problem);
        robrel_problem_free(ptr::null_mut());
    }
}

#[test]
fn loads_from_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lanes.json");
    std::fs::write(&path, lanes_json().as_bytes()).unwrap();
    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    let mut problem = ptr::null_mut();
    assert_eq!(
        unsafe { robrel_problem_from_file(c_path.as_ptr(), &mut problem) },
        RobrelStatus::Ok
    );
    unsafe { robrel_problem_free(problem) };

    let missing = CString::new(dir.path().join("nope.json").to_str().unwrap()).unwrap();
    assert_eq!(
        unsafe { robrel_problem_from_file(missing.as_ptr(), &mut problem) },
        RobrelStatus::Io
    );
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(robrel_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
