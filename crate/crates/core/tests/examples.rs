//! Every example runs to completion.

#[allow(dead_code)]
#[path = "../examples/quickstart.rs"]
mod quickstart;

#[test]
fn quickstart_runs() {
    quickstart::run_example().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/assignment_policy.rs"]
mod assignment_policy;

#[test]
fn assignment_policy_runs() {
    assignment_policy::run_example().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/agreement.rs"]
mod agreement;

#[test]
fn agreement_runs() {
    agreement::run_example().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/subject_association.rs"]
mod subject_association;

#[test]
fn subject_association_runs() {
    subject_association::run_example().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/release_roundtrip.rs"]
mod release_roundtrip;

#[test]
fn release_roundtrip_runs() {
    release_roundtrip::run_example().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/http_service.rs"]
mod http_service;

#[test]
fn http_service_runs() {
    http_service::run_example().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/classroom_simulation.rs"]
mod classroom_simulation;

#[test]
fn classroom_simulation_runs() {
    classroom_simulation::run_example().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/localized_catalogs.rs"]
mod localized_catalogs;

#[test]
fn localized_catalogs_runs() {
    localized_catalogs::run_example().unwrap();
}
