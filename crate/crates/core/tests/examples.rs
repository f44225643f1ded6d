//! Runs every example so they stay in step with the library.

mod bryuno {
    include!("../examples/bryuno.rs");
}

mod lattice_alpha {
    include!("../examples/lattice_alpha.rs");
}

mod expand_torus {
    include!("../examples/expand_torus.rs");
}

mod residual_scan {
    include!("../examples/residual_scan.rs");
}

mod counting_lemmas {
    include!("../examples/counting_lemmas.rs");
}

mod self_energy {
    include!("../examples/self_energy.rs");
}

mod omega_measure {
    include!("../examples/omega_measure.rs");
}

mod epsilon_cantor {
    include!("../examples/epsilon_cantor.rs");
}

mod action_measure {
    include!("../examples/action_measure.rs");
}

mod lemma_suite {
    include!("../examples/lemma_suite.rs");
}

#[test]
fn example_bryuno() {
    bryuno::run_example().unwrap();
}

#[test]
fn example_lattice_alpha() {
    lattice_alpha::run_example().unwrap();
}

#[test]
fn example_expand_torus() {
    expand_torus::run_example().unwrap();
}

#[test]
fn example_residual_scan() {
    residual_scan::run_example().unwrap();
}

#[test]
fn example_counting_lemmas() {
    counting_lemmas::run_example().unwrap();
}

#[test]
fn example_self_energy() {
    self_energy::run_example().unwrap();
}

#[test]
fn example_omega_measure() {
    omega_measure::run_example().unwrap();
}

#[test]
fn example_epsilon_cantor() {
    epsilon_cantor::run_example().unwrap();
}

#[test]
fn example_action_measure() {
    action_measure::run_example().unwrap();
}

#[test]
fn example_lemma_suite() {
    lemma_suite::run_example().unwrap();
}
