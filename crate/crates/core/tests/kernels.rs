//! Layer kernels against naive reference implementations.

mod common;

use common::oracles::{attention_worst, bilstm_worst, gcn_worst};

#[test]
fn gcn_matches_matrix_chain() {
    let worst = gcn_worst(10);
    assert!(worst < 1e-10, "{worst}");
}

#[test]
fn bilstm_matches_scalar_recurrence() {
    let worst = bilstm_worst(10);
    assert!(worst < 1e-10, "{worst}");
}

#[test]
fn attention_matches_value_output_product() {
    let worst = attention_worst(10);
    assert!(worst < 1e-10, "{worst}");
}
