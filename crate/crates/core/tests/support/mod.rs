//! Shared generators and reference implementations for integration tests.
#![allow(dead_code)]

pub mod fake_llm;
pub mod graphs;
pub mod programs;

use std::path::PathBuf;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

/// `|a - b| <= tol * max(1, |a|, |b|)`, with equal infinities and NaNs
/// treated as matching.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    if a == b || (a.is_nan() && b.is_nan()) {
        return true;
    }
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
