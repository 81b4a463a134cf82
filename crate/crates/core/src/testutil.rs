//! Shared unit-test fixtures.
//!
//! Small page labels (`1`, `2`, ...) are shifted past the reserved ids so
//! the fixtures can use the labels of hand-worked examples directly.

use crate::ingest::Session;
use crate::token::{PageId, Token};

pub const OFFSET: u32 = 100;

pub fn pid(label: u32) -> PageId {
    PageId::new(label + OFFSET).unwrap()
}

pub fn pg(label: u32) -> Token {
    Token::Page(pid(label))
}

pub fn sess(labels: &[u32]) -> Session {
    Session::new(labels.iter().map(|&l| pid(l)).collect(), 0.0).unwrap()
}

pub fn repeat(labels: &[u32], times: usize) -> Vec<Session> {
    (0..times).map(|_| sess(labels)).collect()
}

/// Fourteen sessions through page 2 whose second-order statistics are
/// p(3|1,2)=3/4, p(3|4,2)=4/6, p(3|6,2)=1/4 against a first-order
/// p(3|2)=8/14.
pub fn fixture_a() -> Vec<Session> {
    let mut v = Vec::new();
    v.extend(repeat(&[1, 2, 3], 3));
    v.extend(repeat(&[1, 2, 5], 1));
    v.extend(repeat(&[4, 2, 3], 4));
    v.extend(repeat(&[4, 2, 5], 2));
    v.extend(repeat(&[6, 2, 3], 1));
    v.extend(repeat(&[6, 2, 5], 3));
    v
}
