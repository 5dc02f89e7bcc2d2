//! Fixture networks shared by unit tests.

use crate::netmodel::{parse_network, ReactionNetwork};

pub fn bd() -> ReactionNetwork {
    parse_network(include_str!("../tests/fixtures/bd.crn")).unwrap()
}

pub fn bd2() -> ReactionNetwork {
    parse_network(include_str!("../tests/fixtures/bd2.crn")).unwrap()
}

pub fn triangle() -> ReactionNetwork {
    parse_network(include_str!("../tests/fixtures/triangle.crn")).unwrap()
}

pub fn triangle_db() -> ReactionNetwork {
    parse_network(include_str!("../tests/fixtures/triangle_db.crn")).unwrap()
}

pub fn schlogl() -> ReactionNetwork {
    parse_network(include_str!("../tests/fixtures/schlogl.crn")).unwrap()
}

pub fn ab() -> ReactionNetwork {
    parse_network(include_str!("../tests/fixtures/ab.crn")).unwrap()
}
