#![allow(dead_code)]

use std::sync::OnceLock;

use covforge::discover::{replay_catalog, ReplayOptions, ReplayReport};
use covforge::registry::Registry;
use covforge::FormContext;

pub fn ctx7() -> FormContext {
    FormContext::new(7).unwrap()
}

fn replay(max_degree: u32) -> (Registry, ReplayReport) {
    replay_catalog(
        &ctx7(),
        ReplayOptions {
            max_degree,
            operational_orders: false,
            include_opaque: true,
        },
    )
    .unwrap()
}

/// Reference generators of degree at most 13.
pub fn registry_13() -> &'static (Registry, ReplayReport) {
    static R: OnceLock<(Registry, ReplayReport)> = OnceLock::new();
    R.get_or_init(|| replay(13))
}

/// Every reference generator.
pub fn registry_30() -> &'static (Registry, ReplayReport) {
    static R: OnceLock<(Registry, ReplayReport)> = OnceLock::new();
    R.get_or_init(|| replay(30))
}

/// Records of `reg` with a polynomial and degree at most `max_degree`,
/// excluding the base form.
pub fn small_records(reg: &Registry, max_degree: u32) -> Vec<usize> {
    reg.records()
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, r)| r.degree <= max_degree && r.value.is_some())
        .map(|(k, _)| k)
        .collect()
}
