//! Benchmark fixtures shared by the criterion benches.

use pseudomarket_core::simulator::presets::{build_preset, Experiment};
use pseudomarket_core::{Preset, PresetParams, TypeSpace};

/// Four-type space with mixed durations, the largest the oracle handles
/// comfortably.
pub fn four_types() -> TypeSpace {
    TypeSpace::from_triples(&[(1.0, 1, 0.1), (0.8, 3, 0.2), (0.3, 2, 0.3), (0.05, 5, 0.4)])
        .expect("valid type space")
}

pub fn preset(preset: Preset, horizon: usize) -> Experiment {
    build_preset(
        preset,
        &PresetParams {
            horizon: Some(horizon),
            ..PresetParams::default()
        },
    )
    .expect("valid preset")
}
