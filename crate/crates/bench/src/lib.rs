//! Fixtures shared by the solver benchmarks.

use lagspec::mc::{EnsembleSpec, Field, Variant};

/// `count` points evenly spaced on `[0, top]`.
pub fn radial_grid(top: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| top * k as f64 / (count - 1) as f64).collect()
}

/// Single-sample lagged ensemble with `T = N / r` and unit lag.
pub fn lagged_spec(n: usize, r: f64) -> EnsembleSpec {
    EnsembleSpec {
        n,
        t: (n as f64 / r).round() as usize,
        tau: 1,
        field: Field::Complex,
        variant: Variant::LaggedNilpotent,
        samples: 1,
        seed: 7,
    }
}
