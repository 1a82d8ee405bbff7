//! Benchmark fixtures.

use losnet_core::data::{generate_synthetic, prepare, SynthProfile, WrangleOptions};
use losnet_core::FeatureMatrix;

/// Encoded synthetic features, ready for training.
pub fn features(rows: usize, seed: u64) -> FeatureMatrix {
    let ds = generate_synthetic(rows, seed, &SynthProfile::default()).expect("rows >= 1");
    let (encoded, _, _) = prepare(&ds, &WrangleOptions::default()).expect("synthetic data wrangles");
    FeatureMatrix::from_dataset(&encoded).expect("encoded data is numeric")
}
