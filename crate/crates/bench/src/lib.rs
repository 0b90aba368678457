//! Fixtures shared by the benchmarks.

use radnet_core::neural::{init_params, NetworkParams, NetworkSpec, Tensor4};
use radnet_core::scene::{synthesize_frame, ClutterModel, ClutterSpec, ObjectState};
use radnet_core::{RadarConfig, RadarFrame};

pub fn frame(k: usize, m: usize) -> RadarFrame {
    let config = RadarConfig::with_dims(k, m);
    let clutter = ClutterModel::generate(&config, &ClutterSpec::default(), 1).expect("clutter");
    let object = ObjectState {
        range: 10.0,
        radial_velocity: 1.5,
        azimuth: 0.2,
        elevation: -0.05,
        amplitude: 0.2,
    };
    synthesize_frame(&config, Some(&object), &clutter, 2).expect("frame")
}

/// Network and a deterministic pseudo-random input of shape [1, C, k, m].
pub fn network(k: usize, m: usize, widths: &[usize]) -> (NetworkParams<f32>, Tensor4<f32>) {
    let channels = 32;
    let spec = NetworkSpec::new(channels, widths).expect("spec");
    let params = init_params(&spec, 3);
    let data = (0..channels * k * m)
        .map(|i| ((i as f32 * 0.618_034).fract() - 0.5) * 0.4)
        .collect();
    (params, Tensor4::from_vec([1, channels, k, m], data).expect("input"))
}
