use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use proptest::prelude::*;

use radnet_core::detect::{cell_to_range_velocity, extract_detections};
use radnet_core::preprocess::{
    assemble_input, make_targets, normalize_cell, phase_normalize, range_doppler, CellAnnotation,
    RangeDopplerCube, Window,
};
use radnet_core::scene::{
    ground_truth_cell, steering_phases, synthesize_frame, CameraModel, ClutterModel, ObjectState,
    RadarConfig, RadarFrame,
};

/// Direct double sum, no FFT: X[k][m'] = sum_i sum_j x[i][j] e^{-2pi j (k i / K + m j / M)}.
fn dft_oracle(frame: &RadarFrame, receiver: usize) -> Vec<Complex64> {
    let (k_len, m_len, _) = frame.dims();
    // separable: first over fast time, then slow time, both by direct summation
    let mut ranged = vec![Complex64::new(0.0, 0.0); k_len * m_len];
    for m in 0..m_len {
        for k in 0..k_len {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..k_len {
                let w = Complex64::from_polar(1.0, -TAU * ((k * i) % k_len) as f64 / k_len as f64);
                acc += frame.get(i, m, receiver) * w;
            }
            ranged[k * m_len + m] = acc;
        }
    }
    let mut out = vec![Complex64::new(0.0, 0.0); k_len * m_len];
    for k in 0..k_len {
        for m_shifted in 0..m_len {
            let m = (m_shifted + m_len / 2) % m_len;
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..m_len {
                let w = Complex64::from_polar(1.0, -TAU * ((m * j) % m_len) as f64 / m_len as f64);
                acc += ranged[k * m_len + j] * w;
            }
            out[k * m_len + m_shifted] = acc;
        }
    }
    out
}

fn argmax(values: &[Complex64]) -> usize {
    values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .map(|(i, _)| i)
        .unwrap()
}

fn wrap(x: f64) -> f64 {
    (x + PI).rem_euclid(TAU) - PI
}

fn frame_from(values: &[(f64, f64)], k: usize, m: usize, n: usize) -> RadarFrame {
    let mut frame = RadarFrame::zeros(k, m, n);
    for (z, &(re, im)) in frame.samples.iter_mut().zip(values.iter().cycle()) {
        *z = Complex64::new(re, im);
    }
    frame
}

fn noiseless(k: usize, m: usize) -> RadarConfig {
    RadarConfig {
        noise_sigma: 0.0,
        ..RadarConfig::with_dims(k, m)
    }
}

fn random_cube(values: &[(f64, f64)], k: usize, m: usize, n: usize) -> RangeDopplerCube {
    let mut cube = RangeDopplerCube::zeros(k, m, n);
    for (z, &(re, im)) in cube.spectra.iter_mut().zip(values.iter().cycle()) {
        *z = Complex64::new(re, im);
    }
    cube
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn fft_matches_direct_dft(
        size in prop::sample::select(vec![16usize, 32, 64]),
        values in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 64..256),
    ) {
        let frame = frame_from(&values, size, size, 2);
        let cube = range_doppler(&frame, Window::None).unwrap();
        for n in 0..2 {
            let oracle = dft_oracle(&frame, n);
            let got = &cube.spectra[n * size * size..(n + 1) * size * size];
            let num: f64 = got.iter().zip(&oracle).map(|(a, b)| (a - b).norm_sqr()).sum();
            let den: f64 = oracle.iter().map(|b| b.norm_sqr()).sum();
            prop_assert!((num / den).sqrt() < 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalization_zeroes_reference_and_keeps_magnitudes(
        values in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 16..400),
    ) {
        let cube = random_cube(&values, 16, 16, 4);
        let out = phase_normalize(&cube).unwrap();
        let eps = 1e-12 * cube.max_magnitude();
        for k in 0..16 {
            for m in 0..16 {
                let reference = out.get(k, m, 0);
                if cube.get(k, m, 0).norm() >= eps {
                    prop_assert!(reference.im.abs() <= 1e-9 * reference.norm().max(1.0));
                    prop_assert!(reference.re >= 0.0);
                }
                for n in 0..4 {
                    let (a, b) = (cube.get(k, m, n).norm(), out.get(k, m, n).norm());
                    prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
                }
            }
        }
    }

    #[test]
    fn normalization_ignores_global_rotation(
        cells in prop::collection::vec(prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 8), 1..40),
        phi in -PI..PI,
    ) {
        let rot = Complex64::from_polar(1.0, phi);
        for cell in cells {
            let mut a: Vec<Complex64> = cell.iter().map(|&(re, im)| Complex64::new(re, im)).collect();
            let mut b: Vec<Complex64> = a.iter().map(|z| z * rot).collect();
            normalize_cell(&mut a, 1e-12);
            normalize_cell(&mut b, 1e-12);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).norm() <= 1e-12 * x.norm().max(1.0));
            }
        }
    }

    #[test]
    fn steering_phases_survive_to_the_peak(
        range in 4.0f64..28.0,
        vel_frac in -0.4f64..0.4,
        azimuth in -0.6f64..0.6,
        elevation in -0.3f64..0.3,
    ) {
        let config = noiseless(32, 32);
        let object = ObjectState {
            range,
            radial_velocity: vel_frac * config.max_velocity(),
            azimuth,
            elevation,
            amplitude: 1.0,
        };
        let frame = synthesize_frame(&config, Some(&object), &ClutterModel::empty(), 0).unwrap();
        let cube = range_doppler(&frame, Window::None).unwrap();
        let (k, m) = cube.peak_cell(0);
        let psi = steering_phases(&config, azimuth, elevation).unwrap();
        let normalized = phase_normalize(&cube).unwrap();
        for (n, want) in psi.iter().enumerate() {
            let raw = (cube.get(k, m, n) / cube.get(k, m, 0)).arg();
            prop_assert!(wrap(raw - want).abs() < 1e-6);
            prop_assert!(wrap(normalized.get(k, m, n).arg() - want).abs() < 1e-6);
        }
        // inverse: azimuth and elevation from the two baselines next to receiver 0
        let wl = config.wavelength();
        let pos = &config.receiver_positions;
        let h = (1..pos.len()).find(|&n| pos[n][1] == 0.0 && pos[n][0] > 0.0).unwrap();
        let v = (1..pos.len()).find(|&n| pos[n][0] == 0.0 && pos[n][1] > 0.0).unwrap();
        let horizontal = normalized.get(k, m, h).arg() * wl / (TAU * pos[h][0]);
        let vertical = normalized.get(k, m, v).arg() * wl / (TAU * pos[v][1]);
        let el = vertical.asin();
        let az = (horizontal / el.cos()).asin();
        prop_assert!((el - elevation).abs() < 1e-6);
        prop_assert!((az - azimuth).abs() < 1e-6);
    }

    #[test]
    fn assemble_is_scale_invariant(
        values in prop::collection::vec((-4.0f64..4.0, -4.0f64..4.0), 16..200),
        exponent in -20i32..20,
        alpha in 1e-3f64..1e3,
    ) {
        let fg = random_cube(&values, 16, 16, 2);
        let bg = random_cube(&values[values.len() / 2..], 16, 16, 2);
        let base = assemble_input(&fg, &bg).unwrap();
        let p = 2f64.powi(exponent);
        let exact = assemble_input(&fg.scaled(p), &bg.scaled(p)).unwrap();
        prop_assert_eq!(&base.values, &exact.values);
        let general = assemble_input(&fg.scaled(alpha), &bg.scaled(alpha)).unwrap();
        for (a, b) in base.values.iter().zip(&general.values) {
            // one f32 rounding step at most
            prop_assert!((a - b).abs() <= f32::EPSILON * a.abs().max(f32::MIN_POSITIVE));
        }
        prop_assert!(base.values.iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn detections_depend_only_on_binarization(
        raw in prop::collection::vec(prop_oneof![0.0f32..0.4, 0.6f32..1.0], 256),
        power in 0.3f64..3.0,
    ) {
        let config = RadarConfig::with_dims(16, 16);
        let zeros = vec![0.3f32; 256];
        // strictly monotone map fixing 0.5: p -> 0.5 + sign * |2p - 1|^power / 2
        let warped: Vec<f32> = raw
            .iter()
            .map(|&p| {
                let d = 2.0 * f64::from(p) - 1.0;
                (0.5 + 0.5 * d.signum() * d.abs().powf(power)) as f32
            })
            .collect();
        let a = extract_detections(&raw, &zeros, &zeros, (16, 16), 0.5, 1, &config).unwrap();
        let b = extract_detections(&warped, &zeros, &zeros, (16, 16), 0.5, 1, &config).unwrap();
        prop_assert_eq!(a.len(), b.len());
        if let (Some(a), Some(b)) = (a.first(), b.first()) {
            prop_assert_eq!(&a.cells, &b.cells);
            prop_assert_eq!((a.k_min, a.k_max, a.m_min, a.m_max), (b.k_min, b.k_max, b.m_min, b.m_max));
        }
    }

    #[test]
    fn targets_mark_only_the_disk(
        k in 0usize..32, m in 0usize..32, x in 0.0f64..1.0, y in 0.0f64..1.0, radius in 0usize..3,
    ) {
        let t = make_targets(Some(&CellAnnotation { k, m, x_im: x, y_im: y }), (32, 32), radius);
        for i in 0..32usize * 32 {
            let (ki, mi) = (i / 32, i % 32);
            let inside = ki.abs_diff(k) <= radius && mi.abs_diff(m) <= radius;
            prop_assert_eq!(t.presence[i] == 1.0, inside);
            if inside {
                prop_assert_eq!(t.coord_x[i], x as f32);
                prop_assert_eq!(t.coord_y[i], y as f32);
            } else {
                prop_assert_eq!(t.presence[i], 0.0);
                prop_assert_eq!((t.coord_x[i], t.coord_y[i]), (0.0, 0.0));
            }
        }
    }
}

#[test]
fn camera_is_bijective_on_a_grid() {
    let cam = CameraModel::default();
    for i in 0..100 {
        for j in 0..100 {
            let x = 0.05 + 0.9 * i as f64 / 99.0;
            let y = 0.05 + 0.9 * j as f64 / 99.0;
            let (az, el) = cam.backproject(x, y);
            let (x2, y2) = cam.project(az, el).unwrap();
            assert!((x - x2).abs() < 1e-9 && (y - y2).abs() < 1e-9);
        }
    }
}

#[test]
fn spectrum_peak_is_the_ground_truth_cell() {
    let config = noiseless(64, 64);
    let v_half = config.max_velocity() / 2.0;
    for ri in 0..9 {
        let range = 4.0 + 24.0 * ri as f64 / 8.0 + 0.13;
        for vi in 0..7 {
            let velocity = -v_half + 2.0 * v_half * vi as f64 / 6.0 + 0.011;
            let object = ObjectState {
                range,
                radial_velocity: velocity,
                azimuth: 0.1,
                elevation: -0.05,
                amplitude: 0.5,
            };
            let frame = synthesize_frame(&config, Some(&object), &ClutterModel::empty(), 0).unwrap();
            let peak = argmax(&dft_oracle(&frame, 0));
            let cell = ground_truth_cell(&config, range, velocity);
            assert_eq!((peak / 64, peak % 64), cell, "R={range} v={velocity}");
        }
    }
}

#[test]
fn closed_loop_bin_mapping() {
    let config = noiseless(64, 64);
    let (dr, dv) = (config.range_resolution(), config.velocity_resolution());
    for i in 0..40 {
        let range = 4.0 + 24.0 * i as f64 / 39.0;
        let velocity = 0.4 * config.max_velocity() * ((i as f64 * 0.77).sin());
        let (k, m) = ground_truth_cell(&config, range, velocity);
        let (r, v) = cell_to_range_velocity(&config, k as f64, m as f64);
        assert!((r - range).abs() <= dr / 2.0 + 1e-9);
        assert!((v - velocity).abs() <= dv / 2.0 + 1e-9);
    }
}
