use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use radnet_bench::{frame, network};
use radnet_core::neural::{
    conv2d_backward, conv2d_forward, unet_backward, unet_forward, unet_forward_trace, ConvGeometry,
    Tensor4,
};
use radnet_core::preprocess::{
    assemble_input, make_targets, phase_normalize, range_doppler, CellAnnotation, Window,
};
use radnet_core::training::{total_loss, LossWeights};

fn preprocessing(c: &mut Criterion) {
    let mut g = c.benchmark_group("preprocess");
    for size in [32usize, 64] {
        let f = frame(size, size);
        g.bench_with_input(BenchmarkId::new("range_doppler", size), &f, |b, f| {
            b.iter(|| range_doppler(black_box(f), Window::None).unwrap())
        });
        let cube = range_doppler(&f, Window::None).unwrap();
        g.bench_with_input(BenchmarkId::new("normalize_assemble", size), &cube, |b, cube| {
            b.iter(|| {
                let n = phase_normalize(black_box(cube)).unwrap();
                assemble_input(&n, &n).unwrap()
            })
        });
    }
    g.finish();
}

fn convolution(c: &mut Criterion) {
    let mut g = c.benchmark_group("conv3x3");
    for (cin, cout, size) in [(32usize, 16usize, 64usize), (64, 64, 16)] {
        let input = Tensor4::<f32>::filled([1, cin, size, size], 0.1);
        let weight = Tensor4::<f32>::filled([cout, cin, 3, 3], 0.01);
        let bias = vec![0.0f32; cout];
        let id = format!("{cin}x{cout}@{size}");
        g.bench_function(BenchmarkId::new("forward", &id), |b| {
            b.iter(|| conv2d_forward(black_box(&input), &weight, &bias, ConvGeometry::SAME_3X3).unwrap())
        });
        let out = conv2d_forward(&input, &weight, &bias, ConvGeometry::SAME_3X3).unwrap();
        g.bench_function(BenchmarkId::new("backward", &id), |b| {
            b.iter(|| conv2d_backward(&input, &weight, ConvGeometry::SAME_3X3, black_box(&out)).unwrap())
        });
    }
    g.finish();
}

fn unet(c: &mut Criterion) {
    let mut g = c.benchmark_group("unet");
    g.sample_size(10);
    let profiles: [(&str, usize, &[usize]); 2] = [
        ("desk_32", 32, &[8, 16, 32, 64, 128]),
        ("default_64", 64, &[16, 32, 64, 128, 256]),
    ];
    for (name, size, widths) in profiles {
        let (params, input) = network(size, size, widths);
        g.bench_function(BenchmarkId::new("forward", name), |b| {
            b.iter(|| unet_forward(&params, black_box(&input)).unwrap())
        });
        let targets = make_targets(
            Some(&CellAnnotation { k: size / 3, m: size / 2, x_im: 0.4, y_im: 0.6 }),
            (size, size),
            1,
        );
        g.bench_function(BenchmarkId::new("forward_backward", name), |b| {
            b.iter(|| {
                let (out, trace) = unet_forward_trace(&params, black_box(&input)).unwrap();
                let (_, grad) = total_loss(&out, &[&targets], &LossWeights::default()).unwrap();
                let mut grads = params.zeros_like();
                unet_backward(&params, &trace, &grad, &mut grads).unwrap();
                grads
            })
        });
    }
    g.finish();
}

criterion_group!(benches, preprocessing, convolution, unet);
criterion_main!(benches);
