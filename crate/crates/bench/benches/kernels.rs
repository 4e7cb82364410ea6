use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use tsnet_bench::test_image;
use tsnet_core::network::{Batch, Network, NetworkShape, Precision};
use tsnet_core::transforms::{assemble_frequency_cube, blockwise_dft, blockwise_haar_dwt};
use tsnet_core::{BlockSize, TransformConfig};

fn transforms(c: &mut Criterion) {
    let img = test_image(256);
    let luma = img.channel(0);
    let mut g = c.benchmark_group("transforms_256");
    for bs in [BlockSize::Pixels(8), BlockSize::Pixels(32), BlockSize::Full] {
        g.bench_with_input(BenchmarkId::new("dft", bs), &bs, |b, bs| {
            b.iter(|| blockwise_dft(black_box(&luma), *bs).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("haar", bs), &bs, |b, bs| {
            b.iter(|| blockwise_haar_dwt(black_box(&luma), *bs).unwrap())
        });
    }
    let cfg = TransformConfig::default();
    g.bench_function("cube_18ch", |b| {
        b.iter(|| assemble_frequency_cube(black_box(&img), &cfg).unwrap())
    });
    g.finish();
}

fn network(c: &mut Criterion) {
    let net = Network::init(NetworkShape::default().with_inputs(18), 1).unwrap();
    let cube = assemble_frequency_cube(&test_image(64), &TransformConfig::default()).unwrap();
    let inputs = vec![cube.into_planes(); 24];
    let batch = Batch::from_images(&inputs).unwrap();
    let labels: Vec<_> = (0..24)
        .map(|i| tsnet_core::Label::from_index(i % 2).unwrap())
        .collect();
    let mut g = c.benchmark_group("network_64x64x18_batch24");
    g.sample_size(10);
    for precision in [Precision::F64, Precision::F32] {
        let name = format!("{precision:?}");
        g.bench_function(BenchmarkId::new("forward", &name), |b| {
            b.iter(|| net.forward_with(black_box(&batch), precision).unwrap())
        });
        g.bench_function(BenchmarkId::new("loss_and_grad", &name), |b| {
            b.iter(|| {
                net.loss_and_grad_with(black_box(&batch), &labels, 5e-4, precision)
                    .unwrap()
            })
        });
    }
    g.finish();
}

criterion_group!(benches, transforms, network);
criterion_main!(benches);
