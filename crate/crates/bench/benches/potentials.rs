use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use dpi_bench::{blob, probes, reference_params};
use dpi_core::gravity::radial_series_potential;
use dpi_core::potentials::{dpi_closed, dpi_direct, dpi_integral, heat_series};
use dpi_core::{DensityFloor, DensityModel, QuadratureSpec, RadialSeriesSpec};

fn kernel_sums(c: &mut Criterion) {
    let (p, d) = reference_params();
    let floor = DensityFloor::default();
    let xs = probes(16);
    let mut group = c.benchmark_group("kernel_sums");
    for n in [16, 256, 4096] {
        let config = blob(n, 1);
        group.bench_with_input(BenchmarkId::new("direct", n), &config, |b, config| {
            b.iter(|| xs.iter().map(|x| dpi_direct(&p, &d, config, x, &floor).unwrap()).sum::<f64>())
        });
        group.bench_with_input(BenchmarkId::new("closed", n), &config, |b, config| {
            b.iter(|| xs.iter().map(|x| dpi_closed(&p, &d, config, x, &floor).unwrap()).sum::<f64>())
        });
    }
    group.finish();
}

fn heat_series_orders(c: &mut Criterion) {
    let (p, d) = reference_params();
    let floor = DensityFloor::default();
    let model = DensityModel::gaussian_mixture(blob(256, 2), d.epsilon).unwrap();
    let x = probes(1)[0];
    let mut group = c.benchmark_group("heat_series");
    for order in [1, 3, 6] {
        group.bench_with_input(BenchmarkId::from_parameter(order), &order, |b, &k| {
            b.iter(|| heat_series(&p, &d, &model, black_box(&x), k, &floor).unwrap())
        });
    }
    group.finish();
}

fn integral_form(c: &mut Criterion) {
    let (p, d) = reference_params();
    let floor = DensityFloor::default();
    let model = DensityModel::gaussian_mixture(blob(16, 3), d.epsilon).unwrap();
    let x = probes(2)[1];
    let mut group = c.benchmark_group("integral");
    group.sample_size(10);
    let specs = [
        ("gauss_hermite_20", QuadratureSpec::GaussHermite { points: 20 }),
        ("kernel_centered_8", QuadratureSpec::KernelCentered { points: 8 }),
        ("monte_carlo_20000", QuadratureSpec::MonteCarlo { samples: 20_000, seed: 5 }),
    ];
    for (name, spec) in specs {
        group.bench_function(name, |b| b.iter(|| dpi_integral(&p, &d, &model, black_box(&x), &spec, &floor).unwrap()));
    }
    group.finish();
}

fn radial_tail(c: &mut Criterion) {
    let (p, d) = reference_params();
    let shell = DensityModel::radial_shell(1.0, 1e-2).unwrap();
    let spec = RadialSeriesSpec::log_spaced(&d, 10.0, 100.0, 25, shell).unwrap();
    c.bench_function("radial_series_25", |b| b.iter(|| radial_series_potential(&spec, &d, p.u0).unwrap()));
}

criterion_group!(benches, kernel_sums, heat_series_orders, integral_form, radial_tail);
criterion_main!(benches);
