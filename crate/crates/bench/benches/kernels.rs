use criterion::{black_box, criterion_group, criterion_main, Criterion};
use varfrac::kernels::{build_kernel_table, eval_abel_kernel};
use varfrac::quadrature::{weights_beta_kernel, weights_g_kernel};
use varfrac::{ExponentFunction, IdentityFunction, TimeGrid};

fn kernels(c: &mut Criterion) {
    let exp = ExponentFunction::sine(0.6, 0.1).unwrap();
    let ident = IdentityFunction::new(&exp).unwrap();
    c.bench_function("abel_kernel", |b| {
        b.iter(|| eval_abel_kernel(&exp, black_box(0.37)).unwrap())
    });
    c.bench_function("identity_g", |b| {
        b.iter(|| ident.g(black_box(0.37)).unwrap())
    });
    c.bench_function("identity_g_prime", |b| {
        b.iter(|| ident.g_prime(black_box(0.37)).unwrap())
    });

    let mut group = c.benchmark_group("weights");
    group.sample_size(10);
    let grid = TimeGrid::new(1.0, 256).unwrap();
    group.bench_function("kernel_table_2048", |b| {
        b.iter(|| build_kernel_table(&exp, 1.0, 2048, 2.0, 16).unwrap())
    });
    let table = build_kernel_table(&exp, 1.0, 2048, 2.0, 16).unwrap();
    group.bench_function("g_kernel_N256", |b| {
        b.iter(|| weights_g_kernel(&table, 20.0, grid).unwrap())
    });
    group.bench_function("beta_kernel_N256", |b| {
        b.iter(|| weights_beta_kernel(0.6, 20.0, grid).unwrap())
    });
    group.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);
