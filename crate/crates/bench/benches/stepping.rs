use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use kdvfd_core::kdv_scheme::{burgers_substep, step};
use kdvfd_core::linalg_banded::factor;
use kdvfd_core::{l2_singular_init, one_soliton, run, BandedOperator, Boundary, DtRule, Grid, SchemeConfig};

const SIZES: [usize; 3] = [1_000, 10_000, 100_000];

fn soliton(n: usize, boundary: Boundary) -> kdvfd_core::GridFunction {
    Grid::from_window(-10.0, 10.0, n, boundary)
        .unwrap()
        .sample(|x| one_soliton(x, -1.0))
        .unwrap()
}

fn time_step(n: usize) -> f64 {
    0.9 * (20.0 / n as f64) / 9.0
}

fn bench_factor(c: &mut Criterion) {
    let mut g = c.benchmark_group("factor");
    for n in SIZES {
        g.throughput(Throughput::Elements(n as u64));
        for boundary in [Boundary::TruncatedLine, Boundary::Periodic] {
            let op = BandedOperator::assemble(20.0 / n as f64, time_step(n), n, boundary).unwrap();
            g.bench_with_input(BenchmarkId::new(format!("{boundary:?}"), n), &op, |b, op| {
                b.iter(|| factor(black_box(op)).unwrap())
            });
        }
    }
    g.finish();
}

fn bench_solve(c: &mut Criterion) {
    let mut g = c.benchmark_group("solve");
    for n in SIZES {
        g.throughput(Throughput::Elements(n as u64));
        for boundary in [Boundary::TruncatedLine, Boundary::Periodic] {
            let op = BandedOperator::assemble(20.0 / n as f64, time_step(n), n, boundary).unwrap();
            let f = factor(&op).unwrap();
            let rhs = soliton(n, boundary).into_values();
            g.bench_with_input(BenchmarkId::new(format!("{boundary:?}"), n), &rhs, |b, rhs| {
                let mut work = rhs.clone();
                b.iter(|| {
                    work.copy_from_slice(rhs);
                    f.solve_in_place(black_box(&mut work)).unwrap();
                })
            });
        }
    }
    g.finish();
}

fn bench_step(c: &mut Criterion) {
    let mut g = c.benchmark_group("step");
    for n in SIZES {
        g.throughput(Throughput::Elements(n as u64));
        let u = soliton(n, Boundary::TruncatedLine);
        let dt = time_step(n);
        let f = factor(&BandedOperator::assemble(u.dx(), dt, n, Boundary::TruncatedLine).unwrap()).unwrap();
        g.bench_with_input(BenchmarkId::new("burgers", n), &u, |b, u| {
            b.iter(|| burgers_substep(black_box(u), dt))
        });
        g.bench_with_input(BenchmarkId::new("full", n), &u, |b, u| {
            b.iter(|| step(black_box(u), dt, &f).unwrap())
        });
    }
    g.finish();
}

fn bench_run(c: &mut Criterion) {
    let mut g = c.benchmark_group("run");
    g.sample_size(10);
    for n in [1_000, 4_000] {
        let mut config = SchemeConfig::new(-5.0, 5.0, n, Boundary::Periodic, 0.05);
        config.dt_rule = DtRule::Courant(0.9);
        config.cfl_delta = 0.1;
        config.record_every = usize::MAX;
        let u0 = config.grid().unwrap().sample(l2_singular_init).unwrap();
        for check in [false, true] {
            config.check_inequalities = check;
            let id = if check { "checked" } else { "unchecked" };
            g.bench_with_input(BenchmarkId::new(id, n), &config, |b, config| {
                b.iter(|| run(config, &u0).unwrap())
            });
        }
    }
    g.finish();
}

criterion_group!(benches, bench_factor, bench_solve, bench_step, bench_run);
criterion_main!(benches);
