use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nanoplate_core::discretization::{assemble, build_space};
use nanoplate_core::exec::Execution;
use nanoplate_core::expr::Expr;
use nanoplate_core::field::AnnularBump;
use nanoplate_core::geometry::Domain;
use nanoplate_core::material::MaterialField;
use nanoplate_core::neumann::synthesize;
use nanoplate_core::uc_lab::{carleman_sweep, tau_range, CarlemanWeight, Operator, SweepOptions};
use std::hint::black_box;
use std::sync::Arc;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn assembly(c: &mut Criterion) {
    let dom = Domain::disk(1.0).unwrap();
    let mat = MaterialField::constant(1.0, 1.0, 1.0, [1.0; 3]);
    let data = synthesize(&Expr::parse("x1^3").unwrap(), &mat, &dom, 256).unwrap();
    let space = Arc::new(build_space(&dom, 4, 16).unwrap());
    let mut g = c.benchmark_group("assemble_disk_p4_n16");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| black_box(assemble(space.clone(), &mat, &data, exec).unwrap()))
        });
    }
    g.finish();
}

fn sweep(c: &mut Criterion) {
    let u = AnnularBump::new(0.1, 0.45);
    let w = CarlemanWeight::new(0.2).unwrap();
    let taus = tau_range(8.0, 32.0, 7);
    let mut g = c.benchmark_group("carleman_trilaplace");
    g.sample_size(10);
    for (name, exec) in MODES {
        let opts = SweepOptions { exec, ..Default::default() };
        g.bench_with_input(BenchmarkId::from_parameter(name), &opts, |b, opts| {
            b.iter(|| black_box(carleman_sweep(Operator::Trilaplace, &u, &u.support(), &w, &taus, opts).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, assembly, sweep);
criterion_main!(benches);
