use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use cmlat::catalog::{get_singularity, Family};
use cmlat::exec::Exec;
use cmlat::lattice::enumerate_closed;

fn enumerate(c: &mut Criterion) {
    let mut g = c.benchmark_group("enumerate_closed");
    g.sample_size(10);
    for (f, n) in [(Family::D, Some(8)), (Family::E7, None), (Family::A, Some(7))] {
        let def = get_singularity(f, n, 1).unwrap();
        for exec in [Exec::Sequential, Exec::Parallel] {
            g.bench_with_input(BenchmarkId::new(format!("{exec:?}"), &def.label), &def, |b, def| {
                b.iter(|| enumerate_closed(def, exec).unwrap())
            });
        }
    }
    g.finish();
}

criterion_group!(benches, enumerate);
criterion_main!(benches);
