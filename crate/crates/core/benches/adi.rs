use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use symfin::models::{catalog, Params};
use symfin::numeric::{solve_fd, Boundary, Direction, Exec, FdData, Grid, NumericEnv};

fn bench_adi(c: &mut Criterion) {
    let mut p = Params::symbolic("bs2d_canonical").unwrap();
    p.bind("phi1", "1").unwrap();
    p.bind("phi2", "11/10").unwrap();
    p.bind("k", "1/20").unwrap();
    let pde = catalog(&p).unwrap();
    let env = NumericEnv::new();
    let initial = |x: f64, y: f64| (-(x * x + y * y)).exp();
    let boundary = |_: f64, x: f64, y: f64| (-(x * x + y * y)).exp();

    let mut group = c.benchmark_group("adi");
    group.sample_size(10);
    for n in [101usize, 201] {
        let grid = Grid::new((-2.0, 2.0), (-2.0, 2.0), n, n, (0.0, 0.25), 50, Direction::Backward).unwrap();
        for (name, exec) in [("parallel", Exec::Parallel), ("sequential", Exec::Sequential)] {
            group.bench_with_input(BenchmarkId::new(name, n), &grid, |b, g| {
                b.iter(|| {
                    let data = FdData { initial: &initial, boundary: Boundary::Dirichlet(&boundary) };
                    solve_fd(&pde, &env, g, &data, exec).unwrap()
                })
            });
        }
    }
    group.finish();
}

criterion_group!(benches, bench_adi);
criterion_main!(benches);
