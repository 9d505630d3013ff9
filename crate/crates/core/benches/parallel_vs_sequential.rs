use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use docsolve::expr::parse;
use docsolve::fde::solve_forward_batch;
use docsolve::fracops::distributed_matrix_with;
use docsolve::mangasarian::{check_concavity_with, SampleBox};
use docsolve::{BoundaryMode, DistributionKernel, Exec, Grid, OperatorKind, ProblemSpec, SampledFn};

fn strategies() -> Vec<(&'static str, Exec)> {
    let mut v = vec![("sequential", Exec::Sequential)];
    #[cfg(feature = "parallel")]
    v.push(("parallel", Exec::Parallel));
    v
}

fn problem() -> ProblemSpec {
    ProblemSpec::new(
        parse("-(x - t^2)^2 - (u - t*(t-1)/ln(t))^2").unwrap(),
        vec![parse("-x^3 + u").unwrap()],
        parse("gamma(3-alpha)/2").unwrap(),
        (0.0, 1.0),
        1,
        1,
        BoundaryMode::InitialFixed(vec![0.0]),
        None,
    )
    .unwrap()
}

fn bench(c: &mut Criterion) {
    let kernel = DistributionKernel::build(&parse("gamma(3-alpha)/2").unwrap(), 20).unwrap();
    let grid = Grid::new(0.0, 1.0, 1000).unwrap();
    let p = problem();
    let a = distributed_matrix_with(OperatorKind::DistributedCaputoLeft, &kernel, &grid, Exec::Sequential).unwrap();
    let x: Vec<f64> = grid.nodes().iter().map(|t| t.sin()).collect();
    let controls: Vec<SampledFn> = (0..8)
        .map(|j| SampledFn::from_fn(grid, |t| (j as f64 * t).cos()).unwrap())
        .collect();
    let sbox = SampleBox::new((0.0, 1.0), vec![(-1.0, 2.0)], vec![(-1.0, 2.0)], (21, 21, 21)).unwrap();

    let mut g = c.benchmark_group("core");
    g.sample_size(10);
    for (name, exec) in strategies() {
        g.bench_function(BenchmarkId::new("matrix_build", name), |b| {
            b.iter(|| distributed_matrix_with(OperatorKind::DistributedCaputoLeft, &kernel, &grid, exec).unwrap())
        });
        g.bench_function(BenchmarkId::new("apply", name), |b| b.iter(|| a.apply_with(&x, exec)));
        g.bench_function(BenchmarkId::new("concavity_check", name), |b| {
            b.iter(|| check_concavity_with(&p, &sbox, 1e-8, exec).unwrap())
        });
        g.bench_function(BenchmarkId::new("forward_batch", name), |b| {
            b.iter(|| solve_forward_batch(&p, &a, &controls, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
