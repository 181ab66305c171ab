use criterion::{black_box, criterion_group, criterion_main, Criterion};
use gl2newform::characters::{characters_of_conductor, epsilon, gauss_sum};
use gl2newform::engine::{primal_identity, solve_identity};
use gl2newform::{default_t_max, Context, Newform, PAdicApprox};
use gl2newform_bench::principal_series;

fn gl1(c: &mut Criterion) {
    let ctx = Context::new(128);
    let mu = characters_of_conductor(5, 3).pop().expect("character");
    let x = PAdicApprox::new(5, -3, 2, 3).expect("point");
    c.bench_function("gauss_sum p=5 a=3", |b| b.iter(|| gauss_sum(&ctx, black_box(&x), &mu)));
    c.bench_function("epsilon p=5 a=3", |b| b.iter(|| epsilon(&ctx, black_box(&mu))));
}

fn solver(c: &mut Criterion) {
    let ctx = Context::new(128);
    let pi = principal_series(3, 4);
    let mu = characters_of_conductor(3, 2).pop().expect("character");
    let data = primal_identity(&ctx, &pi, &mu).expect("identity");
    c.bench_function("solve_identity p=3 n=4 k=2", |b| {
        b.iter(|| solve_identity(&ctx, 3, 4, 2, black_box(&mu), &data, default_t_max(4)))
    });
}

fn sup_norm(c: &mut Criterion) {
    let ctx = Context::new(128);
    let mut group = c.benchmark_group("sup_norm");
    group.sample_size(10);
    for (p, n) in [(3u64, 4u32), (3, 6), (5, 4)] {
        let pi = principal_series(p, n);
        group.bench_function(format!("p={p} n={n}"), |b| {
            b.iter(|| Newform::new(&ctx, pi.clone(), default_t_max(n)).and_then(|nf| nf.sup_norm()))
        });
    }
    group.finish();
}

criterion_group!(benches, gl1, solver, sup_norm);
criterion_main!(benches);
