use criterion::{black_box, criterion_group, criterion_main, Criterion};

use ssbpr::fta::fta;
use ssbpr::geometry::{ashore_point, cover_len, embed_phase, RingPoint};
use ssbpr::metrics::analyze;
use ssbpr::params::solve_params;
use ssbpr::rational::rat;
use ssbpr::sim::{run, RunOptions};
use ssbpr_bench::{scrambled_values, shipped_scenario};

fn primitives(c: &mut Criterion) {
    for n in [7usize, 31] {
        let f = (n - 1) / 3;
        let values = scrambled_values(n);
        c.bench_function(&format!("fta n={n}"), |b| b.iter(|| fta(black_box(&values), n, f).unwrap()));
    }
    let points: Vec<RingPoint> = (0..31).map(|i| RingPoint::new(rat((i * 37) % 1000, 1000))).collect();
    c.bench_function("cover_len 31", |b| b.iter(|| cover_len(black_box(&points)).unwrap()));
    c.bench_function("embed and ashore", |b| {
        b.iter(|| ashore_point(embed_phase(black_box(RingPoint::new(rat(377, 1000))))))
    });
}

fn simulation(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulation");
    group.sample_size(10);
    for name in ["n5_r_keeper.toml", "n7_a_keeper.toml", "n31_r_keeper.toml"] {
        let mut s = shipped_scenario(name);
        s.rounds = 4;
        let p = solve_params(&s).unwrap();
        group.bench_function(name.trim_end_matches(".toml"), |b| {
            b.iter(|| {
                let trace = run(&s, &p, &RunOptions::default()).unwrap();
                analyze(&trace, &p).unwrap()
            })
        });
    }
    group.finish();
}

fn solver(c: &mut Criterion) {
    let s = shipped_scenario("n31_r_keeper.toml");
    c.bench_function("solve n=31", |b| b.iter(|| solve_params(black_box(&s)).unwrap()));
}

criterion_group!(benches, primitives, simulation, solver);
criterion_main!(benches);
