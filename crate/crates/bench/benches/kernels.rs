use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use exact_cantor::cantor::{Builder, ConstructionConfig};
use exact_cantor::dimension::{box_count_wpsi, mdp_lower_bound};
use exact_cantor::oracle::classify_exactness;
use exact_cantor::space::annulus_arcs;
use exact_cantor::{ApproxFunction, Ball, Rational};
use exact_cantor_bench::{annulus_around_a_third, geometric_mdp, r, rationals};
use num_bigint::BigInt;

fn band_counting(c: &mut Criterion) {
    let system = rationals();
    let a = annulus_around_a_third();
    let arcs = annulus_arcs(&a);
    let k = BigInt::from(1u64) << 80;
    c.bench_function("band_set count, k = 2^80", |b| {
        b.iter(|| {
            system
                .band_set(a.center.coord(), black_box(&arcs), &k, true)
                .unwrap()
                .count()
        })
    });
    let small = BigInt::from(200_000);
    c.bench_function("band enumeration, k = 2e5", |b| {
        b.iter(|| {
            arcs.iter()
                .map(|arc| system.band_in_arc(arc, black_box(&small)).unwrap().len())
                .sum::<usize>()
        })
    });
    c.bench_function("separation scan, q <= 200", |b| {
        b.iter(|| system.separation_scan(black_box(200)).unwrap())
    });
}

fn oracle(c: &mut Criterion) {
    let system = rationals();
    let psi = ApproxFunction::power(r(5, 2)).unwrap();
    let x = r(5, 17) + Rational::dyadic(1, 90);
    let lo = Rational::dyadic(1, 120);
    let one = Rational::one();
    c.bench_function("classify_exactness, band 2^-120..1", |b| {
        b.iter(|| {
            classify_exactness(
                black_box(&x),
                &Rational::dyadic(1, 400),
                &system,
                &psi,
                &r(7, 8),
                (&lo, &one),
            )
            .unwrap()
        })
    });
}

fn dimension(c: &mut Criterion) {
    let input = geometric_mdp(600);
    c.bench_function("mdp bound, 600 levels", |b| {
        b.iter(|| mdp_lower_bound(black_box(&input), 600).unwrap())
    });
    let psi = ApproxFunction::power(r(5, 4)).unwrap();
    let ks: Vec<u32> = (8..=14).collect();
    c.bench_function("box count of W_psi cover, q <= 256", |b| {
        b.iter(|| box_count_wpsi(&psi, black_box(256), &ks).unwrap())
    });
}

fn first_level(c: &mut Criterion) {
    let builder = Builder::new(ConstructionConfig::default()).unwrap();
    let root = Ball::new(r(1, 3), r(1, 40));
    let n = BigInt::from(20_000);
    let mut g = c.benchmark_group("construction");
    g.sample_size(10);
    g.bench_function("first level, N = 2e4", |b| {
        b.iter(|| builder.first_level_at(black_box(&root), &n).unwrap())
    });
    g.finish();
}

criterion_group!(benches, band_counting, oracle, dimension, first_level);
criterion_main!(benches);
