//! Library sweeps (rayon when built with the default `parallel` feature)
//! against plain sequential loops over the same public API.
//!
//! `cargo bench` compares rayon with sequential;
//! `cargo bench --no-default-features` shows the fallback's overhead.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ozmac::macsim::{batch_dot_products, exhaustive_equivalence, operands};
use ozmac::profiler::PopcountHistogram;
use ozmac::{
    bmac_compute, dot_product, ozmac_compute, AccumulatorState, BitWidth, Operand, PrecisionConfig,
    Role, Unit,
};

fn backend() -> &'static str {
    if ozmac::par::is_parallel() {
        "rayon"
    } else {
        "fallback"
    }
}

fn sequential_equivalence(cfg: &PrecisionConfig) -> u64 {
    let (wlo, whi) = cfg.weight_bits.range(cfg.signedness);
    let (alo, ahi) = cfg.activation_bits.range(cfg.signedness);
    let acc = AccumulatorState::zero(cfg);
    let mut bad = 0;
    for w in wlo..=whi {
        let wo = Operand::weight(w, cfg.weight_bits, cfg.signedness).unwrap();
        for a in alo..=ahi {
            let ao = Operand::activation(a, cfg.activation_bits, cfg.signedness).unwrap();
            let oz = ozmac_compute(&wo, &ao, acc, cfg).unwrap();
            let b = bmac_compute(&wo, &ao, acc, cfg).unwrap();
            bad += u64::from(oz.result != w * a || b.result != oz.result);
        }
    }
    bad
}

fn exhaustive(c: &mut Criterion) {
    let cfg: PrecisionConfig = "8x8".parse().unwrap();
    let mut g = c.benchmark_group("exhaustive_8x8");
    g.sample_size(20);
    g.bench_function(backend(), |b| {
        b.iter(|| exhaustive_equivalence(black_box(&cfg)))
    });
    g.bench_function("sequential", |b| {
        b.iter(|| sequential_equivalence(black_box(&cfg)))
    });
    g.finish();
}

fn batch(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut g = c.benchmark_group("batch_dot_products");
    for label in ["8x8", "8x16"] {
        let cfg: PrecisionConfig = label.parse().unwrap();
        let (wlo, whi) = cfg.weight_bits.range(cfg.signedness);
        let (alo, ahi) = cfg.activation_bits.range(cfg.signedness);
        let batch: Vec<(Vec<Operand>, Vec<Operand>)> = (0..2048)
            .map(|_| {
                let w: Vec<i64> = (0..256).map(|_| rng.gen_range(wlo..=whi)).collect();
                let a: Vec<i64> = (0..256).map(|_| rng.gen_range(alo..=ahi)).collect();
                (
                    operands(&w, Role::Weight, &cfg).unwrap(),
                    operands(&a, Role::Activation, &cfg).unwrap(),
                )
            })
            .collect();
        g.bench_with_input(BenchmarkId::new(backend(), label), &batch, |b, batch| {
            b.iter(|| batch_dot_products(batch, &cfg, Unit::Ozmac).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("sequential", label), &batch, |b, batch| {
            b.iter(|| {
                batch
                    .iter()
                    .map(|(w, a)| dot_product(w, a, &cfg, Unit::Ozmac).unwrap())
                    .collect::<Vec<_>>()
            })
        });
    }
    g.finish();
}

fn histogram(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let values: Vec<i64> = (0..4_000_000).map(|_| rng.gen_range(-128..=127)).collect();
    let mut g = c.benchmark_group("popcount_histogram_4M");
    g.sample_size(20);
    g.bench_function(backend(), |b| {
        b.iter(|| PopcountHistogram::from_values(BitWidth::W8, black_box(&values)))
    });
    g.bench_function("sequential", |b| {
        b.iter(|| {
            let mut h = PopcountHistogram::empty(BitWidth::W8);
            for v in black_box(&values) {
                h.counts[v.unsigned_abs().count_ones() as usize] += 1;
            }
            h
        })
    });
    g.finish();
}

criterion_group!(benches, exhaustive, batch, histogram);
criterion_main!(benches);
