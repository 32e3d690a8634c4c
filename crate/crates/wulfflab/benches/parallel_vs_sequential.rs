//! Benchmarks for the data-parallel kernels.  Run once with the default
//! features and once with `--no-default-features` to compare the rayon
//! pool against the sequential fallback:
//!
//! ```text
//! cargo bench -p wulfflab
//! cargo bench -p wulfflab --no-default-features
//! ```

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::Vector3;
use wulfflab::anisotropy::Tension;
use wulfflab::energy::{anisotropic_mean_curvature, potential_energy, surface_energy};
use wulfflab::potential::Potential;
use wulfflab::shapes::{symmetric_difference, Shape, Star3};

#[cfg(feature = "parallel")]
const MODE: &str = "parallel";
#[cfg(not(feature = "parallel"))]
const MODE: &str = "sequential";

fn wobbly_star(n_theta: usize) -> Star3 {
    Star3::from_fn(Vector3::zeros(), n_theta, 2 * n_theta, |t, p| {
        1.0 + 0.1 * (3.0 * t).sin() * (4.0 * p).cos()
    })
    .unwrap()
}

fn bench_surface_energy(c: &mut Criterion) {
    let f = Tension::ellipsoidal(Vector3::new(1.0, 1.0, 2.0)).unwrap();
    for &n in &[32usize, 64] {
        let shape = Shape::Star3(wobbly_star(n));
        c.bench_with_input(
            BenchmarkId::new(format!("surface_energy/{MODE}"), n),
            &shape,
            |b, s| b.iter(|| surface_energy(s, &f).unwrap()),
        );
    }
}

fn bench_potential_energy(c: &mut Criterion) {
    let g = Potential::radial_power(2).unwrap();
    for &n in &[32usize, 64] {
        let shape = Shape::Star3(wobbly_star(n));
        c.bench_with_input(
            BenchmarkId::new(format!("potential_energy/{MODE}"), n),
            &shape,
            |b, s| b.iter(|| potential_energy(s, &g).unwrap()),
        );
    }
}

fn bench_curvature(c: &mut Criterion) {
    let f = Tension::ellipsoidal(Vector3::new(1.0, 1.0, 2.0)).unwrap();
    for &n in &[32usize, 64] {
        let star = wobbly_star(n);
        c.bench_with_input(
            BenchmarkId::new(format!("anisotropic_mean_curvature/{MODE}"), n),
            &star,
            |b, s| b.iter(|| anisotropic_mean_curvature(s, &f).unwrap()),
        );
    }
}

fn bench_symdiff(c: &mut Criterion) {
    let a = Shape::Star3(wobbly_star(24));
    let b_shape = Shape::Star3(Star3::ball(Vector3::zeros(), 1.0, 24, 48).unwrap());
    c.bench_function(&format!("symmetric_difference/{MODE}/96"), |b| {
        b.iter(|| symmetric_difference(&a, &b_shape, 96).unwrap())
    });
}

criterion_group!(
    benches,
    bench_surface_energy,
    bench_potential_energy,
    bench_curvature,
    bench_symdiff
);
criterion_main!(benches);
