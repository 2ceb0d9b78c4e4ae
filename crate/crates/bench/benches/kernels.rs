//! Timings of the inner kernels: corrector builds, Bloch fibers, fine-solver
//! operator application, and expansion assembly.

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use wavehom::bloch::{assemble, ground_state, CoefficientSpectrum, DEFAULT_K};
use wavehom::domain::LineDomain;
use wavehom::expansion::ExpansionKind;
use wavehom::fine::FineOperator;
use wavehom::harness::{Context, ExperimentConfig};
use wavehom::hyperbolic::HyperbolicCorrectors;
use wavehom::spectral::SpectralCorrectors;
use wavehom::{CellGrid, CoefficientField, Complex64};

fn correctors(c: &mut Criterion) {
    let a = CoefficientField::test_field();
    let grid = CellGrid::new(256);
    c.bench_function("spectral correctors ell=6 N=256", |b| b.iter(|| SpectralCorrectors::build(&a, &grid, black_box(6)).unwrap()));
    c.bench_function("hyperbolic correctors ell=6 N=256", |b| b.iter(|| HyperbolicCorrectors::build(&a, &grid, black_box(6)).unwrap()));
}

fn bloch_fiber(c: &mut Criterion) {
    let spec = CoefficientSpectrum::new(&CoefficientField::test_field(), DEFAULT_K);
    c.bench_function("Bloch ground state K=32", |b| b.iter(|| ground_state(&assemble(&spec, black_box(0.3), spec.k)).unwrap()));
}

fn fine_operator(c: &mut Criterion) {
    let domain = LineDomain::new(8, 1.0 / 32.0, 32).unwrap();
    let op = FineOperator::new(&CoefficientField::test_field(), &domain);
    let u: Vec<Complex64> = (0..domain.m()).map(|j| Complex64::new((-domain.x(j).powi(2)).exp(), 0.0)).collect();
    c.bench_function("fine operator apply eps=1/32", |b| b.iter(|| op.apply(black_box(&u))));
}

fn expansion(c: &mut Criterion) {
    let ctx = Context::new(ExperimentConfig::default()).unwrap();
    let eps = 1.0 / 32.0;
    let sm = ctx.spectral_modes(3, eps, &[2.0]).unwrap();
    let hm = ctx.hyperbolic_modes(3, eps, &[2.0]).unwrap();
    c.bench_function("spectral expansion ell=3", |b| b.iter(|| ctx.expansion(ExpansionKind::Spectral, 3, eps, &sm, black_box(2.0)).unwrap()));
    c.bench_function("hyperbolic expansion ell=3", |b| b.iter(|| ctx.expansion(ExpansionKind::Hyperbolic, 3, eps, &hm, black_box(2.0)).unwrap()));
}

criterion_group!(benches, correctors, bloch_fiber, fine_operator, expansion);
criterion_main!(benches);
