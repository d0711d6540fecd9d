#![allow(dead_code)]

pub mod tolerances;

use nalgebra::{DMatrix, SymmetricEigen};
use quasiclassical::effective::effective_operator;
use quasiclassical::fock::{annihilation, creation, FockSpace, Mode, ModeSet, ModelFamily};
use quasiclassical::model::{Boundary, NamedPotential, ParticleModel, PotentialSplit, SpatialGrid};
use quasiclassical::{Complex, Operator, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            C64::new(re, im)
        })
        .collect()
}

pub fn normalized(mut v: Vec<C64>) -> Vec<C64> {
    let n = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    v.iter_mut().for_each(|c| *c /= n);
    v
}

pub fn uniform_complex(rng: &mut ChaCha8Rng, radius: f64) -> C64 {
    C64::new(rng.random_range(-radius..radius), rng.random_range(-radius..radius))
}

/// Two discrete modes with `ω` gapped away from zero.
pub fn massive_modes() -> ModeSet<f64> {
    ModeSet::discrete(
        1,
        vec![
            Mode { k: vec![1.0], omega: 1.0, coupling: C64::new(0.5, 0.0) },
            Mode { k: vec![2.0], omega: 2.0, coupling: C64::new(0.5, 0.0) },
        ],
    )
    .unwrap()
}

/// Complex couplings and mixed-sign momenta, for identities that must hold generically.
pub fn generic_modes() -> ModeSet<f64> {
    ModeSet::discrete(
        1,
        vec![
            Mode { k: vec![0.7], omega: 1.3, coupling: C64::new(0.4, -0.25) },
            Mode { k: vec![-1.6], omega: 0.8, coupling: C64::new(-0.15, 0.35) },
        ],
    )
    .unwrap()
}

/// One particle in `x²` on a Dirichlet box of half-width 5.
pub fn harmonic_particle(points: usize) -> ParticleModel<f64> {
    let grid = SpatialGrid::new(1, 5.0, points, Boundary::Dirichlet).unwrap();
    let u = NamedPotential::Harmonic { strength: 1.0 }.sample(&grid);
    ParticleModel::external(grid, 1, &u, PotentialSplit::PositivePart).unwrap()
}

pub fn trap_modes(grid: &SpatialGrid<f64>) -> ModeSet<f64> {
    ModeSet::fourier_dual(
        ModelFamily::NelsonCutoff,
        grid,
        |k| (1.0 + k[0] * k[0]).sqrt(),
        |k| C64::new(1.0 / (1.0 + k[0] * k[0]), 0.0),
    )
    .unwrap()
}

pub fn to_nalgebra(op: &Operator) -> DMatrix<C64> {
    let n = op.dim();
    let mut m = DMatrix::<C64>::zeros(n, n);
    for (r, c, v) in op.triplets() {
        m[(r, c)] = v;
    }
    m
}

/// All eigenvalues by dense Hermitian diagonalization, ascending.
pub fn dense_spectrum(op: &Operator) -> Vec<f64> {
    let eig = SymmetricEigen::new(to_nalgebra(op));
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

pub fn dense_ground(op: &Operator) -> f64 {
    dense_spectrum(op)[0]
}

/// `exp(G) v` for anti-Hermitian `G` by scaling and squaring of a Taylor series.
pub fn expm_apply(g: &Operator, v: &[C64]) -> Vec<C64> {
    let gnorm: f64 = g
        .to_dense()
        .iter()
        .map(|row| row.iter().map(|c| c.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let steps = (gnorm.max(1.0) * 4.0).ceil() as usize;
    let s = 1.0 / steps as f64;
    let mut out = v.to_vec();
    for _ in 0..steps {
        let mut term = out.clone();
        let mut acc = out.clone();
        for k in 1..60 {
            let next = g.matvec(&term);
            term = next.iter().map(|c| c * (s / k as f64)).collect();
            for (a, t) in acc.iter_mut().zip(&term) {
                *a += t;
            }
            if term.iter().map(|c| c.norm()).fold(0.0, f64::max) < 1e-18 {
                break;
            }
        }
        out = acc;
    }
    out
}

/// Coherent vector `exp((a†(f) − a(f))/ε) Ω` built from the truncated ladder operators.
pub fn coherent_by_exponential(space: &FockSpace<f64>, f: &[C64]) -> Vec<C64> {
    let dim = space.full_dim().unwrap();
    let mut gen = Operator::zero(dim);
    for (n, fz) in f.iter().enumerate() {
        let ad = creation(space, n).unwrap().scaled(*fz / space.eps());
        let a = annihilation(space, n).unwrap().scaled(-fz.conj() / space.eps());
        gen = gen.add(&ad).unwrap().add(&a).unwrap();
    }
    let mut vac = vec![C64::new(0.0, 0.0); dim];
    vac[0] = C64::new(1.0, 0.0);
    expm_apply(&gen, &vac)
}

/// Brute-force ground energy of `H₀ + V` by dense diagonalization.
pub fn dense_effective_ground(particles: &ParticleModel<f64>, v: &[f64]) -> f64 {
    dense_ground(&effective_operator(particles, v).unwrap())
}

pub fn cz(re: f64, im: f64) -> Complex<f64> {
    Complex::new(re, im)
}
