//! Particle grids and the full particle-field Hamiltonian.
//!
//! Particles have mass ½, so the kinetic term is `−Δ` discretized by central
//! differences. An N-particle configuration index is mixed radix with axis 0
//! of particle 0 fastest. On the tensor space the field index is fastest:
//! `flat = config · dim(F) + fock`.

use num_complex::Complex;

use crate::error::{config, invalid, Error, Result};
use crate::fock::{FockSpace, DEFAULT_DIMENSION_BUDGET};
use crate::operator::SparseOperator;
use crate::scalar::{cis, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Walls at `±L`; the `G` nodes are interior, `h = 2L/(G+1)`.
    Dirichlet,
    /// Torus of length `2L`, `h = 2L/G`.
    Periodic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid<T: Scalar> {
    dim: usize,
    half_width: T,
    points: usize,
    boundary: Boundary,
}

impl<T: Scalar> SpatialGrid<T> {
    pub fn new(dim: usize, half_width: T, points: usize, boundary: Boundary) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(invalid(format!("spatial dimension {dim} not in 1..=3")));
        }
        if !(half_width > T::zero()) || !half_width.is_finite() {
            return Err(invalid("half-width must be positive"));
        }
        if points < 8 {
            return Err(invalid("need at least 8 points per axis"));
        }
        Ok(Self {
            dim,
            half_width,
            points,
            boundary,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> T {
        self.half_width
    }

    pub fn points_per_axis(&self) -> usize {
        self.points
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn spacing(&self) -> T {
        let g = T::from_usize_lossy(self.points);
        let w = self.half_width + self.half_width;
        match self.boundary {
            Boundary::Dirichlet => w / (g + T::one()),
            Boundary::Periodic => w / g,
        }
    }

    /// Coordinate of node `i` along an axis.
    pub fn coordinate(&self, i: usize) -> T {
        let h = self.spacing();
        let i = T::from_usize_lossy(i);
        match self.boundary {
            Boundary::Dirichlet => -self.half_width + (i + T::one()) * h,
            Boundary::Periodic => -self.half_width + i * h,
        }
    }

    pub fn axis(&self) -> Vec<T> {
        (0..self.points).map(|i| self.coordinate(i)).collect()
    }

    /// Number of single-particle sites, `G^d`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Position of single-particle site `idx`.
    pub fn point(&self, mut idx: usize) -> Vec<T> {
        (0..self.dim)
            .map(|_| {
                let i = idx % self.points;
                idx /= self.points;
                self.coordinate(i)
            })
            .collect()
    }

    pub fn points(&self) -> Vec<Vec<T>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Volume element `h^d`.
    pub fn cell_volume(&self) -> T {
        self.spacing().powi(self.dim as i32)
    }

    /// Number of N-particle configurations, `G^{dN}`.
    pub fn config_len(&self, n_particles: usize) -> Option<usize> {
        self.len().checked_pow(n_particles as u32)
    }

    /// Site of particle `j` in configuration `config`.
    pub fn particle_site(&self, config: usize, j: usize) -> usize {
        (config / self.len().pow(j as u32)) % self.len()
    }
}

/// Analytic single-particle potentials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NamedPotential<T: Scalar> {
    Zero,
    /// `s |x|²`.
    Harmonic { strength: T },
    /// `s |x|^p`.
    PowerLaw { strength: T, power: T },
    /// `V₀ Σ_a cos(q x_a)`.
    CosineLattice { depth: T, wavenumber: T },
}

impl<T: Scalar> NamedPotential<T> {
    pub fn evaluate(&self, x: &[T]) -> T {
        let r2: T = x.iter().map(|&c| c * c).sum();
        match *self {
            NamedPotential::Zero => T::zero(),
            NamedPotential::Harmonic { strength } => strength * r2,
            NamedPotential::PowerLaw { strength, power } => strength * r2.sqrt().powf(power),
            NamedPotential::CosineLattice { depth, wavenumber } => {
                depth * x.iter().map(|&c| (wavenumber * c).cos()).sum::<T>()
            }
        }
    }

    /// Samples on every site of a grid.
    pub fn sample(&self, grid: &SpatialGrid<T>) -> Vec<T> {
        (0..grid.len()).map(|i| self.evaluate(&grid.point(i))).collect()
    }
}

/// How the external potential splits against the kinetic energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialSplit {
    /// Bounded below.
    PositivePart,
    /// Relatively form-bounded with bound below 1.
    KatoSmall,
    Mixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleModel<T: Scalar> {
    grid: SpatialGrid<T>,
    n_particles: usize,
    potential: Vec<T>,
    split: PotentialSplit,
}

impl<T: Scalar> ParticleModel<T> {
    /// `N` particles in the same external potential, no pair term.
    pub fn external(grid: SpatialGrid<T>, n_particles: usize, single: &[T], split: PotentialSplit) -> Result<Self> {
        if single.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                found: single.len(),
            });
        }
        let total = Self::check_count(&grid, n_particles)?;
        let potential = (0..total)
            .map(|c| (0..n_particles).map(|j| single[grid.particle_site(c, j)]).sum())
            .collect();
        Self::from_samples(grid, n_particles, potential, split)
    }

    /// Potential evaluated on the positions of all particles.
    pub fn from_fn(
        grid: SpatialGrid<T>,
        n_particles: usize,
        split: PotentialSplit,
        u: impl Fn(&[Vec<T>]) -> T,
    ) -> Result<Self> {
        let total = Self::check_count(&grid, n_particles)?;
        let potential = (0..total)
            .map(|c| {
                let pos: Vec<Vec<T>> = (0..n_particles).map(|j| grid.point(grid.particle_site(c, j))).collect();
                u(&pos)
            })
            .collect();
        Self::from_samples(grid, n_particles, potential, split)
    }

    pub fn from_samples(grid: SpatialGrid<T>, n_particles: usize, potential: Vec<T>, split: PotentialSplit) -> Result<Self> {
        let total = Self::check_count(&grid, n_particles)?;
        if potential.len() != total {
            return Err(Error::DimensionMismatch {
                expected: total,
                found: potential.len(),
            });
        }
        if potential.iter().any(|u| !u.is_finite()) {
            return Err(invalid("potential has non-finite samples"));
        }
        Ok(Self {
            grid,
            n_particles,
            potential,
            split,
        })
    }

    fn check_count(grid: &SpatialGrid<T>, n: usize) -> Result<usize> {
        if n == 0 {
            return Err(invalid("need at least one particle"));
        }
        grid.config_len(n).ok_or_else(|| invalid("configuration space too large"))
    }

    pub fn grid(&self) -> &SpatialGrid<T> {
        &self.grid
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn potential(&self) -> &[T] {
        &self.potential
    }

    pub fn split(&self) -> PotentialSplit {
        self.split
    }

    pub fn config_len(&self) -> usize {
        self.potential.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSpec<T: Scalar> {
    particles: ParticleModel<T>,
    field: FockSpace<T>,
    budget: usize,
}

impl<T: Scalar> HamiltonianSpec<T> {
    pub fn new(particles: ParticleModel<T>, field: FockSpace<T>) -> Result<Self> {
        if field.modes().dim() != particles.grid().dim() {
            return Err(Error::DimensionMismatch {
                expected: particles.grid().dim(),
                found: field.modes().dim(),
            });
        }
        Ok(Self {
            particles,
            field,
            budget: DEFAULT_DIMENSION_BUDGET,
        })
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn particles(&self) -> &ParticleModel<T> {
        &self.particles
    }

    pub fn field(&self) -> &FockSpace<T> {
        &self.field
    }

    pub fn grid(&self) -> &SpatialGrid<T> {
        self.particles.grid()
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    /// Dimension of the tensor space, checked against the budget.
    pub fn full_dim(&self) -> Result<usize> {
        let f = self.field.full_dim()?;
        let d = self
            .particles
            .config_len()
            .checked_mul(f)
            .ok_or(Error::Resource {
                dim: usize::MAX,
                budget: self.budget,
            })?;
        if d > self.budget {
            return Err(Error::Resource {
                dim: d,
                budget: self.budget,
            });
        }
        Ok(d)
    }

    /// Largest `|k_n| h` over the modes.
    pub fn max_phase_step(&self) -> T {
        let h = self.grid().spacing();
        self.field
            .modes()
            .modes()
            .iter()
            .map(|m| crate::fock::kabs(&m.k) * h)
            .fold(T::zero(), T::max)
    }
}

/// Largest `|k| h` for which the grid is taken to resolve the phase `e^{ik·x}`.
pub fn phase_resolution_limit<T: Scalar>() -> T {
    T::FRAC_PI_4()
}

/// `−Δ + U` on the N-particle grid.
pub fn assemble_h0<T: Scalar>(particles: &ParticleModel<T>) -> Result<SparseOperator<T>> {
    let grid = particles.grid();
    let n = particles.n_particles();
    let g = grid.points_per_axis();
    let d = grid.dim();
    let h = grid.spacing();
    let inv_h2 = T::one() / (h * h);
    let total = particles.config_len();
    let axes = n * d;
    let mut t = Vec::with_capacity(total * (2 * axes + 1));
    let off = Complex::new(-inv_h2, T::zero());
    for c in 0..total {
        let diag = particles.potential()[c] + T::from_usize_lossy(2 * axes) * inv_h2;
        t.push((c, c, Complex::new(diag, T::zero())));
        let mut stride = 1usize;
        for _ in 0..axes {
            let i = (c / stride) % g;
            if i + 1 < g {
                t.push((c, c + stride, off));
            } else if grid.boundary() == Boundary::Periodic {
                t.push((c, c - i * stride, off));
            }
            if i > 0 {
                t.push((c, c - stride, off));
            } else if grid.boundary() == Boundary::Periodic {
                t.push((c, c + (g - 1) * stride, off));
            }
            stride *= g;
        }
    }
    SparseOperator::from_triplets(total, t)
}

/// `A(x_j) = Σ_n [λ_n e^{−ik_n·x_j} a_n† + conj(λ_n) e^{ik_n·x_j} a_n]` on the tensor space.
pub fn assemble_interaction<T: Scalar>(spec: &HamiltonianSpec<T>, j: usize) -> Result<SparseOperator<T>> {
    if j >= spec.particles.n_particles() {
        return Err(invalid(format!("particle {j} out of range")));
    }
    let step = spec.max_phase_step();
    if step > phase_resolution_limit() {
        return Err(config(format!(
            "grid too coarse for the mode set: max |k| h = {step:.4} exceeds π/4"
        )));
    }
    let dim = spec.full_dim()?;
    let field = &spec.field;
    let fdim = field.full_dim()?;
    let grid = spec.grid();
    let modes = field.modes();
    let eps = field.eps();
    let strides: Vec<usize> = (0..field.n_modes())
        .map(|n| field.cutoffs()[..n].iter().map(|m| m + 1).product())
        .collect();
    let occupations: Vec<Vec<usize>> = (0..fdim).map(|f| field.occupations(f)).collect();
    let root: Vec<T> = (0..=field.cutoffs().iter().copied().max().unwrap_or(0))
        .map(|m| (eps * T::from_usize_lossy(m)).sqrt())
        .collect();
    let mut t = Vec::new();
    for c in 0..spec.particles.config_len() {
        let x = grid.point(grid.particle_site(c, j));
        let g: Vec<Complex<T>> = (0..modes.len())
            .map(|n| modes.modes()[n].coupling * cis(-modes.phase(n, &x)))
            .collect();
        let base = c * fdim;
        for (f, occ) in occupations.iter().enumerate() {
            for (n, &m) in occ.iter().enumerate() {
                if m == 0 {
                    continue;
                }
                let lower = base + f - strides[n];
                let v = root[m];
                t.push((base + f, lower, g[n] * v));
                t.push((lower, base + f, g[n].conj() * v));
            }
        }
    }
    SparseOperator::from_triplets(dim, t)
}

/// `H = H₀ ⊗ I + I ⊗ dΓ(ω) + Σ_j A(x_j)`.
pub fn assemble_full<T: Scalar>(spec: &HamiltonianSpec<T>) -> Result<SparseOperator<T>> {
    let dim = spec.full_dim()?;
    let fdim = spec.field.full_dim()?;
    let h0 = assemble_h0(&spec.particles)?.kron_identity(fdim);
    let df = crate::fock::field_energy_operator(&spec.field)?.identity_kron(spec.particles.config_len());
    let mut terms = vec![h0, df];
    for j in 0..spec.particles.n_particles() {
        terms.push(assemble_interaction(spec, j)?);
    }
    let refs: Vec<&SparseOperator<T>> = terms.iter().collect();
    SparseOperator::sum(dim, &refs)
}

/// `N² Σ |λ_n|²/ω_n`, the amount by which coupling can lower the energy below `σ̲(H₀)`.
pub fn coupling_floor<T: Scalar>(modes: &crate::fock::ModeSet<T>, n_particles: usize) -> Result<T> {
    if !modes.is_massive() {
        return Err(crate::error::precondition("coupling floor needs a massive dispersion"));
    }
    let n = T::from_usize_lossy(n_particles);
    Ok(n * n * modes.inv_omega_coupling_norm_sq())
}

/// Product state `ψ ⊗ Ψ` in the tensor layout.
pub fn tensor_state<T: Scalar>(psi: &[Complex<T>], field: &[Complex<T>]) -> Vec<Complex<T>> {
    psi.iter().flat_map(|p| field.iter().map(move |f| *p * f)).collect()
}
