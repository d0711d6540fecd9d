//! Truncated bosonic Fock spaces with ε-scaled commutation relations.
//!
//! Mode `n` keeps occupations `0..=M_n`. Basis vectors are ordered in mixed
//! radix with mode 0 as the fastest index. The annihilation operator acts as
//! `a_n |m⟩ = √(ε m) |m−1⟩`, so `[a_n, a_n†] = ε` below the cutoff.
//!
//! Smeared operators are `a†(g) = Σ g_n a_n†` and `a(g) = Σ conj(g_n) a_n`,
//! the latter antilinear in `g`. Coherent states are
//! `Ξ(f) = exp((a†(f) − a(f))/ε) Ω`, which gives `⟨a_n⟩ = f_n`.

use num_complex::Complex;

use crate::error::{config, invalid, precondition, Error, Result};
use crate::model::{Boundary, SpatialGrid};
use crate::operator::SparseOperator;
use crate::scalar::{cis, czero, inner, norm_sq, Scalar};

/// Default truncation tolerance on the discarded Poisson tail of a coherent state.
pub const COHERENT_TAIL_TOLERANCE: f64 = 1e-8;

/// Default ceiling on the dimension of any assembled full-space operator.
pub const DEFAULT_DIMENSION_BUDGET: usize = 4_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelFamily {
    /// Finitely many modes with explicit couplings.
    Discrete,
    /// Nelson model with a square-integrable coupling, sampled on a k-grid.
    NelsonCutoff,
    /// Fröhlich polaron: `ω = 1`, coupling `|k|^{−(d−1)/2}`, no `k = 0` mode.
    Polaron,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mode<T: Scalar> {
    pub k: Vec<T>,
    pub omega: T,
    /// Coupling `λ_n`, including the quadrature weight `√Δk` for sampled families.
    pub coupling: Complex<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeSet<T: Scalar> {
    dim: usize,
    family: ModelFamily,
    modes: Vec<Mode<T>>,
    cell_volume: T,
}

impl<T: Scalar> ModeSet<T> {
    /// Explicit modes. `cell_volume` is 1.
    pub fn discrete(dim: usize, modes: Vec<Mode<T>>) -> Result<Self> {
        Self::with_family(dim, ModelFamily::Discrete, modes, T::one())
    }

    pub fn with_family(dim: usize, family: ModelFamily, modes: Vec<Mode<T>>, cell_volume: T) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(invalid(format!("spatial dimension {dim} not in 1..=3")));
        }
        if !(cell_volume > T::zero()) {
            return Err(invalid("k-cell volume must be positive"));
        }
        for (n, m) in modes.iter().enumerate() {
            if m.k.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: m.k.len(),
                });
            }
            if !(m.omega >= T::zero()) || !m.omega.is_finite() {
                return Err(config(format!("mode {n}: dispersion must be finite and non-negative")));
            }
            if !m.coupling.re.is_finite() || !m.coupling.im.is_finite() || m.k.iter().any(|k| !k.is_finite()) {
                return Err(config(format!("mode {n}: non-finite data")));
            }
            if family == ModelFamily::Polaron {
                if m.k.iter().all(|&k| k == T::zero()) {
                    return Err(config(format!("mode {n}: the polaron has no k = 0 mode")));
                }
                if m.omega != T::one() {
                    return Err(config(format!("mode {n}: polaron dispersion is 1")));
                }
            }
        }
        Ok(Self {
            dim,
            family,
            modes,
            cell_volume,
        })
    }

    /// Modes at the centres of a `points^dim` cell grid covering `[−K, K]^dim`.
    /// `coupling` is the continuum coupling; the stored `λ_n` is multiplied by `√Δk`.
    pub fn continuum(
        family: ModelFamily,
        dim: usize,
        half_width: T,
        points: usize,
        omega: impl Fn(&[T]) -> T,
        coupling: impl Fn(&[T]) -> Complex<T>,
    ) -> Result<Self> {
        if points == 0 || !(half_width > T::zero()) {
            return Err(invalid("k-grid needs positive extent and at least one point"));
        }
        let step = (half_width + half_width) / T::from_usize_lossy(points);
        let axis: Vec<T> = (0..points)
            .map(|i| -half_width + (T::from_usize_lossy(i) + T::lit(0.5)) * step)
            .collect();
        Self::from_axis_product(family, dim, &axis, step.powi(dim as i32), omega, coupling)
    }

    /// Modes at the discrete Fourier frequencies of a periodic grid, so that the
    /// mode sum inverts the grid transform exactly.
    pub fn fourier_dual(
        family: ModelFamily,
        grid: &SpatialGrid<T>,
        omega: impl Fn(&[T]) -> T,
        coupling: impl Fn(&[T]) -> Complex<T>,
    ) -> Result<Self> {
        if grid.boundary() != Boundary::Periodic {
            return Err(invalid("Fourier-dual modes need a periodic grid"));
        }
        let g = grid.points_per_axis() as i64;
        let dk = T::PI() / grid.half_width();
        let axis: Vec<T> = (-(g / 2)..(g - g / 2)).map(|m| T::lit(m as f64) * dk).collect();
        let axis: Vec<T> = if family == ModelFamily::Polaron && grid.dim() == 1 {
            axis.into_iter().filter(|k| *k != T::zero()).collect()
        } else {
            axis
        };
        Self::from_axis_product(family, grid.dim(), &axis, dk.powi(grid.dim() as i32), omega, coupling)
    }

    fn from_axis_product(
        family: ModelFamily,
        dim: usize,
        axis: &[T],
        cell_volume: T,
        omega: impl Fn(&[T]) -> T,
        coupling: impl Fn(&[T]) -> Complex<T>,
    ) -> Result<Self> {
        let p = axis.len();
        let total = p.checked_pow(dim as u32).ok_or_else(|| invalid("k-grid too large"))?;
        let w = cell_volume.sqrt();
        let mut modes = Vec::with_capacity(total);
        for idx in 0..total {
            let mut rem = idx;
            let k: Vec<T> = (0..dim)
                .map(|_| {
                    let v = axis[rem % p];
                    rem /= p;
                    v
                })
                .collect();
            if family == ModelFamily::Polaron && k.iter().all(|&c| c == T::zero()) {
                continue;
            }
            modes.push(Mode {
                omega: omega(&k),
                coupling: coupling(&k) * w,
                k,
            });
        }
        Self::with_family(dim, family, modes, cell_volume)
    }

    /// Polaron modes on a cell-centred grid. `points` must be even so that no cell
    /// is centred at the origin.
    pub fn polaron(dim: usize, half_width: T, points: usize) -> Result<Self> {
        if points % 2 == 1 {
            return Err(config("polaron k-grid needs an even number of points per axis"));
        }
        let expo = -(T::from_usize_lossy(dim) - T::one()) / T::lit(2.0);
        Self::continuum(
            ModelFamily::Polaron,
            dim,
            half_width,
            points,
            |_| T::one(),
            |k| Complex::new(kabs(k).powf(expo), T::zero()),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn family(&self) -> ModelFamily {
        self.family
    }

    pub fn modes(&self) -> &[Mode<T>] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn cell_volume(&self) -> T {
        self.cell_volume
    }

    pub fn min_omega(&self) -> T {
        self.modes.iter().map(|m| m.omega).fold(T::infinity(), T::min)
    }

    /// True when every dispersion is strictly positive.
    pub fn is_massive(&self) -> bool {
        !self.modes.is_empty() && self.min_omega() > T::zero()
    }

    /// `Σ |λ_n|²`.
    pub fn coupling_norm_sq(&self) -> T {
        self.modes.iter().map(|m| m.coupling.norm_sqr()).sum()
    }

    /// `Σ |λ_n|² / ω_n`; infinite if a coupled mode has `ω_n = 0`.
    pub fn inv_omega_coupling_norm_sq(&self) -> T {
        self.modes
            .iter()
            .filter(|m| m.coupling.norm_sqr() > T::zero())
            .map(|m| m.coupling.norm_sqr() / m.omega)
            .sum()
    }

    /// `Σ ω_n |z_n|²`.
    pub fn field_energy(&self, z: &[Complex<T>]) -> T {
        self.modes.iter().zip(z).map(|(m, zn)| m.omega * zn.norm_sqr()).sum()
    }

    /// `k_n · x`.
    pub fn phase(&self, n: usize, x: &[T]) -> T {
        self.modes[n].k.iter().zip(x).map(|(&k, &xi)| k * xi).sum()
    }

    /// Coupling profile `g_n(x) = λ_n e^{−i k_n·x}`.
    pub fn coupling_profile(&self, x: &[T]) -> Vec<Complex<T>> {
        (0..self.len())
            .map(|n| self.modes[n].coupling * cis(-self.phase(n, x)))
            .collect()
    }
}

pub(crate) fn kabs<T: Scalar>(k: &[T]) -> T {
    k.iter().map(|&c| c * c).sum::<T>().sqrt()
}

/// Truncated Fock space for a mode set at a given ε.
#[derive(Debug, Clone, PartialEq)]
pub struct FockSpace<T: Scalar> {
    modes: ModeSet<T>,
    eps: T,
    cutoffs: Vec<usize>,
    strides: Option<Vec<usize>>,
}

impl<T: Scalar> FockSpace<T> {
    pub fn new(modes: ModeSet<T>, eps: T, cutoffs: Vec<usize>) -> Result<Self> {
        if !(eps > T::zero()) || !eps.is_finite() {
            return Err(invalid("ε must be positive and finite"));
        }
        if cutoffs.len() != modes.len() {
            return Err(Error::DimensionMismatch {
                expected: modes.len(),
                found: cutoffs.len(),
            });
        }
        let mut strides = Some(Vec::with_capacity(cutoffs.len() + 1));
        let mut acc = Some(1usize);
        for &m in &cutoffs {
            if let (Some(s), Some(a)) = (strides.as_mut(), acc) {
                s.push(a);
            }
            acc = acc.and_then(|a| a.checked_mul(m + 1));
            if acc.is_none() {
                strides = None;
            }
        }
        if let (Some(s), Some(a)) = (strides.as_mut(), acc) {
            s.push(a);
        }
        Ok(Self {
            modes,
            eps,
            cutoffs,
            strides,
        })
    }

    /// Same cutoff on every mode.
    pub fn uniform(modes: ModeSet<T>, eps: T, cutoff: usize) -> Result<Self> {
        let n = modes.len();
        Self::new(modes, eps, vec![cutoff; n])
    }

    pub fn modes(&self) -> &ModeSet<T> {
        &self.modes
    }

    pub fn eps(&self) -> T {
        self.eps
    }

    pub fn cutoffs(&self) -> &[usize] {
        &self.cutoffs
    }

    pub fn n_modes(&self) -> usize {
        self.cutoffs.len()
    }

    /// Tensor-product dimension, `None` if it overflows `usize`.
    pub fn checked_dim(&self) -> Option<usize> {
        self.strides.as_ref().map(|s| s[s.len() - 1])
    }

    pub fn full_dim(&self) -> Result<usize> {
        self.checked_dim().ok_or(Error::Resource {
            dim: usize::MAX,
            budget: DEFAULT_DIMENSION_BUDGET,
        })
    }

    fn strides(&self) -> Result<&[usize]> {
        self.strides.as_deref().ok_or(Error::Resource {
            dim: usize::MAX,
            budget: DEFAULT_DIMENSION_BUDGET,
        })
    }

    /// Flat index of an occupation tuple.
    pub fn index(&self, occupations: &[usize]) -> Option<usize> {
        let strides = self.strides.as_ref()?;
        if occupations.len() != self.cutoffs.len() {
            return None;
        }
        let mut idx = 0;
        for (n, &m) in occupations.iter().enumerate() {
            if m > self.cutoffs[n] {
                return None;
            }
            idx += m * strides[n];
        }
        Some(idx)
    }

    /// Occupation tuple of a flat index.
    pub fn occupations(&self, mut idx: usize) -> Vec<usize> {
        self.cutoffs
            .iter()
            .map(|&m| {
                let o = idx % (m + 1);
                idx /= m + 1;
                o
            })
            .collect()
    }

    fn check_mode(&self, n: usize) -> Result<()> {
        if n >= self.n_modes() {
            return Err(invalid(format!("mode {n} out of range (have {})", self.n_modes())));
        }
        Ok(())
    }
}

/// Truncated `a_n`.
pub fn annihilation<T: Scalar>(space: &FockSpace<T>, n: usize) -> Result<SparseOperator<T>> {
    space.check_mode(n)?;
    let dim = space.full_dim()?;
    let stride = space.strides()?[n];
    let mut t = Vec::new();
    for idx in 0..dim {
        let m = (idx / stride) % (space.cutoffs[n] + 1);
        if m > 0 {
            let v = (space.eps * T::from_usize_lossy(m)).sqrt();
            t.push((idx - stride, idx, Complex::new(v, T::zero())));
        }
    }
    SparseOperator::from_triplets(dim, t)
}

/// Truncated `a_n†`, the adjoint of [`annihilation`].
pub fn creation<T: Scalar>(space: &FockSpace<T>, n: usize) -> Result<SparseOperator<T>> {
    Ok(annihilation(space, n)?.adjoint())
}

/// Smeared annihilation `a(g) = Σ conj(g_n) a_n`.
pub fn annihilation_field<T: Scalar>(space: &FockSpace<T>, g: &[Complex<T>]) -> Result<SparseOperator<T>> {
    smeared(space, g, false)
}

/// Smeared creation `a†(g) = Σ g_n a_n†`.
pub fn creation_field<T: Scalar>(space: &FockSpace<T>, g: &[Complex<T>]) -> Result<SparseOperator<T>> {
    smeared(space, g, true)
}

fn smeared<T: Scalar>(space: &FockSpace<T>, g: &[Complex<T>], dagger: bool) -> Result<SparseOperator<T>> {
    if g.len() != space.n_modes() {
        return Err(Error::DimensionMismatch {
            expected: space.n_modes(),
            found: g.len(),
        });
    }
    let dim = space.full_dim()?;
    let strides = space.strides()?;
    let mut t = Vec::new();
    for idx in 0..dim {
        let occ = space.occupations(idx);
        for (n, &m) in occ.iter().enumerate() {
            if m == 0 || g[n] == czero() {
                continue;
            }
            let v = (space.eps * T::from_usize_lossy(m)).sqrt();
            if dagger {
                t.push((idx, idx - strides[n], g[n] * v));
            } else {
                t.push((idx - strides[n], idx, g[n].conj() * v));
            }
        }
    }
    SparseOperator::from_triplets(dim, t)
}

/// `dΓ(w)`: diagonal with entries `Σ w_n ε m_n`.
pub fn dgamma<T: Scalar>(space: &FockSpace<T>, weights: &[T]) -> Result<SparseOperator<T>> {
    if weights.len() != space.n_modes() {
        return Err(Error::DimensionMismatch {
            expected: space.n_modes(),
            found: weights.len(),
        });
    }
    if weights.iter().any(|w| !(*w >= T::zero()) || !w.is_finite()) {
        return Err(invalid("dΓ weights must be finite and non-negative"));
    }
    let dim = space.full_dim()?;
    let diag: Vec<T> = (0..dim)
        .map(|idx| {
            space
                .occupations(idx)
                .iter()
                .zip(weights)
                .map(|(&m, &w)| w * space.eps * T::from_usize_lossy(m))
                .sum()
        })
        .collect();
    Ok(SparseOperator::diagonal(&diag))
}

/// `dΓ(ω)` for the space's own dispersion.
pub fn field_energy_operator<T: Scalar>(space: &FockSpace<T>) -> Result<SparseOperator<T>> {
    let w: Vec<T> = space.modes.modes().iter().map(|m| m.omega).collect();
    dgamma(space, &w)
}

/// `A(x) = a†(g_x) + a(g_x)` with `g_x = λ e^{−ik·x}`, as an operator on the field alone.
pub fn interaction_at<T: Scalar>(space: &FockSpace<T>, x: &[T]) -> Result<SparseOperator<T>> {
    let g = space.modes.coupling_profile(x);
    creation_field(space, &g)?.add(&annihilation_field(space, &g)?)
}

#[derive(Debug, Clone, PartialEq)]
pub enum StateRepr<T: Scalar> {
    /// Coefficients in the flat mixed-radix basis.
    Full(Vec<Complex<T>>),
    /// Product state, one coefficient vector of length `M_n + 1` per mode.
    Product(Vec<Vec<Complex<T>>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FockState<T: Scalar> {
    space: FockSpace<T>,
    repr: StateRepr<T>,
}

impl<T: Scalar> FockState<T> {
    fn unit_tolerance() -> T {
        T::lit(1e-10).max(T::epsilon() * T::lit(64.0))
    }

    /// Normalized state from flat coefficients.
    pub fn from_coeffs(space: FockSpace<T>, coeffs: Vec<Complex<T>>) -> Result<Self> {
        let dim = space.full_dim()?;
        if coeffs.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: coeffs.len(),
            });
        }
        let s = Self {
            space,
            repr: StateRepr::Full(coeffs),
        };
        s.check_unit()?;
        Ok(s)
    }

    /// Normalizes the coefficients first.
    pub fn from_unnormalized(space: FockSpace<T>, mut coeffs: Vec<Complex<T>>) -> Result<Self> {
        let n = norm_sq(&coeffs).sqrt();
        if !(n > T::zero()) {
            return Err(invalid("zero vector"));
        }
        crate::scalar::scale(T::one() / n, &mut coeffs);
        Self::from_coeffs(space, coeffs)
    }

    /// Product of per-mode vectors; each factor must be normalized.
    pub fn from_product(space: FockSpace<T>, factors: Vec<Vec<Complex<T>>>) -> Result<Self> {
        if factors.len() != space.n_modes() {
            return Err(Error::DimensionMismatch {
                expected: space.n_modes(),
                found: factors.len(),
            });
        }
        for (n, f) in factors.iter().enumerate() {
            if f.len() != space.cutoffs[n] + 1 {
                return Err(Error::DimensionMismatch {
                    expected: space.cutoffs[n] + 1,
                    found: f.len(),
                });
            }
        }
        let s = Self {
            space,
            repr: StateRepr::Product(factors),
        };
        s.check_unit()?;
        Ok(s)
    }

    pub fn vacuum(space: FockSpace<T>) -> Self {
        let factors = space
            .cutoffs
            .iter()
            .map(|&m| {
                let mut v = vec![czero(); m + 1];
                v[0] = Complex::new(T::one(), T::zero());
                v
            })
            .collect();
        Self {
            space,
            repr: StateRepr::Product(factors),
        }
    }

    pub fn number_state(space: FockSpace<T>, occupations: &[usize]) -> Result<Self> {
        if occupations.len() != space.n_modes() {
            return Err(Error::DimensionMismatch {
                expected: space.n_modes(),
                found: occupations.len(),
            });
        }
        let mut factors = Vec::with_capacity(occupations.len());
        for (n, (&o, &m)) in occupations.iter().zip(&space.cutoffs).enumerate() {
            if o > m {
                return Err(Error::CutoffTooSmall {
                    mode: n,
                    cutoff: m,
                    required: o,
                });
            }
            let mut v = vec![czero(); m + 1];
            v[o] = Complex::new(T::one(), T::zero());
            factors.push(v);
        }
        Ok(Self {
            space,
            repr: StateRepr::Product(factors),
        })
    }

    fn check_unit(&self) -> Result<()> {
        let n = self.norm_sq();
        if (n - T::one()).abs() > Self::unit_tolerance() {
            return Err(precondition(format!("state norm² {n} differs from 1")));
        }
        Ok(())
    }

    pub fn space(&self) -> &FockSpace<T> {
        &self.space
    }

    pub fn repr(&self) -> &StateRepr<T> {
        &self.repr
    }

    pub fn norm_sq(&self) -> T {
        match &self.repr {
            StateRepr::Full(c) => norm_sq(c),
            StateRepr::Product(f) => f.iter().map(|v| norm_sq(v)).fold(T::one(), |a, b| a * b),
        }
    }

    /// Flat coefficients, expanding a product state if needed.
    pub fn to_full(&self) -> Result<Vec<Complex<T>>> {
        match &self.repr {
            StateRepr::Full(c) => Ok(c.clone()),
            StateRepr::Product(factors) => {
                let dim = self.space.full_dim()?;
                if dim > DEFAULT_DIMENSION_BUDGET {
                    return Err(Error::Resource {
                        dim,
                        budget: DEFAULT_DIMENSION_BUDGET,
                    });
                }
                let mut out = vec![Complex::new(T::one(), T::zero())];
                for f in factors.iter().rev() {
                    let mut next = Vec::with_capacity(out.len() * f.len());
                    for a in &out {
                        for b in f {
                            next.push(*a * b);
                        }
                    }
                    out = next;
                }
                Ok(out)
            }
        }
    }

    /// Same state with flat coefficients.
    pub fn into_full(self) -> Result<Self> {
        let c = self.to_full()?;
        Ok(Self {
            space: self.space,
            repr: StateRepr::Full(c),
        })
    }

    /// `⟨a_n⟩`.
    pub fn mean_annihilation(&self, n: usize) -> Result<Complex<T>> {
        self.space.check_mode(n)?;
        let eps = self.space.eps;
        match &self.repr {
            StateRepr::Product(f) => {
                let v = &f[n];
                let mut acc = czero();
                for m in 1..v.len() {
                    acc = acc + v[m - 1].conj() * v[m] * (eps * T::from_usize_lossy(m)).sqrt();
                }
                let rest: T = f
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != n)
                    .map(|(_, v)| norm_sq(v))
                    .fold(T::one(), |a, b| a * b);
                Ok(acc * rest)
            }
            StateRepr::Full(c) => {
                let stride = self.space.strides()?[n];
                let cut = self.space.cutoffs[n];
                let mut acc = czero();
                for (idx, ci) in c.iter().enumerate() {
                    let m = (idx / stride) % (cut + 1);
                    if m > 0 {
                        acc = acc + c[idx - stride].conj() * ci * (eps * T::from_usize_lossy(m)).sqrt();
                    }
                }
                Ok(acc)
            }
        }
    }

    /// `⟨a_n†⟩`, computed from the creation side rather than by conjugation.
    pub fn mean_creation(&self, n: usize) -> Result<Complex<T>> {
        self.space.check_mode(n)?;
        let eps = self.space.eps;
        match &self.repr {
            StateRepr::Product(f) => {
                let v = &f[n];
                let mut acc = czero();
                for m in 0..v.len().saturating_sub(1) {
                    acc = acc + v[m + 1].conj() * v[m] * (eps * T::from_usize_lossy(m + 1)).sqrt();
                }
                let rest: T = f
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != n)
                    .map(|(_, v)| norm_sq(v))
                    .fold(T::one(), |a, b| a * b);
                Ok(acc * rest)
            }
            StateRepr::Full(c) => {
                let stride = self.space.strides()?[n];
                let cut = self.space.cutoffs[n];
                let mut acc = czero();
                for (idx, ci) in c.iter().enumerate() {
                    let m = (idx / stride) % (cut + 1);
                    if m < cut {
                        acc = acc + c[idx + stride].conj() * ci * (eps * T::from_usize_lossy(m + 1)).sqrt();
                    }
                }
                Ok(acc)
            }
        }
    }

    /// `⟨dΓ(w)⟩`.
    pub fn mean_dgamma(&self, weights: &[T]) -> Result<T> {
        if weights.len() != self.space.n_modes() {
            return Err(Error::DimensionMismatch {
                expected: self.space.n_modes(),
                found: weights.len(),
            });
        }
        let eps = self.space.eps;
        match &self.repr {
            StateRepr::Product(f) => {
                let norms: Vec<T> = f.iter().map(|v| norm_sq(v)).collect();
                let mut total = T::zero();
                for (n, v) in f.iter().enumerate() {
                    let occ: T = v
                        .iter()
                        .enumerate()
                        .map(|(m, c)| T::from_usize_lossy(m) * c.norm_sqr())
                        .sum();
                    let rest = norms
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != n)
                        .map(|(_, &x)| x)
                        .fold(T::one(), |a, b| a * b);
                    total = total + weights[n] * eps * occ * rest;
                }
                Ok(total)
            }
            StateRepr::Full(c) => Ok(c
                .iter()
                .enumerate()
                .map(|(idx, ci)| {
                    let e: T = self
                        .space
                        .occupations(idx)
                        .iter()
                        .zip(weights)
                        .map(|(&m, &w)| w * eps * T::from_usize_lossy(m))
                        .sum();
                    e * ci.norm_sqr()
                })
                .sum()),
        }
    }

    /// `⟨dΓ(ω)⟩` for the space's dispersion.
    pub fn field_energy(&self) -> Result<T> {
        let w: Vec<T> = self.space.modes.modes().iter().map(|m| m.omega).collect();
        self.mean_dgamma(&w)
    }

    /// Largest probability weight on a basis vector with some `m_n = M_n`.
    pub fn boundary_weight(&self) -> T {
        match &self.repr {
            StateRepr::Product(f) => f
                .iter()
                .map(|v| v[v.len() - 1].norm_sqr())
                .fold(T::zero(), T::max),
            StateRepr::Full(c) => c
                .iter()
                .enumerate()
                .filter(|(idx, _)| {
                    self.space
                        .occupations(*idx)
                        .iter()
                        .zip(&self.space.cutoffs)
                        .any(|(m, cut)| m == cut)
                })
                .map(|(_, ci)| ci.norm_sqr())
                .sum(),
        }
    }

    /// Normalized superposition `Σ c_i Ψ_i` on a common space.
    pub fn superposition(terms: &[(Complex<T>, &FockState<T>)]) -> Result<Self> {
        let first = terms.first().ok_or_else(|| invalid("empty superposition"))?.1;
        let dim = first.space.full_dim()?;
        let mut acc = vec![czero(); dim];
        for (c, s) in terms {
            if s.space != first.space {
                return Err(invalid("superposition of states on different Fock spaces"));
            }
            crate::scalar::axpy(*c, &s.to_full()?, &mut acc);
        }
        Self::from_unnormalized(first.space.clone(), acc)
    }
}

/// Poisson weights `P(m) = e^{−ν} ν^m / m!` for `m = 0..len`, in log space.
fn poisson_weights(nu: f64, len: usize) -> Vec<f64> {
    if nu == 0.0 {
        let mut v = vec![0.0; len];
        if len > 0 {
            v[0] = 1.0;
        }
        return v;
    }
    let ln_nu = nu.ln();
    let mut lp = -nu;
    let mut out = Vec::with_capacity(len);
    for m in 0..len {
        if m > 0 {
            lp += ln_nu - (m as f64).ln();
        }
        out.push(lp.exp());
    }
    out
}

/// Poisson mass beyond occupation `cutoff` for mean `nu`.
pub fn poisson_tail(nu: f64, cutoff: usize) -> f64 {
    let upper = (nu + 40.0 * nu.sqrt() + 60.0).ceil() as usize;
    if cutoff >= upper {
        return 0.0;
    }
    poisson_weights(nu, upper + 1)[cutoff + 1..].iter().sum()
}

/// Smallest cutoff whose discarded Poisson tail is at most `tol`.
pub fn required_cutoff(nu: f64, tol: f64) -> usize {
    let upper = (nu + 40.0 * nu.sqrt() + 60.0).ceil() as usize;
    let w = poisson_weights(nu, upper + 1);
    let mut tail = 0.0;
    for m in (0..=upper).rev() {
        if tail + w[m] > tol {
            return m;
        }
        tail += w[m];
    }
    0
}

/// Cutoff for a coherent amplitude `|f|²` at `ε`: the tail rule, but never below
/// `ν + 8√ν` with `ν = |f|²/ε`.
pub fn adequate_cutoff(f_norm_sq: f64, eps: f64, tol: f64) -> usize {
    let nu = f_norm_sq / eps;
    required_cutoff(nu, tol).max((nu + 8.0 * nu.sqrt()).ceil() as usize)
}

/// Coherent state `Ξ(f)` as a product of truncated, renormalized Poisson series.
pub fn coherent_state<T: Scalar>(space: &FockSpace<T>, f: &[Complex<T>]) -> Result<FockState<T>> {
    coherent_state_with_tolerance(space, f, COHERENT_TAIL_TOLERANCE)
}

pub fn coherent_state_with_tolerance<T: Scalar>(
    space: &FockSpace<T>,
    f: &[Complex<T>],
    tail_tol: f64,
) -> Result<FockState<T>> {
    if f.len() != space.n_modes() {
        return Err(Error::DimensionMismatch {
            expected: space.n_modes(),
            found: f.len(),
        });
    }
    let eps = space.eps.as_f64();
    let mut factors = Vec::with_capacity(f.len());
    for (n, (fz, &cut)) in f.iter().zip(&space.cutoffs).enumerate() {
        let (re, im) = (fz.re.as_f64(), fz.im.as_f64());
        if !re.is_finite() || !im.is_finite() {
            return Err(invalid(format!("mode {n}: non-finite amplitude")));
        }
        let nu = (re * re + im * im) / eps;
        if poisson_tail(nu, cut) > tail_tol {
            return Err(Error::CutoffTooSmall {
                mode: n,
                cutoff: cut,
                required: required_cutoff(nu, tail_tol),
            });
        }
        let theta = im.atan2(re);
        let w = poisson_weights(nu, cut + 1);
        let mut v: Vec<Complex<T>> = w
            .iter()
            .enumerate()
            .map(|(m, p)| {
                let a = p.sqrt();
                let ph = theta * m as f64;
                Complex::new(T::lit(a * ph.cos()), T::lit(a * ph.sin()))
            })
            .collect();
        let nrm = norm_sq(&v).sqrt();
        crate::scalar::scale(T::one() / nrm, &mut v);
        factors.push(v);
    }
    Ok(FockState {
        space: space.clone(),
        repr: StateRepr::Product(factors),
    })
}

/// `⟨Ψ₁|Ψ₂⟩`, antilinear in the first argument.
pub fn overlap<T: Scalar>(a: &FockState<T>, b: &FockState<T>) -> Result<Complex<T>> {
    if a.space != b.space {
        return Err(invalid("overlap of states on different Fock spaces"));
    }
    match (&a.repr, &b.repr) {
        (StateRepr::Product(fa), StateRepr::Product(fb)) => Ok(fa
            .iter()
            .zip(fb)
            .map(|(x, y)| inner(x, y))
            .fold(Complex::new(T::one(), T::zero()), |p, z| p * z)),
        _ => Ok(inner(&a.to_full()?, &b.to_full()?)),
    }
}

/// Closed form of `⟨Ξ(z₁)|Ξ(z₂)⟩` for untruncated coherent states:
/// `exp(−(i/ε) Im B(z₁, z₂) − ‖z₁ − z₂‖²/(2ε))` with `B(z₁, z₂) = Σ z₁ conj(z₂)`.
pub fn coherent_overlap<T: Scalar>(z1: &[Complex<T>], z2: &[Complex<T>], eps: T) -> Complex<T> {
    let b = z1.iter().zip(z2).fold(czero::<T>(), |acc, (a, c)| acc + a * c.conj());
    let d: T = z1.iter().zip(z2).map(|(a, c)| (a - c).norm_sqr()).sum();
    Complex::new(-d / (eps + eps), -b.im / eps).exp()
}

/// `⟨Ψ|O|Ψ⟩` for an operator on the full Fock space.
pub fn field_expectation<T: Scalar>(state: &FockState<T>, op: &SparseOperator<T>) -> Result<Complex<T>> {
    let c = state.to_full()?;
    if op.dim() != c.len() {
        return Err(Error::DimensionMismatch {
            expected: c.len(),
            found: op.dim(),
        });
    }
    Ok(op.expectation(&c))
}
