//! Partial traces over the field and their classical counterparts.
//!
//! For a field state Ψ the effective potential is `V(x) = ⟨Ψ|A(x)|Ψ⟩`, and
//! `⟨ψ⊗Ψ|H|ψ⊗Ψ⟩ = ⟨ψ|H₀ + Σ_j V(x_j)|ψ⟩ + ⟨Ψ|dΓ(ω)|Ψ⟩ ‖ψ‖²`. A classical
//! measure `μ = Σ α_i δ_{z_i}` gives `V_μ(x) = 2 Re Σ_i α_i Σ_n conj(λ_n) z_{i,n} e^{ik_n·x}`.
//!
//! Continuum transforms use `f̂(k) = (2π)^{−d/2} ∫ e^{−ik·x} f(x) dx`, discretized
//! with the grid cell `h^d` and the mode cell `Δk`.

use std::io::{BufRead, Write};

use num_complex::Complex;

use crate::error::{invalid, precondition, Error, Result};
use crate::fock::{coherent_state, kabs, FockSpace, FockState, ModeSet};
use crate::model::{assemble_h0, HamiltonianSpec, ParticleModel, SpatialGrid};
use crate::operator::SparseOperator;
use crate::scalar::{cis, czero, Scalar};

/// Real potential sampled on single-particle sites.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectivePotential<T: Scalar> {
    pub grid: SpatialGrid<T>,
    pub samples: Vec<T>,
    /// Short label of where the samples came from.
    pub provenance: String,
}

impl<T: Scalar> EffectivePotential<T> {
    pub fn new(grid: SpatialGrid<T>, samples: Vec<T>, provenance: impl Into<String>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                found: samples.len(),
            });
        }
        Ok(Self {
            grid,
            samples,
            provenance: provenance.into(),
        })
    }

    /// `sup |V − W|` over all sites.
    pub fn sup_distance(&self, other: &Self) -> T {
        sup_distance(&self.samples, &other.samples)
    }

    pub fn sup_norm(&self) -> T {
        self.samples.iter().map(|v| v.abs()).fold(T::zero(), T::max)
    }

    /// CSV with header `x,V` (or `x,y,V`, `x,y,z,V`).
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let names = ["x", "y", "z"];
        writeln!(w, "{},V", names[..self.grid.dim()].join(","))?;
        for (i, v) in self.samples.iter().enumerate() {
            for c in self.grid.point(i) {
                write!(w, "{:.12e},", c)?;
            }
            writeln!(w, "{:.12e}", v)?;
        }
        Ok(())
    }
}

pub fn sup_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| (*x - *y).abs()).fold(T::zero(), T::max)
}

/// Finite convex combination of point masses on the mode space.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalMeasure<T: Scalar> {
    weights: Vec<T>,
    points: Vec<Vec<Complex<T>>>,
}

impl<T: Scalar> ClassicalMeasure<T> {
    pub fn new(atoms: Vec<(T, Vec<Complex<T>>)>) -> Result<Self> {
        let first = atoms.first().ok_or_else(|| invalid("measure needs at least one atom"))?;
        let n = first.1.len();
        let tol = T::lit(1e-12).max(T::epsilon() * T::lit(16.0));
        let total: T = atoms.iter().map(|a| a.0).sum();
        if (total - T::one()).abs() > tol {
            return Err(invalid(format!("atom weights sum to {total}, not 1")));
        }
        for (alpha, z) in &atoms {
            if !(*alpha > T::zero()) {
                return Err(invalid("atom weights must be positive"));
            }
            if z.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: z.len(),
                });
            }
        }
        let (weights, points) = atoms.into_iter().unzip();
        Ok(Self { weights, points })
    }

    pub fn dirac(z: Vec<Complex<T>>) -> Self {
        Self {
            weights: vec![T::one()],
            points: vec![z],
        }
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn points(&self) -> &[Vec<Complex<T>>] {
        &self.points
    }

    pub fn n_modes(&self) -> usize {
        self.points[0].len()
    }

    /// `c(μ) = Σ_i α_i Σ_n ω_n |z_{i,n}|²`.
    pub fn field_energy(&self, modes: &ModeSet<T>) -> T {
        self.weights
            .iter()
            .zip(&self.points)
            .map(|(&a, z)| a * modes.field_energy(z))
            .sum()
    }

    /// `Σ α_i z_i`.
    pub fn barycenter(&self) -> Vec<Complex<T>> {
        let mut out = vec![czero(); self.n_modes()];
        for (&a, z) in self.weights.iter().zip(&self.points) {
            for (o, zn) in out.iter_mut().zip(z) {
                *o = *o + zn * a;
            }
        }
        out
    }

    /// `min_{i≠j} ‖z_i − z_j‖² / 2`, infinite for a single atom.
    pub fn separation_rate(&self) -> T {
        let mut best = T::infinity();
        for i in 0..self.points.len() {
            for j in i + 1..self.points.len() {
                let d: T = self.points[i]
                    .iter()
                    .zip(&self.points[j])
                    .map(|(a, b)| (a - b).norm_sqr())
                    .sum();
                best = best.min(d / T::lit(2.0));
            }
        }
        best
    }

    /// One line per atom: `alpha; re:im,re:im,...`.
    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (a, z) in self.weights.iter().zip(&self.points) {
            let comps: Vec<String> = z.iter().map(|c| format!("{:.17e}:{:.17e}", c.re, c.im)).collect();
            writeln!(w, "{:.17e}; {}", a, comps.join(","))?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut atoms = Vec::new();
        for (ln, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::Data(e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |what: &str| Error::Data(format!("measure line {}: {what}", ln + 1));
            let (a, rest) = line.split_once(';').ok_or_else(|| bad("missing ';'"))?;
            let alpha: f64 = a.trim().parse().map_err(|_| bad("bad weight"))?;
            let mut z = Vec::new();
            for comp in rest.split(',') {
                let (re, im) = comp.trim().split_once(':').ok_or_else(|| bad("component needs re:im"))?;
                let re: f64 = re.trim().parse().map_err(|_| bad("bad real part"))?;
                let im: f64 = im.trim().parse().map_err(|_| bad("bad imaginary part"))?;
                z.push(Complex::new(T::lit(re), T::lit(im)));
            }
            atoms.push((T::lit(alpha), z));
        }
        Self::new(atoms).map_err(|e| Error::Data(e.to_string()))
    }
}

fn check_modes_grid<T: Scalar>(modes: &ModeSet<T>, grid: &SpatialGrid<T>) -> Result<()> {
    if modes.dim() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            found: modes.dim(),
        });
    }
    Ok(())
}

fn realness_tolerance<T: Scalar>(scale: T) -> T {
    T::lit(1e-12).max(T::epsilon() * T::lit(64.0)) * (T::one() + scale)
}

/// `V(x) = ⟨Ψ|A(x)|Ψ⟩` on every site, together with `c_ε = ⟨Ψ|dΓ(ω)|Ψ⟩`.
pub fn partial_trace_potential<T: Scalar>(
    state: &FockState<T>,
    grid: &SpatialGrid<T>,
) -> Result<(EffectivePotential<T>, T)> {
    let modes = state.space().modes();
    check_modes_grid(modes, grid)?;
    let n = modes.len();
    let mut down = Vec::with_capacity(n);
    let mut up = Vec::with_capacity(n);
    for j in 0..n {
        down.push(state.mean_annihilation(j)?);
        up.push(state.mean_creation(j)?);
    }
    let scale: T = modes
        .modes()
        .iter()
        .zip(&down)
        .map(|(m, a)| m.coupling.norm() * a.norm())
        .sum::<T>()
        * T::lit(2.0);
    let tol = realness_tolerance(scale);
    let mut samples = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let x = grid.point(i);
        let mut v = czero::<T>();
        for j in 0..n {
            let lam = modes.modes()[j].coupling;
            let e = cis(modes.phase(j, &x));
            v = v + lam * e.conj() * up[j] + lam.conj() * e * down[j];
        }
        if v.im.abs() > tol {
            return Err(precondition(format!(
                "effective potential has imaginary part {:e} at site {i}",
                v.im
            )));
        }
        samples.push(v.re);
    }
    let c = state.field_energy()?;
    let label = format!("partial trace at eps={}", state.space().eps());
    Ok((EffectivePotential::new(grid.clone(), samples, label)?, c))
}

/// `H₀ + Σ_j V(x_j)` on the N-particle grid for a single-particle potential.
pub fn effective_operator<T: Scalar>(particles: &ParticleModel<T>, potential: &[T]) -> Result<SparseOperator<T>> {
    let grid = particles.grid();
    if potential.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            found: potential.len(),
        });
    }
    let h0 = assemble_h0(particles)?;
    let diag: Vec<T> = (0..particles.config_len())
        .map(|c| {
            (0..particles.n_particles())
                .map(|j| potential[grid.particle_site(c, j)])
                .sum()
        })
        .collect();
    h0.add(&SparseOperator::diagonal(&diag))
}

/// `H_eff = H₀ + Σ_j V_Ψ(x_j)` and the field energy `c_ε` of Ψ.
pub fn effective_hamiltonian<T: Scalar>(
    spec: &HamiltonianSpec<T>,
    state: &FockState<T>,
) -> Result<(SparseOperator<T>, T)> {
    if state.space() != spec.field() {
        return Err(invalid("state lives on a different Fock space"));
    }
    let (v, c) = partial_trace_potential(state, spec.grid())?;
    Ok((effective_operator(spec.particles(), &v.samples)?, c))
}

/// `V_μ` on every site.
pub fn classical_potential<T: Scalar>(
    mu: &ClassicalMeasure<T>,
    grid: &SpatialGrid<T>,
    modes: &ModeSet<T>,
) -> Result<EffectivePotential<T>> {
    check_modes_grid(modes, grid)?;
    if mu.n_modes() != modes.len() {
        return Err(Error::DimensionMismatch {
            expected: modes.len(),
            found: mu.n_modes(),
        });
    }
    let zbar = mu.barycenter();
    let samples = single_atom_samples(&zbar, grid, modes);
    EffectivePotential::new(grid.clone(), samples, format!("classical, {} atom(s)", mu.weights().len()))
}

/// `2 Re Σ_n conj(λ_n) z_n e^{ik_n·x}` on every site.
pub(crate) fn single_atom_samples<T: Scalar>(z: &[Complex<T>], grid: &SpatialGrid<T>, modes: &ModeSet<T>) -> Vec<T> {
    let two = T::lit(2.0);
    (0..grid.len())
        .map(|i| {
            let x = grid.point(i);
            modes
                .modes()
                .iter()
                .zip(z)
                .enumerate()
                .map(|(n, (m, zn))| (m.coupling.conj() * zn * cis(modes.phase(n, &x))).re)
                .sum::<T>()
                * two
        })
        .collect()
}

/// Potential `Σ_n Re(b_n) cos(k_n·x) + Im(b_n) sin(k_n·x)` and the coherent
/// amplitude `f_n = conj(b_n) / (2 conj(λ_n))` that produces it.
pub fn almost_periodic_potential<T: Scalar>(
    b: &[Complex<T>],
    modes: &ModeSet<T>,
    grid: &SpatialGrid<T>,
) -> Result<(EffectivePotential<T>, Vec<Complex<T>>)> {
    check_modes_grid(modes, grid)?;
    if b.len() != modes.len() {
        return Err(Error::DimensionMismatch {
            expected: modes.len(),
            found: b.len(),
        });
    }
    let mut f = Vec::with_capacity(b.len());
    for (n, (bn, m)) in b.iter().zip(modes.modes()).enumerate() {
        if *bn == czero() {
            f.push(czero());
            continue;
        }
        if m.coupling == czero() {
            return Err(Error::Unrepresentable(format!("mode {n} has zero coupling")));
        }
        f.push(bn.conj() / (m.coupling.conj() * T::lit(2.0)));
    }
    let samples = (0..grid.len())
        .map(|i| {
            let x = grid.point(i);
            b.iter()
                .enumerate()
                .map(|(n, bn)| {
                    let p = modes.phase(n, &x);
                    bn.re * p.cos() + bn.im * p.sin()
                })
                .sum()
        })
        .collect();
    Ok((EffectivePotential::new(grid.clone(), samples, "almost periodic")?, f))
}

/// Normalized superposition `Σ_i √α_i Ξ(z_i)`.
pub fn mixture_state<T: Scalar>(space: &FockSpace<T>, mu: &ClassicalMeasure<T>) -> Result<FockState<T>> {
    let states: Vec<FockState<T>> = mu
        .points()
        .iter()
        .map(|z| coherent_state(space, z))
        .collect::<Result<_>>()?;
    if states.len() == 1 {
        return Ok(states.into_iter().next().expect("one atom"));
    }
    let terms: Vec<(Complex<T>, &FockState<T>)> = mu
        .weights()
        .iter()
        .zip(&states)
        .map(|(a, s)| (Complex::new(a.sqrt(), T::zero()), s))
        .collect();
    FockState::superposition(&terms)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mollifier {
    /// `c · exp(−1/(1 − |x|²))` on the unit ball.
    #[default]
    Bump,
}

impl Mollifier {
    pub fn profile<T: Scalar>(&self, r: T) -> T {
        match self {
            Mollifier::Bump => {
                if r < T::one() {
                    (-T::one() / (T::one() - r * r)).exp()
                } else {
                    T::zero()
                }
            }
        }
    }
}

/// Smallest number of grid points the mollifier support must span per axis.
pub const MOLLIFIER_MIN_POINTS: usize = 8;

/// Discrete periodic convolution `φ_ε * W`, weights normalized to unit mass.
pub fn mollify<T: Scalar>(samples: &[T], grid: &SpatialGrid<T>, eps: T, phi: Mollifier) -> Result<Vec<T>> {
    if samples.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            found: samples.len(),
        });
    }
    if !(eps > T::zero()) {
        return Err(invalid("mollifier width must be positive"));
    }
    let h = grid.spacing();
    let span = (eps + eps) / h;
    if span < T::from_usize_lossy(MOLLIFIER_MIN_POINTS) {
        let need = (eps + eps) / T::from_usize_lossy(MOLLIFIER_MIN_POINTS);
        return Err(precondition(format!(
            "mollifier of width {eps} spans {span:.2} grid points; need spacing at most {need:.3e} (have {h:.3e})"
        )));
    }
    let g = grid.points_per_axis();
    let d = grid.dim();
    let r = (eps / h).floor().to_usize().unwrap_or(0);
    if 2 * r + 1 > g {
        return Err(precondition("mollifier support wider than the grid"));
    }
    let width = 2 * r + 1;
    let mut offsets = Vec::new();
    let mut total = T::zero();
    for o in 0..width.pow(d as u32) {
        let mut rem = o;
        let mut off = Vec::with_capacity(d);
        let mut rr = T::zero();
        for _ in 0..d {
            let k = (rem % width) as i64 - r as i64;
            rem /= width;
            let y = T::lit(k as f64) * h / eps;
            rr = rr + y * y;
            off.push(k);
        }
        let w = phi.profile(rr.sqrt());
        if w > T::zero() {
            total = total + w;
            offsets.push((off, w));
        }
    }
    let gi = g as i64;
    let mut out = vec![T::zero(); samples.len()];
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = T::zero();
        for (off, w) in &offsets {
            let mut rem = i;
            let mut j = 0usize;
            let mut stride = 1usize;
            for k in off {
                let c = (rem % g) as i64;
                rem /= g;
                let s = (c + k).rem_euclid(gi) as usize;
                j += s * stride;
                stride *= g;
            }
            acc = acc + *w * samples[j];
        }
        *o = acc / total;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrapAmplitude<T: Scalar> {
    /// Mode amplitudes `z_n`.
    pub amplitudes: Vec<Complex<T>>,
    /// `φ_ε * W` on the grid.
    pub mollified: Vec<T>,
    /// `Σ |z_n|²`.
    pub norm_sq: T,
    /// `Σ ω_n |z_n|²`.
    pub field_energy: T,
    /// Fraction of `‖φ_ε * W‖²` not carried by the mode set.
    pub uncovered_fraction: T,
}

/// Largest tolerated fraction of trap energy outside the mode set.
pub const TRAP_COVERAGE_LIMIT: f64 = 0.01;

/// Coherent amplitude whose partial trace reproduces `φ_ε * W`:
/// `f(k) = (φ_ε * W)^(k) / (2 (2π)^{d/2} conj(λ(k)))`.
pub fn trap_coherent_amplitude<T: Scalar>(
    w: &[T],
    grid: &SpatialGrid<T>,
    eps: T,
    modes: &ModeSet<T>,
    phi: Mollifier,
) -> Result<TrapAmplitude<T>> {
    check_modes_grid(modes, grid)?;
    let f = mollify(w, grid, eps, phi)?;
    let d = grid.dim() as i32;
    let hd = grid.cell_volume();
    let dk = modes.cell_volume();
    let two_pi_d2 = (T::PI() + T::PI()).powf(T::from_i32(d).expect("small") / T::lit(2.0));
    let points = grid.points();
    let fhat: Vec<Complex<T>> = (0..modes.len())
        .map(|n| {
            points
                .iter()
                .zip(&f)
                .fold(czero(), |acc, (x, &fx)| acc + cis(-modes.phase(n, x)) * fx)
                * (hd / two_pi_d2)
        })
        .collect();
    let total: T = f.iter().map(|v| *v * *v).sum::<T>() * hd;
    let captured: T = fhat.iter().map(|c| c.norm_sqr()).sum::<T>() * dk;
    let uncovered = if total > T::zero() {
        (T::one() - captured / total).max(T::zero())
    } else {
        T::zero()
    };
    if uncovered > T::lit(TRAP_COVERAGE_LIMIT) {
        return Err(Error::Unrepresentable(format!(
            "{:.2}% of the trap lies outside the mode set",
            uncovered.as_f64() * 100.0
        )));
    }
    let scale = total.sqrt().max(T::one()) * T::lit(1e-13);
    let mut z = Vec::with_capacity(modes.len());
    for (n, (fh, m)) in fhat.iter().zip(modes.modes()).enumerate() {
        if fh.norm() <= scale {
            z.push(czero());
            continue;
        }
        if m.coupling == czero() {
            return Err(Error::Unrepresentable(format!("coupling vanishes at mode {n}")));
        }
        z.push(fh * dk / (m.coupling.conj() * T::lit(2.0) * two_pi_d2));
    }
    Ok(TrapAmplitude {
        norm_sq: z.iter().map(|c| c.norm_sqr()).sum(),
        field_energy: modes.field_energy(&z),
        amplitudes: z,
        mollified: f,
        uncovered_fraction: uncovered,
    })
}

/// Low/high frequency split of `W_z(x) = (2π)^{−d/2} Σ_n λ_n z_n e^{ik_n·x}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolaronSplit<T: Scalar> {
    pub low: Vec<Complex<T>>,
    pub high: Vec<Complex<T>>,
    /// `G` with `W^> = ∇·G`, one sample vector per axis.
    pub high_gradient: Vec<Vec<Complex<T>>>,
    /// `∫_{|k|≤ϱ} |k|^{1−d} dk` on the mode grid.
    pub low_constant: T,
    /// `∫_{|k|>ϱ} |k|^{1−d} dk` on the mode grid.
    pub high_constant: T,
    /// `∫_{|k|>ϱ} |k|^{−d−1} dk` on the mode grid.
    pub high_form_constant: T,
    /// `Σ |z_n|²`.
    pub z_norm_sq: T,
}

impl<T: Scalar> PolaronSplit<T> {
    /// `½ C_<(ϱ) + ½ (2π)^{−d} ‖z‖²`.
    pub fn low_sup_bound(&self, dim: usize) -> T {
        let half = T::lit(0.5);
        half * self.low_constant + half * self.z_norm_sq / (T::PI() + T::PI()).powi(dim as i32)
    }

    /// `α t + ‖z‖² ‖ψ‖² C'_>(ϱ) / α` for kinetic energy `t`.
    pub fn high_form_bound(&self, alpha: T, kinetic: T, psi_norm_sq: T) -> T {
        alpha * kinetic + self.z_norm_sq * psi_norm_sq * self.high_form_constant / alpha
    }
}

pub fn polaron_split<T: Scalar>(
    z: &[Complex<T>],
    rho: T,
    modes: &ModeSet<T>,
    grid: &SpatialGrid<T>,
) -> Result<PolaronSplit<T>> {
    check_modes_grid(modes, grid)?;
    if z.len() != modes.len() {
        return Err(Error::DimensionMismatch {
            expected: modes.len(),
            found: z.len(),
        });
    }
    let kmin = modes.modes().iter().map(|m| kabs(&m.k)).fold(T::infinity(), T::min);
    if !(rho.is_finite() && rho >= kmin) {
        return Err(invalid(format!("split radius {rho} below the smallest |k| = {kmin}")));
    }
    let d = grid.dim();
    let dt = T::from_usize_lossy(d);
    let dk = modes.cell_volume();
    let norm = (T::PI() + T::PI()).powf(-dt / T::lit(2.0));
    let (mut cl, mut ch, mut cf) = (T::zero(), T::zero(), T::zero());
    for m in modes.modes() {
        let k = kabs(&m.k);
        if k <= rho {
            cl = cl + dk * k.powf(T::one() - dt);
        } else {
            ch = ch + dk * k.powf(T::one() - dt);
            cf = cf + dk * k.powf(-dt - T::one());
        }
    }
    let n_sites = grid.len();
    let mut low = vec![czero(); n_sites];
    let mut high = vec![czero(); n_sites];
    let mut grad = vec![vec![czero(); n_sites]; d];
    for i in 0..n_sites {
        let x = grid.point(i);
        for (n, (m, zn)) in modes.modes().iter().zip(z).enumerate() {
            let term = m.coupling * zn * cis(modes.phase(n, &x)) * norm;
            let k = kabs(&m.k);
            if k <= rho {
                low[i] = low[i] + term;
            } else {
                high[i] = high[i] + term;
                let k2 = k * k;
                for (a, g) in grad.iter_mut().enumerate() {
                    g[i] = g[i] + term * Complex::new(T::zero(), -m.k[a] / k2);
                }
            }
        }
    }
    Ok(PolaronSplit {
        low,
        high,
        high_gradient: grad,
        low_constant: cl,
        high_constant: ch,
        high_form_constant: cf,
        z_norm_sq: z.iter().map(|c| c.norm_sqr()).sum(),
    })
}
