//! Ground energies, resolvents and the classical-field energy minimization.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::effective::{effective_operator, single_atom_samples, ClassicalMeasure};
use crate::error::{invalid, precondition, Error, Result};
use crate::fock::{adequate_cutoff, coherent_state, FockSpace, FockState, ModeSet};
use crate::model::{assemble_full, assemble_h0, coupling_floor, tensor_state, HamiltonianSpec, ParticleModel};
use crate::operator::SparseOperator;
use crate::scalar::{axpy, czero, inner, norm, scale, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct LanczosOptions {
    /// Target residual `‖H v − θ v‖`.
    pub tol: f64,
    pub max_matvecs: usize,
    /// Krylov vectors per restart cycle.
    pub cycle: usize,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_matvecs: 50_000,
            cycle: 80,
            seed: 0x5eed_1a2c,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair<T: Scalar> {
    pub value: T,
    pub vector: Vec<Complex<T>>,
    pub residual: T,
    pub matvecs: usize,
}

/// Seeded complex Gaussian vector, unit norm.
pub fn random_unit_vector<T: Scalar>(dim: usize, seed: u64) -> Vec<Complex<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<Complex<T>> = (0..dim)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex::new(T::lit(re), T::lit(im))
        })
        .collect();
    let n = norm(&v);
    scale(T::one() / n, &mut v);
    v
}

fn project_out<T: Scalar>(v: &mut [Complex<T>], basis: &[Vec<Complex<T>>]) {
    for q in basis {
        let c = inner(q, v);
        axpy(-c, q, v);
    }
}

/// Lowest eigenpair of a Hermitian operator by restarted Lanczos.
pub fn ground_energy<T: Scalar>(op: &SparseOperator<T>, opts: &LanczosOptions) -> Result<EigenPair<T>> {
    lowest_eigenpair(op, opts, &[])
}

/// Lowest eigenpair on the orthogonal complement of `deflate` (orthonormal vectors).
pub fn lowest_eigenpair<T: Scalar>(
    op: &SparseOperator<T>,
    opts: &LanczosOptions,
    deflate: &[Vec<Complex<T>>],
) -> Result<EigenPair<T>> {
    let n = op.dim();
    if n == 0 {
        return Err(invalid("empty operator"));
    }
    if deflate.len() >= n {
        return Err(invalid("deflation exhausts the space"));
    }
    if opts.cycle < 2 {
        return Err(invalid("Lanczos cycle needs at least two vectors"));
    }
    let mut v = random_unit_vector::<T>(n, opts.seed);
    project_out(&mut v, deflate);
    project_out(&mut v, deflate);
    let nv = norm(&v);
    scale(T::one() / nv, &mut v);

    let tol = T::lit(opts.tol);
    let mut matvecs = 0usize;
    let mut w = vec![czero(); n];
    let mut last: (f64, T) = (f64::NAN, T::infinity());
    loop {
        let m = opts.cycle.min(n - deflate.len());
        let mut basis: Vec<Vec<Complex<T>>> = vec![v.clone()];
        let mut alpha: Vec<f64> = Vec::with_capacity(m);
        let mut beta: Vec<f64> = Vec::with_capacity(m);
        for j in 0..m {
            op.apply(&basis[j], &mut w);
            matvecs += 1;
            let a = inner(&basis[j], &w).re;
            alpha.push(a.as_f64());
            for _ in 0..2 {
                project_out(&mut w, deflate);
                project_out(&mut w, &basis);
            }
            let b = norm(&w);
            if j + 1 == m || b.as_f64() <= 1e-13 * (1.0 + a.as_f64().abs()) {
                break;
            }
            beta.push(b.as_f64());
            let mut q = w.clone();
            scale(T::one() / b, &mut q);
            basis.push(q);
        }
        let k = alpha.len();
        let mut t = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alpha[i];
            if i + 1 < k {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let (imin, theta) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, &e)| if e < acc.1 { (i, e) } else { acc });
        let mut y = vec![czero(); n];
        for (i, q) in basis.iter().take(k).enumerate() {
            axpy(Complex::new(T::lit(eig.eigenvectors[(i, imin)]), T::zero()), q, &mut y);
        }
        project_out(&mut y, deflate);
        let ny = norm(&y);
        scale(T::one() / ny, &mut y);
        op.apply(&y, &mut w);
        matvecs += 1;
        let rq = inner(&y, &w).re;
        axpy(Complex::new(-rq, T::zero()), &y, &mut w);
        project_out(&mut w, deflate);
        let res = norm(&w);
        if res <= tol || k == n - deflate.len() && res <= tol.max(T::lit(1e-10) * (T::one() + rq.abs())) {
            return Ok(EigenPair {
                value: rq,
                vector: y,
                residual: res,
                matvecs,
            });
        }
        let stalled = last.1 <= res && (last.0 - theta).abs() <= f64::EPSILON * 16.0 * (1.0 + theta.abs());
        if matvecs >= opts.max_matvecs || stalled {
            return Err(Error::NotConverged {
                iterations: matvecs,
                estimate: theta,
                residual: res.as_f64(),
            });
        }
        last = (theta, res);
        v = y;
    }
}

/// Relative residual target of the resolvent solves.
pub const RESOLVENT_TOLERANCE: f64 = 1e-8;

/// `(op + ζ)^{−1} v` by conjugate gradients.
pub fn resolvent_apply<T: Scalar>(op: &SparseOperator<T>, zeta: T, v: &[Complex<T>], rel_tol: f64) -> Result<Vec<Complex<T>>> {
    let n = op.dim();
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: v.len(),
        });
    }
    let bnorm = norm(v);
    let mut x = vec![czero(); n];
    if bnorm == T::zero() {
        return Ok(x);
    }
    let target = T::lit(rel_tol) * bnorm;
    let mut r = v.to_vec();
    let mut p = r.clone();
    let mut ap = vec![czero(); n];
    let mut rs = crate::scalar::norm_sq(&r);
    let max_iter = 20 * n + 200;
    for it in 0..max_iter {
        op.apply(&p, &mut ap);
        axpy(Complex::new(zeta, T::zero()), &p, &mut ap);
        let pap = inner(&p, &ap).re;
        if !(pap > T::zero()) {
            return Err(precondition(format!(
                "shift {zeta} does not make the operator positive (pᴴAp = {pap:e} at step {it})"
            )));
        }
        let a = rs / pap;
        axpy(Complex::new(a, T::zero()), &p, &mut x);
        axpy(Complex::new(-a, T::zero()), &ap, &mut r);
        let rs_new = crate::scalar::norm_sq(&r);
        if rs_new.sqrt() <= target {
            return Ok(x);
        }
        let b = rs_new / rs;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = *ri + *pi * b;
        }
        rs = rs_new;
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        estimate: f64::NAN,
        residual: (rs.sqrt() / bnorm).as_f64(),
    })
}

/// `max_v ‖(A+ζ)^{−1} v − (B+ζ)^{−1} v‖ / ‖v‖` over the probe vectors.
pub fn resolvent_distance<T: Scalar>(
    a: &SparseOperator<T>,
    b: &SparseOperator<T>,
    zeta: T,
    probes: &[Vec<Complex<T>>],
) -> Result<T> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    if probes.is_empty() {
        return Err(invalid("no probe vectors"));
    }
    let ratios: Vec<Result<T>> = probes
        .par_iter()
        .map(|v| {
            let ra = resolvent_apply(a, zeta, v, RESOLVENT_TOLERANCE)?;
            let rb = resolvent_apply(b, zeta, v, RESOLVENT_TOLERANCE)?;
            let d: Vec<Complex<T>> = ra.iter().zip(&rb).map(|(x, y)| x - y).collect();
            Ok(norm(&d) / norm(v))
        })
        .collect();
    let mut best = T::zero();
    for r in ratios {
        best = best.max(r?);
    }
    Ok(best)
}

/// Number of seeded Gaussian probes in the default probe set.
pub const DEFAULT_GAUSSIAN_PROBES: usize = 16;

/// Seeded Gaussian probes, followed by `extra` (for instance the ground vector of `H₀`).
pub fn default_probes<T: Scalar>(dim: usize, seed: u64, extra: Option<&[Complex<T>]>) -> Vec<Vec<Complex<T>>> {
    let mut out: Vec<Vec<Complex<T>>> = (0..DEFAULT_GAUSSIAN_PROBES as u64)
        .map(|i| random_unit_vector(dim, seed.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(i + 1))))
        .collect();
    if let Some(e) = extra {
        out.push(e.to_vec());
    }
    out
}

/// Resolvent shift `|b| + 1` for an operator bounded below by `b`.
pub fn default_shift<T: Scalar>(lower_bound: T) -> T {
    lower_bound.abs() + T::one()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GseOptions {
    pub lanczos: LanczosOptions,
    /// Stop once one alternating step lowers the energy by less than this.
    pub stagnation_tol: f64,
    pub max_alternations: usize,
    /// Energy increase tolerated between alternations before declaring oscillation.
    pub monotonicity_slack: f64,
    /// Evaluation budget of the two-atom refinement; 0 disables it.
    pub refine_evaluations: usize,
    pub cutoff_tolerance: f64,
    pub min_cutoff: usize,
    pub max_cutoff: usize,
    pub budget: usize,
}

impl Default for GseOptions {
    fn default() -> Self {
        Self {
            lanczos: LanczosOptions::default(),
            stagnation_tol: 1e-11,
            max_alternations: 500,
            monotonicity_slack: 1e-9,
            refine_evaluations: 0,
            cutoff_tolerance: 1e-8,
            min_cutoff: 6,
            max_cutoff: 64,
            budget: crate::fock::DEFAULT_DIMENSION_BUDGET,
        }
    }
}

/// `m_n(ψ) = Σ_j ⟨ψ|e^{ik_n·x_j}|ψ⟩`.
pub fn mode_moments<T: Scalar>(particles: &ParticleModel<T>, modes: &ModeSet<T>, psi: &[Complex<T>]) -> Vec<Complex<T>> {
    let grid = particles.grid();
    let sites = grid.len();
    let mut density = vec![T::zero(); sites];
    for (c, p) in psi.iter().enumerate() {
        for j in 0..particles.n_particles() {
            let s = grid.particle_site(c, j);
            density[s] = density[s] + p.norm_sqr();
        }
    }
    (0..modes.len())
        .map(|n| {
            density.iter().enumerate().fold(czero(), |acc, (s, &rho)| {
                acc + crate::scalar::cis(modes.phase(n, &grid.point(s))) * rho
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalOutcome<T: Scalar> {
    pub z: Vec<Complex<T>>,
    pub energy: T,
    pub state: EigenPair<T>,
    /// Energy after every half step.
    pub trace: Vec<f64>,
    pub alternations: usize,
}

/// `σ̲(H₀ + Σ_j V_z(x_j)) + Σ ω |z|²` and the minimizing particle state.
pub fn single_atom_energy<T: Scalar>(
    particles: &ParticleModel<T>,
    modes: &ModeSet<T>,
    z: &[Complex<T>],
    opts: &LanczosOptions,
) -> Result<(T, EigenPair<T>)> {
    let v = single_atom_samples(z, particles.grid(), modes);
    let op = effective_operator(particles, &v)?;
    let pair = ground_energy(&op, opts)?;
    Ok((pair.value + modes.field_energy(z), pair))
}

/// Alternate `z ← −λ conj(m(ψ))/ω` with `ψ ← ground state of H₀ + V_z`.
pub fn alternating_minimization<T: Scalar>(
    particles: &ParticleModel<T>,
    modes: &ModeSet<T>,
    start: Option<Vec<Complex<T>>>,
    opts: &GseOptions,
) -> Result<ClassicalOutcome<T>> {
    if modes.modes().iter().any(|m| m.omega <= T::zero() && m.coupling != czero()) {
        return Err(precondition("alternating minimization needs ω_n > 0 on every coupled mode"));
    }
    let h0 = assemble_h0(particles)?;
    let slack = |e: f64| opts.monotonicity_slack * (1.0 + e.abs());
    let (mut z, mut pair) = match start {
        Some(z) => {
            let (_, p) = single_atom_energy(particles, modes, &z, &opts.lanczos)?;
            (z, p)
        }
        None => (vec![czero(); modes.len()], ground_energy(&h0, &opts.lanczos)?),
    };
    let mut energy = (pair.value + modes.field_energy(&z)).as_f64();
    let mut trace = vec![energy];
    for it in 1..=opts.max_alternations {
        let m = mode_moments(particles, modes, &pair.vector);
        z = modes
            .modes()
            .iter()
            .zip(&m)
            .map(|(md, mn)| if md.omega > T::zero() { -(md.coupling * mn.conj()) / md.omega } else { czero() })
            .collect();
        let kin = h0.expectation(&pair.vector).re;
        let cross: T = modes
            .modes()
            .iter()
            .zip(&z)
            .zip(&m)
            .map(|((md, zn), mn)| (md.coupling.conj() * zn * mn).re)
            .sum::<T>()
            * T::lit(2.0);
        let half = (kin + cross + modes.field_energy(&z)).as_f64();
        let (e, p) = single_atom_energy(particles, modes, &z, &opts.lanczos)?;
        let e = e.as_f64();
        trace.push(half);
        trace.push(e);
        if half > energy + slack(energy) || e > half + slack(half) {
            return Err(Error::Oscillation { trace });
        }
        pair = p;
        let drop = energy - e;
        energy = e;
        if drop.abs() <= opts.stagnation_tol * (1.0 + e.abs()) {
            return Ok(ClassicalOutcome {
                z,
                energy: T::lit(energy),
                state: pair,
                trace,
                alternations: it,
            });
        }
    }
    Err(Error::NotConverged {
        iterations: opts.max_alternations,
        estimate: energy,
        residual: f64::NAN,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementOutcome<T: Scalar> {
    pub measure: ClassicalMeasure<T>,
    pub energy: T,
    pub evaluations: usize,
}

/// `σ̲(H_eff(μ)) + c(μ)` for a finite measure.
pub fn measure_energy<T: Scalar>(
    particles: &ParticleModel<T>,
    modes: &ModeSet<T>,
    mu: &ClassicalMeasure<T>,
    opts: &LanczosOptions,
) -> Result<T> {
    let v = single_atom_samples(&mu.barycenter(), particles.grid(), modes);
    let op = effective_operator(particles, &v)?;
    Ok(ground_energy(&op, opts)?.value + mu.field_energy(modes))
}

/// Compass search over two-atom measures started around `z`.
pub fn refine_two_atom<T: Scalar>(
    particles: &ParticleModel<T>,
    modes: &ModeSet<T>,
    z: &[Complex<T>],
    budget: usize,
    opts: &LanczosOptions,
) -> Result<RefinementOutcome<T>> {
    let n = z.len();
    let decode = |p: &[f64]| -> Result<ClassicalMeasure<T>> {
        let a = 1.0 / (1.0 + (-p[0]).exp());
        let atom = |off: usize| -> Vec<Complex<T>> {
            (0..n)
                .map(|i| Complex::new(T::lit(p[off + 2 * i]), T::lit(p[off + 2 * i + 1])))
                .collect()
        };
        ClassicalMeasure::new(vec![(T::lit(a), atom(1)), (T::lit(1.0 - a), atom(1 + 2 * n))])
    };
    let mut p = vec![0.0; 1 + 4 * n];
    for i in 0..n {
        let (re, im) = (z[i].re.as_f64(), z[i].im.as_f64());
        p[1 + 2 * i] = re + 0.05;
        p[2 + 2 * i] = im;
        p[1 + 2 * n + 2 * i] = re - 0.05;
        p[2 + 2 * n + 2 * i] = im;
    }
    let mut evals = 1;
    let mut best = measure_energy(particles, modes, &decode(&p)?, opts)?.as_f64();
    let mut step = 0.1;
    while evals < budget && step > 1e-5 {
        let mut improved = false;
        for d in 0..p.len() {
            for s in [step, -step] {
                if evals >= budget {
                    break;
                }
                let mut q = p.clone();
                q[d] += s;
                evals += 1;
                let e = measure_energy(particles, modes, &decode(&q)?, opts)?.as_f64();
                if e < best {
                    best = e;
                    p = q;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok(RefinementOutcome {
        measure: decode(&p)?,
        energy: T::lit(best),
        evaluations: evals,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GsePoint<T: Scalar> {
    pub eps: T,
    pub quantum_energy: T,
    /// `⟨ψ*⊗Ξ(z*)|H_ε|ψ*⊗Ξ(z*)⟩` in the truncated space.
    pub trial_energy: T,
    pub classical_infimum: T,
    pub gap: T,
    pub matvecs: usize,
    pub cutoffs: Vec<usize>,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GseResult<T: Scalar> {
    pub points: Vec<GsePoint<T>>,
    pub classical_infimum: T,
    pub minimizer: ClassicalMeasure<T>,
    pub classical: ClassicalOutcome<T>,
    pub refinement: Option<RefinementOutcome<T>>,
    /// `σ̲(H₀) − N² Σ |λ|²/ω`.
    pub floor: T,
    pub h0_ground: T,
}

/// Field cutoffs that hold the coherent state `Ξ(z)` at this ε.
pub fn cutoffs_for<T: Scalar>(z: &[Complex<T>], eps: T, opts: &GseOptions) -> Result<Vec<usize>> {
    z.iter()
        .enumerate()
        .map(|(n, zn)| {
            let c = adequate_cutoff(zn.norm_sqr().as_f64(), eps.as_f64(), opts.cutoff_tolerance).max(opts.min_cutoff);
            if c > opts.max_cutoff {
                Err(Error::CutoffTooSmall {
                    mode: n,
                    cutoff: opts.max_cutoff,
                    required: c,
                })
            } else {
                Ok(c)
            }
        })
        .collect()
}

/// Quantum ground energies along an ε sweep against the classical infimum.
pub fn minimize_gse<T: Scalar>(
    particles: &ParticleModel<T>,
    modes: &ModeSet<T>,
    eps_list: &[T],
    opts: &GseOptions,
) -> Result<GseResult<T>> {
    if eps_list.is_empty() {
        return Err(invalid("empty ε sweep"));
    }
    let h0 = assemble_h0(particles)?;
    let h0_ground = ground_energy(&h0, &opts.lanczos)?.value;
    let floor = h0_ground - coupling_floor(modes, particles.n_particles())?;
    let classical = alternating_minimization(particles, modes, None, opts)?;
    let refinement = if opts.refine_evaluations > 0 {
        Some(refine_two_atom(particles, modes, &classical.z, opts.refine_evaluations, &opts.lanczos)?)
    } else {
        None
    };
    let (classical_infimum, minimizer) = match &refinement {
        Some(r) if r.energy < classical.energy => (r.energy, r.measure.clone()),
        _ => (classical.energy, ClassicalMeasure::dirac(classical.z.clone())),
    };
    let points: Vec<Result<GsePoint<T>>> = eps_list
        .par_iter()
        .map(|&eps| {
            let cutoffs = cutoffs_for(&classical.z, eps, opts)?;
            let space = FockSpace::new(modes.clone(), eps, cutoffs.clone())?;
            let spec = HamiltonianSpec::new(particles.clone(), space.clone())?.with_budget(opts.budget);
            let h = assemble_full(&spec)?;
            let pair = ground_energy(&h, &opts.lanczos)?;
            let trial = trial_energy(&h, &classical.state.vector, &space, &classical.z)?;
            Ok(GsePoint {
                eps,
                quantum_energy: pair.value,
                trial_energy: trial,
                classical_infimum,
                gap: (classical_infimum - pair.value).abs(),
                matvecs: pair.matvecs,
                cutoffs,
                dim: h.dim(),
            })
        })
        .collect();
    Ok(GseResult {
        points: points.into_iter().collect::<Result<_>>()?,
        classical_infimum,
        minimizer,
        classical,
        refinement,
        floor,
        h0_ground,
    })
}

fn trial_energy<T: Scalar>(
    h: &SparseOperator<T>,
    psi: &[Complex<T>],
    space: &FockSpace<T>,
    z: &[Complex<T>],
) -> Result<T> {
    let xi: FockState<T> = coherent_state(space, z)?;
    let v = tensor_state(psi, &xi.to_full()?);
    Ok(h.expectation(&v).re / crate::scalar::norm_sq(&v))
}
