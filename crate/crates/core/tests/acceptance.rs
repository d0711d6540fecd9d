//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any criterion fails.

mod common;

use std::time::Instant;

use common::tolerances::*;
use common::*;
use quasiclassical::effective::{
    almost_periodic_potential, classical_potential, effective_operator, mixture_state, partial_trace_potential,
    polaron_split, trap_coherent_amplitude, ClassicalMeasure, Mollifier,
};
use quasiclassical::fock::{
    adequate_cutoff, annihilation_field, coherent_overlap, coherent_state, coherent_state_with_tolerance,
    creation_field, dgamma, field_energy_operator, interaction_at, overlap, FockSpace, FockState, ModeSet,
};
use quasiclassical::model::{
    assemble_full, assemble_h0, tensor_state, Boundary, HamiltonianSpec, NamedPotential, ParticleModel,
    PotentialSplit, SpatialGrid,
};
use quasiclassical::scalar::{norm, norm_sq};
use quasiclassical::spectral::{
    alternating_minimization, default_probes, default_shift, ground_energy, lowest_eigenpair, minimize_gse,
    resolvent_distance, GseOptions, LanczosOptions,
};
use quasiclassical::{Operator, C64};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn run(id: &str, name: &str, limit_s: f64, f: impl FnOnce() -> Outcome) -> bool {
    let t = Instant::now();
    let out = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        check(false, format!("panicked: {msg}"))
    });
    let secs = t.elapsed().as_secs_f64();
    let in_time = secs <= limit_s;
    let pass = out.pass && in_time;
    println!(
        "[{}] {id} {name}: {} ({secs:.2} s, limit {limit_s} s)",
        if pass { "PASS" } else { "FAIL" },
        out.detail
    );
    pass
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn c1_partial_trace() -> Outcome {
    let particles = harmonic_particle(24);
    let modes = generic_modes();
    let mut r = rng(101);
    let mut worst: f64 = 0.0;
    let eps_choices = [1.0, 0.5, 0.3];
    let mut cache: Vec<(f64, HamiltonianSpec<f64>, Operator)> = Vec::new();
    for &eps in &eps_choices {
        let space = FockSpace::new(modes.clone(), eps, vec![4, 3]).unwrap();
        let spec = HamiltonianSpec::new(particles.clone(), space).unwrap();
        let h = assemble_full(&spec).unwrap();
        cache.push((eps, spec, h));
    }
    for i in 0..PARTIAL_TRACE_PAIRS {
        let (_, spec, h) = &cache[i % cache.len()];
        let psi = gaussian_vector(&mut r, particles.config_len());
        let field = normalized(gaussian_vector(&mut r, spec.field().full_dim().unwrap()));
        let state = FockState::from_coeffs(spec.field().clone(), field.clone()).unwrap();
        let full = h.expectation(&tensor_state(&psi, &field)).re;
        let (v, c) = partial_trace_potential(&state, spec.grid()).unwrap();
        let heff = effective_operator(&particles, &v.samples).unwrap();
        let reduced = heff.expectation(&psi).re + c * norm_sq(&psi);
        worst = worst.max((full - reduced).abs() / (1.0 + full.abs()));
    }
    check(
        worst <= PARTIAL_TRACE_REL,
        format!("{PARTIAL_TRACE_PAIRS} pairs, max relative error {worst:.2e} (tol {PARTIAL_TRACE_REL:e})"),
    )
}

fn c2_coherent_exactness() -> Outcome {
    let particles = harmonic_particle(48);
    let grid = particles.grid().clone();
    let modes = generic_modes();
    let f = vec![cz(0.45, -0.2), cz(-0.3, 0.25)];
    let v_delta = classical_potential(&ClassicalMeasure::dirac(f.clone()), &grid, &modes).unwrap();
    let c_delta = modes.field_energy(&f);
    let mut worst_v: f64 = 0.0;
    let mut worst_c: f64 = 0.0;
    for eps in COHERENT_EPS {
        let cut: Vec<usize> = f.iter().map(|z| adequate_cutoff(z.norm_sqr(), eps, 1e-8)).collect();
        let space = FockSpace::new(modes.clone(), eps, cut).unwrap();
        let xi = coherent_state(&space, &f).unwrap();
        let (v, c) = partial_trace_potential(&xi, &grid).unwrap();
        worst_v = worst_v.max(v.sup_distance(&v_delta));
        worst_c = worst_c.max((c - c_delta).abs());
    }
    check(
        worst_v <= COHERENT_SUP && worst_c <= COHERENT_ENERGY,
        format!(
            "eps {COHERENT_EPS:?}: sup|V_eps - V_f| {worst_v:.2e} (tol {COHERENT_SUP:e}), |c_eps - c| {worst_c:.2e} (tol {COHERENT_ENERGY:e})"
        ),
    )
}

fn c3_overlap() -> Outcome {
    let modes = generic_modes();
    let pts = [
        vec![cz(0.0, 0.0), cz(0.0, 0.0)],
        vec![cz(0.3, 0.2), cz(-0.1, 0.15)],
        vec![cz(-0.25, 0.4), cz(0.2, -0.3)],
    ];
    let mut worst: f64 = 0.0;
    for eps in OVERLAP_EPS {
        let cut: Vec<usize> = (0..2)
            .map(|n| pts.iter().map(|p| adequate_cutoff(p[n].norm_sqr(), eps, 1e-12)).max().unwrap())
            .collect();
        let space = FockSpace::new(modes.clone(), eps, cut).unwrap();
        for a in &pts {
            for b in &pts {
                let xa = coherent_state(&space, a).unwrap();
                let xb = coherent_state(&space, b).unwrap();
                let num = overlap(&xa, &xb).unwrap();
                worst = worst.max((num - coherent_overlap(a, b, eps)).norm());
            }
        }
    }
    check(
        worst <= OVERLAP_ABS,
        format!("3x3 grid at eps {OVERLAP_EPS:?}, max |error| {worst:.2e} (tol {OVERLAP_ABS:e})"),
    )
}

fn c4_mixture() -> Outcome {
    let particles = harmonic_particle(48);
    let grid = particles.grid().clone();
    let modes = massive_modes();
    let (_, z1) = almost_periodic_potential(&[cz(0.6, 0.0), cz(0.2, 0.0)], &modes, &grid).unwrap();
    let (_, z2) = almost_periodic_potential(&[cz(-0.4, 0.0), cz(-0.3, 0.0)], &modes, &grid).unwrap();
    let mu = ClassicalMeasure::new(vec![(0.3, z1.clone()), (0.7, z2.clone())]).unwrap();
    let v_mu = classical_potential(&mu, &grid, &modes).unwrap();
    let h_mu = effective_operator(&particles, &v_mu.samples).unwrap();
    let h0 = assemble_h0(&particles).unwrap();
    let g0 = ground_energy(&h0, &LanczosOptions::default()).unwrap();
    let probes = default_probes(h0.dim(), 17, Some(&g0.vector));
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut dists = Vec::new();
    let mut ops = Vec::new();
    let mut sup = v_mu.sup_norm();
    for eps in MIXTURE_EPS {
        let cut: Vec<usize> = (0..2)
            .map(|n| adequate_cutoff(z1[n].norm_sqr().max(z2[n].norm_sqr()), eps, 1e-10))
            .collect();
        let space = FockSpace::new(modes.clone(), eps, cut).unwrap();
        let psi = mixture_state(&space, &mu).unwrap();
        let (v, _) = partial_trace_potential(&psi, &grid).unwrap();
        xs.push(1.0 / eps);
        ys.push(v.sup_distance(&v_mu).ln());
        sup = sup.max(v.sup_norm());
        ops.push(effective_operator(&particles, &v.samples).unwrap());
    }
    let zeta = default_shift(g0.value - sup);
    for op in &ops {
        dists.push(resolvent_distance(op, &h_mu, zeta, &probes).unwrap());
    }
    let s = slope(&xs, &ys);
    let target = -MIXTURE_SLOPE_FRACTION * mu.separation_rate();
    let monotone = dists.windows(2).all(|w| w[1] < w[0]);
    check(
        s <= target && monotone,
        format!(
            "slope {s:.4} (need <= {target:.4}), resolvent distances {:?} monotone={monotone}",
            dists.iter().map(|d| format!("{d:.2e}")).collect::<Vec<_>>()
        ),
    )
}

fn c5_gse() -> Outcome {
    let particles = harmonic_particle(48);
    let modes = massive_modes();
    let opts = GseOptions::default();
    let res = minimize_gse(&particles, &modes, &GSE_EPS, &opts).unwrap();
    let gaps: Vec<f64> = res.points.iter().map(|p| p.gap).collect();
    let monotone = gaps.windows(2).all(|w| w[1] < w[0]);
    let n = gaps.len();
    let richardson = 2.0 * gaps[n - 1] - gaps[n - 2];
    let h0 = assemble_h0(&particles).unwrap();
    let lo = LanczosOptions::default();
    let e0 = ground_energy(&h0, &lo).unwrap();
    let e1 = lowest_eigenpair(&h0, &lo, &[e0.vector.clone()]).unwrap();
    let spectral_gap = e1.value - e0.value;
    let rel = richardson.abs() / spectral_gap;
    let floor_ok = res.classical_infimum >= res.floor && res.points.iter().all(|p| p.quantum_energy >= res.floor);
    let upper_ok = res.points.iter().all(|p| p.quantum_energy <= p.trial_energy + 1e-9);
    check(
        monotone && rel <= GSE_RICHARDSON_REL && floor_ok && upper_ok,
        format!(
            "gaps {:?} monotone={monotone}, extrapolated {richardson:.2e} = {rel:.2e} of gap {spectral_gap:.4} (tol {GSE_RICHARDSON_REL:e}), floor {:.4} holds={floor_ok}, variational={upper_ok}",
            gaps.iter().map(|g| format!("{g:.4e}")).collect::<Vec<_>>(),
            res.floor
        ),
    )
}

fn c6_trap() -> Outcome {
    let grid = SpatialGrid::new(1, 4.0, 512, Boundary::Periodic).unwrap();
    let modes = trap_modes(&grid);
    let w = NamedPotential::Harmonic { strength: 1.0 }.sample(&grid);
    let particles = ParticleModel::external(grid.clone(), 1, &vec![0.0; grid.len()], PotentialSplit::PositivePart).unwrap();
    let h_trap = effective_operator(&particles, &w).unwrap();
    let h0 = assemble_h0(&particles).unwrap();
    let g0 = ground_energy(&h0, &LanczosOptions::default()).unwrap();
    let probes = default_probes(h0.dim(), 29, Some(&g0.vector));
    let zeta = default_shift(g0.value);
    let mut dists = Vec::new();
    let mut energies = Vec::new();
    let mut worst: f64 = 0.0;
    for eps in TRAP_EPS {
        let tr = trap_coherent_amplitude(&w, &grid, eps, &modes, Mollifier::Bump).unwrap();
        let cut: Vec<usize> = tr.amplitudes.iter().map(|z| adequate_cutoff(z.norm_sqr(), eps, 1e-10)).collect();
        let space = FockSpace::new(modes.clone(), eps, cut).unwrap();
        let xi = coherent_state_with_tolerance(&space, &tr.amplitudes, 1e-10).unwrap();
        let (v, c) = partial_trace_potential(&xi, &grid).unwrap();
        for i in 0..grid.len() {
            if grid.coordinate(i).abs() <= TRAP_INTERIOR_FRACTION * grid.half_width() {
                worst = worst.max((v.samples[i] - tr.mollified[i]).abs());
            }
        }
        energies.push(c);
        let h = effective_operator(&particles, &v.samples).unwrap();
        dists.push(resolvent_distance(&h, &h_trap, zeta, &probes).unwrap());
    }
    let ratios: Vec<f64> = dists.windows(2).map(|w| w[0] / w[1]).collect();
    let ratio_ok = ratios.iter().all(|&r| r >= TRAP_RESOLVENT_RATIO);
    let energy_ok = energies.windows(2).all(|w| w[1] > w[0]);
    check(
        ratio_ok && energy_ok && worst <= TRAP_REPRODUCTION_SUP,
        format!(
            "resolvent ratios {:?} (need >= {TRAP_RESOLVENT_RATIO}), interior reproduction {worst:.2e} (tol {TRAP_REPRODUCTION_SUP:e}), c_eps {:?} increasing={energy_ok}",
            ratios.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>(),
            energies.iter().map(|c| format!("{c:.2}")).collect::<Vec<_>>()
        ),
    )
}

struct Slack {
    name: &'static str,
    min: f64,
}

fn field_battery(modes: &ModeSet<f64>, eps: f64, cut: Vec<usize>, seed: u64, out: &mut Vec<Slack>) {
    let space = FockSpace::new(modes.clone(), eps, cut.clone()).unwrap();
    let dim = space.full_dim().unwrap();
    let omega: Vec<f64> = modes.modes().iter().map(|m| m.omega).collect();
    let energy = field_energy_operator(&space).unwrap();
    let number = dgamma(&space, &vec![1.0; modes.len()]).unwrap();
    let mut r = rng(seed);
    let (mut nelson, mut ccr, mut form) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for _ in 0..INEQUALITY_SAMPLES {
        let x = [r.random_range(-5.0..5.0)];
        let g = modes.coupling_profile(&x);
        let psi = normalized(gaussian_vector(&mut r, dim));
        let a = annihilation_field(&space, &g).unwrap();
        let lhs = norm(&a.matvec(&psi));
        let wg: f64 = g.iter().zip(&omega).map(|(c, w)| c.norm_sqr() / w).sum::<f64>().sqrt();
        let rhs = wg * energy.expectation(&psi).re.sqrt();
        nelson = nelson.min(rhs - lhs);

        let below: Vec<C64> = psi
            .iter()
            .enumerate()
            .map(|(i, c)| if space.occupations(i).iter().zip(&cut).all(|(m, k)| m < k) { *c } else { cz(0.0, 0.0) })
            .collect();
        let below = normalized(below);
        let ad = creation_field(&space, &g).unwrap();
        let gn: f64 = g.iter().map(|c| c.norm_sqr()).sum();
        let resid = norm_sq(&ad.matvec(&below)) - norm_sq(&a.matvec(&below)) - eps * gn;
        ccr = ccr.min(1e-10 - resid.abs());

        if eps <= 1.0 {
            let field = interaction_at(&space, &x).unwrap();
            let lhs = field.expectation(&psi).norm();
            let quarter: f64 = number
                .diagonal_entries()
                .iter()
                .zip(&psi)
                .map(|(d, c)| (d.re + 1.0).sqrt() * c.norm_sqr())
                .sum();
            form = form.min(2.0 * gn.sqrt() * quarter - lhs);
        }
    }
    out.push(Slack { name: "nelson", min: nelson });
    out.push(Slack { name: "ccr-norm", min: ccr });
    if form.is_finite() {
        out.push(Slack { name: "form", min: form });
    }
}

fn c7_inequalities() -> Outcome {
    let mut slacks = Vec::new();
    field_battery(&massive_modes(), 0.5, vec![5, 4], 701, &mut slacks);
    let small_polaron = ModeSet::polaron(2, 2.0, 2).unwrap();
    field_battery(&small_polaron, 0.5, vec![3, 3, 3, 3], 702, &mut slacks);

    let modes = ModeSet::polaron(2, 3.0, 6).unwrap();
    let grid = SpatialGrid::new(2, std::f64::consts::PI, 16, Boundary::Periodic).unwrap();
    let free = ParticleModel::external(grid.clone(), 1, &vec![0.0; grid.len()], PotentialSplit::PositivePart).unwrap();
    let lap = assemble_h0(&free).unwrap();
    let kmax = modes.modes().iter().map(|m| f64::hypot(m.k[0], m.k[1])).fold(0.0, f64::max);
    let kmin = modes.modes().iter().map(|m| f64::hypot(m.k[0], m.k[1])).fold(f64::INFINITY, f64::min);
    let mut r = rng(703);
    let (mut low, mut high) = (f64::INFINITY, f64::INFINITY);
    for s in 0..INEQUALITY_SAMPLES {
        let scale = r.random_range(0.05..2.0);
        let z: Vec<C64> = (0..modes.len()).map(|_| uniform_complex(&mut r, scale)).collect();
        let rho = r.random_range(kmin..kmax);
        let split = polaron_split(&z, rho, &modes, &grid).unwrap();
        let sup = split.low.iter().map(|c| c.norm()).fold(0.0, f64::max);
        low = low.min(split.low_sup_bound(2) - sup);

        let psi = if s % 2 == 0 {
            normalized(gaussian_vector(&mut r, grid.len()))
        } else {
            let (cx, cy, wdt) = (r.random_range(-2.0..2.0), r.random_range(-2.0..2.0), r.random_range(0.4..1.5));
            let (px, py) = (r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
            normalized(
                (0..grid.len())
                    .map(|i| {
                        let p = grid.point(i);
                        let rr = (p[0] - cx).powi(2) + (p[1] - cy).powi(2);
                        C64::from_polar((-rr / (2.0 * wdt * wdt)).exp(), px * p[0] + py * p[1])
                    })
                    .collect(),
            )
        };
        let alpha = r.random_range(0.05..2.0);
        let kinetic = lap.expectation(&psi).re;
        let w_high = split
            .high
            .iter()
            .zip(&psi)
            .fold(cz(0.0, 0.0), |acc, (w, p)| acc + w * p.norm_sqr())
            .norm();
        high = high.min(split.high_form_bound(alpha, kinetic, 1.0) - w_high);
    }
    slacks.push(Slack { name: "bounded-low", min: low });
    slacks.push(Slack { name: "high-form", min: high });
    let ok = slacks.iter().all(|s| s.min >= 0.0);
    check(
        ok,
        format!(
            "{INEQUALITY_SAMPLES} samples each, min slack {}",
            slacks.iter().map(|s| format!("{}={:.2e}", s.name, s.min)).collect::<Vec<_>>().join(" ")
        ),
    )
}

fn c8_solvers() -> Outcome {
    let mut r = rng(801);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let configs: [(usize, usize, usize, Vec<usize>); 4] =
        [(1, 1, 12, vec![4, 3]), (1, 2, 8, vec![2, 1]), (2, 1, 8, vec![2, 1]), (1, 1, 20, vec![5, 2])];
    for (d, n, g, cut) in configs {
        let grid = SpatialGrid::new(d, 3.0, g, Boundary::Dirichlet).unwrap();
        let u = NamedPotential::Harmonic { strength: 0.5 }.sample(&grid);
        let particles = ParticleModel::external(grid.clone(), n, &u, PotentialSplit::PositivePart).unwrap();
        let kcap = std::f64::consts::FRAC_PI_4 / grid.spacing();
        let modes = ModeSet::discrete(
            d,
            (0..cut.len())
                .map(|_| quasiclassical::fock::Mode {
                    k: (0..d).map(|_| r.random_range(-kcap..kcap) / (d as f64).sqrt()).collect(),
                    omega: r.random_range(0.5..2.0),
                    coupling: uniform_complex(&mut r, 0.6),
                })
                .collect(),
        )
        .unwrap();
        let eps = r.random_range(0.2..1.0);
        let spec = HamiltonianSpec::new(particles, FockSpace::new(modes, eps, cut).unwrap()).unwrap();
        let h = assemble_full(&spec).unwrap();
        assert!(h.dim() <= LANCZOS_DENSE_MAX_DIM, "dim {}", h.dim());
        let lz = ground_energy(&h, &LanczosOptions::default()).unwrap();
        worst = worst.max((lz.value - dense_ground(&h)).abs());
        count += 1;
    }

    let particles = harmonic_particle(48);
    let modes = massive_modes();
    let am = alternating_minimization(&particles, &modes, None, &GseOptions::default()).unwrap();
    let grid = particles.grid().clone();
    let axis = |half: f64| -> Vec<f64> {
        (0..BRUTE_FORCE_POINTS)
            .map(|i| -half + 2.0 * half * i as f64 / (BRUTE_FORCE_POINTS - 1) as f64)
            .collect()
    };
    let b1 = axis(modes.modes()[0].coupling.norm() / modes.modes()[0].omega);
    let b2 = axis(modes.modes()[1].coupling.norm() / modes.modes()[1].omega);
    let mut brute = f64::INFINITY;
    for &x1 in &b1 {
        for &x2 in &b2 {
            for &y2 in &b2 {
                let z = vec![cz(x1, 0.0), cz(x2, y2)];
                let v = classical_potential(&ClassicalMeasure::dirac(z.clone()), &grid, &modes).unwrap();
                brute = brute.min(dense_effective_ground(&particles, &v.samples) + modes.field_energy(&z));
            }
        }
    }
    let diff = (am.energy - brute).abs();
    check(
        worst <= LANCZOS_DENSE_ABS && diff <= BRUTE_FORCE_ABS,
        format!(
            "{count} instances, max |Lanczos - dense| {worst:.2e} (tol {LANCZOS_DENSE_ABS:e}); alternating {:.6} vs grid {brute:.6}, diff {diff:.2e} (tol {BRUTE_FORCE_ABS:e})",
            am.energy
        ),
    )
}

fn main() {
    let results = [
        run("C1", "partial-trace identity", PARTIAL_TRACE_SECONDS, c1_partial_trace),
        run("C2", "coherent exactness", COHERENT_SECONDS, c2_coherent_exactness),
        run("C3", "coherent overlap", OVERLAP_SECONDS, c3_overlap),
        run("C4", "mixture convergence", MIXTURE_SECONDS, c4_mixture),
        run("C5", "ground-state energy limit", GSE_SECONDS, c5_gse),
        run("C6", "trap potential", TRAP_SECONDS, c6_trap),
        run("C7", "inequality battery", INEQUALITY_SECONDS, c7_inequalities),
        run("C8", "solver cross-checks", SOLVER_SECONDS, c8_solvers),
    ];
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
