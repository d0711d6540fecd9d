use std::collections::BTreeMap;
use std::path::Path;

use quasiclassical::effective::{
    classical_potential, effective_operator, mixture_state, partial_trace_potential, polaron_split,
    trap_coherent_amplitude, Mollifier,
};
use quasiclassical::fock::{
    adequate_cutoff, annihilation, annihilation_field, coherent_overlap, coherent_state, coherent_state_with_tolerance,
    creation, creation_field, dgamma, field_energy_operator, interaction_at, overlap, FockSpace, FockState,
    ModelFamily, ModeSet,
};
use quasiclassical::model::{assemble_h0, coupling_floor, ParticleModel, PotentialSplit};
use quasiclassical::scalar::{norm, norm_sq};
use quasiclassical::spectral::{
    default_probes, default_shift, ground_energy, lowest_eigenpair, minimize_gse, random_unit_vector,
    resolvent_distance, GseOptions, LanczosOptions,
};
use quasiclassical::{Fock, Measure, Modes, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ExperimentConfig, StateKind};
use crate::plot::LinePlot;
use crate::report::{write_csv, Assertion, RunReport};
use crate::HarnessError;

fn lanczos(cfg: &ExperimentConfig) -> LanczosOptions {
    LanczosOptions {
        tol: cfg.run.lanczos_tolerance,
        max_matvecs: cfg.run.max_matvecs,
        seed: cfg.run.seed,
        ..LanczosOptions::default()
    }
}

fn metrics(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn fmt_list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

/// Least-squares slope of `y` against `x`.
pub fn fitted_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn nonincreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0] + 1e-10 * (1.0 + w[0].abs()))
}

fn field_state(cfg: &ExperimentConfig, space: &Fock, mu: &Measure) -> Result<FockState<f64>, HarnessError> {
    Ok(match cfg.state.kind {
        StateKind::Vacuum => FockState::vacuum(space.clone()),
        StateKind::Number => FockState::number_state(space.clone(), &cfg.state.occupations)?,
        _ => mixture_state(space, mu)?,
    })
}

pub fn cmd_effective(cfg: &ExperimentConfig, out: &Path) -> Result<RunReport, HarnessError> {
    let particles = cfg.particles()?;
    let modes = cfg.modes()?;
    let mu = cfg.measure(modes.len())?;
    let grid = particles.grid().clone();
    let mut report = RunReport::new("effective", cfg);
    report.tags = cfg.tags(&modes);

    let v_mu = classical_potential(&mu, &grid, &modes)?;
    let limit_path = out.join("potential_limit.csv");
    v_mu.write_csv(std::io::BufWriter::new(std::fs::File::create(&limit_path)?))?;
    report.artifacts.push(limit_path);

    let mut sups = Vec::new();
    let mut energies = Vec::new();
    let mut potentials = Vec::new();
    for (i, &eps) in cfg.sweep.eps.iter().enumerate() {
        let cut = cfg.cutoffs(&mu, eps)?;
        let space = FockSpace::new(modes.clone(), eps, cut)?;
        let state = field_state(cfg, &space, &mu)?;
        let (v, c) = partial_trace_potential(&state, &grid)?;
        let path = out.join(format!("potential_eps{i}.csv"));
        v.write_csv(std::io::BufWriter::new(std::fs::File::create(&path)?))?;
        report.artifacts.push(path);
        sups.push(v.sup_distance(&v_mu));
        energies.push(c);
        potentials.push(v);
    }

    let lo = lanczos(cfg);
    let h0 = assemble_h0(&particles)?;
    let g0 = ground_energy(&h0, &lo)?;
    let probes = default_probes(h0.dim(), cfg.run.seed, Some(&g0.vector));
    let n = particles.n_particles() as f64;
    let sup = potentials.iter().map(|p| p.sup_norm()).fold(v_mu.sup_norm(), f64::max);
    let zeta = default_shift(g0.value - n * sup);
    let h_mu = effective_operator(&particles, &v_mu.samples)?;
    let mut dists = Vec::new();
    for v in &potentials {
        let h = effective_operator(&particles, &v.samples)?;
        dists.push(resolvent_distance(&h, &h_mu, zeta, &probes)?);
    }

    let c_mu = mu.field_energy(&modes);
    let mut rows = Vec::new();
    for (i, &eps) in cfg.sweep.eps.iter().enumerate() {
        rows.push(vec![eps, sups[i], energies[i], c_mu, dists[i]]);
        report.metrics.push(metrics(&[
            ("eps", eps),
            ("sup_distance", sups[i]),
            ("field_energy", energies[i]),
            ("resolvent_distance", dists[i]),
        ]));
    }
    let csv = out.join("effective.csv");
    write_csv(
        &csv,
        &["eps", "sup_distance", "field_energy", "classical_field_energy", "resolvent_distance"],
        &rows,
    )?;
    report.artifacts.push(csv);
    let inv: Vec<f64> = cfg.sweep.eps.iter().map(|e| 1.0 / e).collect();
    let svg = out.join("effective.svg");
    LinePlot::new("distance to the classical limit", "1/eps", "distance", true)
        .with_series("sup |V_eps - V_mu|", inv.iter().copied().zip(sups.iter().copied()).collect())
        .with_series("resolvent distance", inv.iter().copied().zip(dists.iter().copied()).collect())
        .write(&svg)?;
    report.artifacts.push(svg);
    report.summary.insert("zeta".into(), zeta);
    report.summary.insert("classical_field_energy".into(), c_mu);

    let tol = cfg.run.coherent_tolerance;
    if mu.weights().len() == 1 {
        let worst = sups.iter().copied().fold(0.0, f64::max);
        report.assertions.push(Assertion::new(
            "EFF-COHERENT-EXACT",
            worst <= tol,
            format!("max sup gap {worst:.3e} (tol {tol:e})"),
        ));
        let dworst = dists.iter().copied().fold(0.0, f64::max);
        report.assertions.push(Assertion::new(
            "SPEC-RESOLVENT-MONOTONE",
            dworst <= tol || nonincreasing(&dists),
            format!("distances {}", fmt_list(&dists)),
        ));
    } else {
        let d = mu.separation_rate();
        let pts: Vec<(f64, f64)> = inv
            .iter()
            .zip(&sups)
            .filter(|(_, s)| **s > 1e-13)
            .map(|(x, s)| (*x, s.ln()))
            .collect();
        let target = -cfg.run.mixture_slope_fraction * d;
        let (pass, detail) = if pts.len() < 2 {
            (false, "fewer than two ε values above roundoff".to_string())
        } else {
            let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            let s = fitted_slope(&x, &y);
            report.summary.insert("fitted_slope".into(), s);
            report.summary.insert("separation_rate".into(), d);
            (s <= target, format!("slope {s:.4} against 1/ε, need ≤ {target:.4}"))
        };
        report.assertions.push(Assertion::new("EFF-MIXTURE-RATE", pass, detail));
        report.assertions.push(Assertion::new(
            "SPEC-RESOLVENT-MONOTONE",
            dists.windows(2).all(|w| w[1] < w[0]),
            format!("distances {}", fmt_list(&dists)),
        ));
    }
    Ok(report)
}

pub fn cmd_gse(cfg: &ExperimentConfig, out: &Path) -> Result<RunReport, HarnessError> {
    let particles = cfg.particles()?;
    let modes = cfg.modes()?;
    let mut report = RunReport::new("gse", cfg);
    report.tags = cfg.tags(&modes);
    let opts = GseOptions {
        lanczos: lanczos(cfg),
        refine_evaluations: cfg.run.refine_evaluations,
        cutoff_tolerance: cfg.sweep.cutoff_tolerance,
        min_cutoff: cfg.sweep.min_cutoff,
        max_cutoff: cfg.sweep.max_cutoff,
        budget: cfg.run.dimension_budget,
        ..GseOptions::default()
    };
    let res = minimize_gse(&particles, &modes, &cfg.sweep.eps, &opts)?;

    let rows: Vec<Vec<f64>> = res
        .points
        .iter()
        .map(|p| vec![p.eps, p.quantum_energy, p.classical_infimum, p.gap, p.matvecs as f64])
        .collect();
    let csv = out.join("gse.csv");
    write_csv(&csv, &["eps", "quantum_energy", "classical_infimum", "gap", "iterations"], &rows)?;
    report.artifacts.push(csv);
    let mpath = out.join("minimizer.measure");
    res.minimizer.write(std::io::BufWriter::new(std::fs::File::create(&mpath)?))?;
    report.artifacts.push(mpath);
    let svg = out.join("gse.svg");
    LinePlot::new("ground-state energy gap", "eps", "|inf E_cl - E_eps|", true)
        .with_series("gap", res.points.iter().map(|p| (p.eps, p.gap)).collect())
        .write(&svg)?;
    report.artifacts.push(svg);

    for p in &res.points {
        report.metrics.push(metrics(&[
            ("eps", p.eps),
            ("quantum_energy", p.quantum_energy),
            ("trial_energy", p.trial_energy),
            ("gap", p.gap),
            ("dimension", p.dim as f64),
            ("iterations", p.matvecs as f64),
        ]));
    }
    report.summary.insert("classical_infimum".into(), res.classical_infimum);
    report.summary.insert("floor".into(), res.floor);
    report.summary.insert("h0_ground".into(), res.h0_ground);
    report.summary.insert("alternations".into(), res.classical.alternations as f64);

    let n = res.points.len();
    if n >= 2 {
        let (a, b) = (&res.points[n - 2], &res.points[n - 1]);
        if ((a.eps / b.eps) - 2.0).abs() < 1e-12 {
            let extrapolated = 2.0 * b.gap - a.gap;
            let h0 = assemble_h0(&particles)?;
            let e0 = ground_energy(&h0, &opts.lanczos)?;
            let e1 = lowest_eigenpair(&h0, &opts.lanczos, &[e0.vector.clone()])?;
            let rel = extrapolated.abs() / (e1.value - e0.value);
            report.summary.insert("extrapolated_gap".into(), extrapolated);
            report.summary.insert("extrapolated_gap_relative".into(), rel);
            report.notes.push(format!(
                "Richardson gap {extrapolated:.3e} is {rel:.2e} of the H0 spectral gap: {}",
                if rel <= 5e-2 { "consistent with convergence" } else { "not yet converged" }
            ));
        }
    }

    let ub = res.points.iter().all(|p| p.quantum_energy <= p.trial_energy + 1e-9 * (1.0 + p.trial_energy.abs()));
    report.assertions.push(Assertion::new(
        "SPEC-VARIATIONAL-UB",
        ub,
        format!(
            "max E_eps - trial {:.3e}",
            res.points.iter().map(|p| p.quantum_energy - p.trial_energy).fold(f64::NEG_INFINITY, f64::max)
        ),
    ));
    let floor_ok = res.classical_infimum >= res.floor && res.points.iter().all(|p| p.quantum_energy >= res.floor);
    report.assertions.push(Assertion::new(
        "SPEC-LOWER-FLOOR",
        floor_ok,
        format!("floor {:.6e}, lowest quantum energy {:.6e}", res.floor, {
            res.points.iter().map(|p| p.quantum_energy).fold(f64::INFINITY, f64::min)
        }),
    ));
    report.assertions.push(Assertion::new(
        "SPEC-AM-MONOTONE",
        nonincreasing(&res.classical.trace),
        format!("{} half steps", res.classical.trace.len() - 1),
    ));
    Ok(report)
}

pub fn cmd_trap(cfg: &ExperimentConfig, out: &Path) -> Result<RunReport, HarnessError> {
    let trap = cfg
        .trap
        .as_ref()
        .ok_or_else(|| HarnessError::Config("trap experiment needs a [trap] block".into()))?;
    let particles = cfg.particles()?;
    let modes = cfg.modes()?;
    let grid = particles.grid().clone();
    let w = crate::config::sample_potential(&trap.potential, &grid)?;
    let flat = w.iter().all(|v| *v == 0.0);
    let mut report = RunReport::new("trap", cfg);
    report.tags = cfg.tags(&modes);

    let mut amps = Vec::new();
    let mut potentials = Vec::new();
    let mut repro = Vec::new();
    let lim = trap.interior_fraction * grid.half_width();
    for &eps in &cfg.sweep.eps {
        let tr = trap_coherent_amplitude(&w, &grid, eps, &modes, Mollifier::Bump)?;
        let tol = cfg.sweep.cutoff_tolerance;
        let mut cut = Vec::with_capacity(modes.len());
        for (k, z) in tr.amplitudes.iter().enumerate() {
            let c = adequate_cutoff(z.norm_sqr(), eps, tol).max(cfg.sweep.min_cutoff);
            if c > cfg.sweep.max_cutoff {
                return Err(quasiclassical::Error::CutoffTooSmall {
                    mode: k,
                    cutoff: cfg.sweep.max_cutoff,
                    required: c,
                }
                .into());
            }
            cut.push(c);
        }
        let space = FockSpace::new(modes.clone(), eps, cut)?;
        let xi = coherent_state_with_tolerance(&space, &tr.amplitudes, tol)?;
        let (v, c) = partial_trace_potential(&xi, &grid)?;
        let err = (0..grid.len())
            .filter(|&i| grid.point(i).iter().all(|x| x.abs() <= lim))
            .map(|i| (v.samples[i] - tr.mollified[i]).abs())
            .fold(0.0, f64::max);
        repro.push(err);
        potentials.push((v, c));
        amps.push(tr);
    }

    let lo = lanczos(cfg);
    let h0 = assemble_h0(&particles)?;
    let g0 = ground_energy(&h0, &lo)?;
    let probes = default_probes(h0.dim(), cfg.run.seed, Some(&g0.vector));
    let n = particles.n_particles() as f64;
    let vmin = potentials
        .iter()
        .flat_map(|(v, _)| v.samples.iter().copied())
        .chain(w.iter().copied())
        .fold(0.0, f64::min);
    let zeta = default_shift(g0.value + n * vmin);
    let h_trap = effective_operator(&particles, &w)?;
    let mut dists = Vec::new();
    for (v, _) in &potentials {
        let h = effective_operator(&particles, &v.samples)?;
        dists.push(resolvent_distance(&h, &h_trap, zeta, &probes)?);
    }

    let energies: Vec<f64> = potentials.iter().map(|(_, c)| *c).collect();
    let mut rows = Vec::new();
    for (i, &eps) in cfg.sweep.eps.iter().enumerate() {
        rows.push(vec![eps, dists[i], energies[i], amps[i].norm_sq, repro[i], amps[i].uncovered_fraction]);
        report.metrics.push(metrics(&[
            ("eps", eps),
            ("resolvent_distance", dists[i]),
            ("field_energy", energies[i]),
            ("norm_sq", amps[i].norm_sq),
            ("reproduction_error", repro[i]),
        ]));
    }
    let csv = out.join("trap.csv");
    write_csv(
        &csv,
        &["eps", "resolvent_distance", "field_energy", "norm_sq", "reproduction_error", "uncovered_fraction"],
        &rows,
    )?;
    report.artifacts.push(csv);
    let svg = out.join("trap.svg");
    LinePlot::new("trap limit", "eps", "value", true)
        .with_series("resolvent distance", cfg.sweep.eps.iter().copied().zip(dists.iter().copied()).collect())
        .with_series("field energy", cfg.sweep.eps.iter().copied().zip(energies.iter().copied()).collect())
        .write(&svg)?;
    report.artifacts.push(svg);
    report.summary.insert("zeta".into(), zeta);

    let worst = repro.iter().copied().fold(0.0, f64::max);
    report.assertions.push(Assertion::new(
        "TRAP-REPRODUCTION",
        worst <= trap.reproduction_tolerance,
        format!("max interior error {worst:.3e} (tol {:e})", trap.reproduction_tolerance),
    ));
    let (e_ok, d_ok) = if flat {
        (
            energies.iter().all(|c| c.abs() <= 1e-12),
            dists.iter().all(|d| *d <= 1e-12),
        )
    } else {
        (
            energies.windows(2).all(|p| p[1] > p[0]),
            dists.windows(2).all(|p| p[1] < p[0]),
        )
    };
    report.assertions.push(Assertion::new(
        "TRAP-FIELD-ENERGY",
        e_ok,
        format!("c_eps {}", fmt_list(&energies)),
    ));
    report.assertions.push(Assertion::new(
        "TRAP-RESOLVENT-DECREASE",
        d_ok,
        format!("distances {}", fmt_list(&dists)),
    ));
    Ok(report)
}

/// Worst slack of one invariant over all samples and ε values.
struct Battery {
    rows: Vec<(String, f64, usize, f64)>,
}

impl Battery {
    fn record(&mut self, id: &str, eps: f64, samples: usize, slack: f64) {
        self.rows.push((id.to_string(), eps, samples, slack));
    }

    fn assertions(&self, report: &mut RunReport) {
        let mut ids: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !ids.contains(&r.0.as_str()) {
                ids.push(&r.0);
            }
        }
        for id in ids {
            let worst = self.rows.iter().filter(|r| r.0 == id).map(|r| r.3).fold(f64::INFINITY, f64::min);
            let n: usize = self.rows.iter().filter(|r| r.0 == id).map(|r| r.2).sum();
            report
                .assertions
                .push(Assertion::new(id, worst >= 0.0, format!("{n} samples, min slack {worst:.3e}")));
        }
    }
}

fn below_cutoff(space: &Fock, psi: &[C64]) -> Vec<C64> {
    let v: Vec<C64> = psi
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let occ = space.occupations(i);
            if occ.iter().zip(space.cutoffs()).all(|(m, k)| m < k) {
                *c
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .collect();
    let n = norm(&v);
    v.into_iter().map(|c| c / n).collect()
}

/// At most this many modes enter the random Fock-state checks.
const CHECK_MODES: usize = 3;

fn check_subset(modes: &Modes) -> Result<Modes, HarnessError> {
    let m = modes.len().min(CHECK_MODES);
    Ok(ModeSet::with_family(modes.dim(), modes.family(), modes.modes()[..m].to_vec(), modes.cell_volume())?)
}

pub fn cmd_check(cfg: &ExperimentConfig, out: &Path) -> Result<RunReport, HarnessError> {
    let particles = cfg.particles()?;
    let modes = cfg.modes()?;
    let grid = particles.grid().clone();
    let mut report = RunReport::new("check", cfg);
    report.tags = cfg.tags(&modes);
    let samples = cfg.run.check_samples;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
    let mut bat = Battery { rows: Vec::new() };
    let sub = check_subset(&modes)?;
    if sub.len() < modes.len() {
        report
            .notes
            .push(format!("random Fock-state checks use the first {} of {} modes", sub.len(), modes.len()));
    }
    let lo = lanczos(cfg);
    let h0 = assemble_h0(&particles)?;
    let h0_ground = ground_energy(&h0, &lo)?.value;
    let floor = if modes.is_massive() {
        Some(h0_ground - coupling_floor(&modes, particles.n_particles())?)
    } else {
        None
    };
    let omega: Vec<f64> = sub.modes().iter().map(|m| m.omega).collect();
    let site = |rng: &mut ChaCha8Rng| grid.point(rng.random_range(0..grid.len()));

    for (ie, &eps) in cfg.sweep.eps.iter().enumerate() {
        let space = FockSpace::uniform(sub.clone(), eps, cfg.run.check_cutoff)?;
        let dim = space.full_dim()?;
        if dim > cfg.run.dimension_budget {
            return Err(quasiclassical::Error::Resource {
                dim,
                budget: cfg.run.dimension_budget,
            }
            .into());
        }
        let number_op = dgamma(&space, &vec![1.0; sub.len()])?;
        let energy_op = field_energy_operator(&space)?;
        let ladders: Vec<_> = (0..sub.len())
            .map(|n| Ok((annihilation(&space, n)?, creation(&space, n)?)))
            .collect::<Result<_, HarnessError>>()?;
        let (mut ccr, mut ident, mut nelson, mut form) = (f64::INFINITY, f64::INFINITY, f64::INFINITY, f64::INFINITY);
        for s in 0..samples {
            let seed = cfg.run.seed ^ ((ie as u64) << 40) ^ (s as u64).wrapping_mul(0x9e37_79b9);
            let psi = random_unit_vector::<f64>(dim, seed);
            let low = below_cutoff(&space, &psi);
            for (a, ad) in &ladders {
                let r = norm_sq(&ad.matvec(&low)) - norm_sq(&a.matvec(&low)) - eps;
                ccr = ccr.min(1e-10 - r.abs());
            }
            let x = site(&mut rng);
            let g = sub.coupling_profile(&x);
            let gn: f64 = g.iter().map(|c| c.norm_sqr()).sum();
            let a = annihilation_field(&space, &g)?;
            let ad = creation_field(&space, &g)?;
            let r = norm_sq(&ad.matvec(&low)) - norm_sq(&a.matvec(&low)) - eps * gn;
            ident = ident.min(1e-10 - r.abs());
            if omega.iter().all(|w| *w > 0.0) {
                let wg: f64 = g.iter().zip(&omega).map(|(c, w)| c.norm_sqr() / w).sum::<f64>().sqrt();
                let rhs = wg * energy_op.expectation(&psi).re.max(0.0).sqrt();
                nelson = nelson.min(rhs - norm(&a.matvec(&psi)) + 1e-12);
            }
            if eps <= 1.0 {
                let field = interaction_at(&space, &x)?;
                let lhs = field.expectation(&psi).norm();
                let quarter: f64 = number_op
                    .diagonal_entries()
                    .iter()
                    .zip(&psi)
                    .map(|(d, c)| (d.re + 1.0).sqrt() * c.norm_sqr())
                    .sum();
                form = form.min(2.0 * gn.sqrt() * quarter - lhs + 1e-12);
            }
        }
        bat.record("FOCK-CCR", eps, samples, ccr);
        bat.record("FOCK-NORM-IDENTITY", eps, samples, ident);
        if nelson.is_finite() {
            bat.record("FOCK-EST-NELSON", eps, samples, nelson);
        }
        if form.is_finite() {
            bat.record("FOCK-FORM-BOUND", eps, samples, form);
        }

        let coherent_samples = samples.min(20);
        let (mut disp, mut ovl) = (f64::INFINITY, f64::INFINITY);
        for _ in 0..coherent_samples {
            let f1: Vec<C64> = (0..modes.len())
                .map(|_| C64::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)))
                .collect();
            let f2: Vec<C64> = (0..modes.len())
                .map(|_| C64::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)))
                .collect();
            let cut: Vec<usize> = f1
                .iter()
                .zip(&f2)
                .map(|(a, b)| adequate_cutoff(a.norm_sqr().max(b.norm_sqr()), eps, 1e-14))
                .collect();
            let cs = FockSpace::new(modes.clone(), eps, cut)?;
            let x1 = coherent_state(&cs, &f1)?;
            let x2 = coherent_state(&cs, &f2)?;
            for (n, f) in f1.iter().enumerate() {
                disp = disp.min(1e-8 - (x1.mean_annihilation(n)? - f).norm());
            }
            let num = overlap(&x1, &x2)?;
            ovl = ovl.min(1e-8 - (num - coherent_overlap(&f1, &f2, eps)).norm());
        }
        bat.record("FOCK-DISPLACEMENT", eps, coherent_samples, disp);
        bat.record("FOCK-OVERLAP", eps, coherent_samples, ovl);

        if let Some(floor) = floor {
            if sub.len() == modes.len() {
                let mut worst = f64::INFINITY;
                for s in 0..samples {
                    let field = random_unit_vector::<f64>(dim, cfg.run.seed.wrapping_add(0x51ed + s as u64));
                    let state = FockState::from_coeffs(space.clone(), field)?;
                    let (v, c) = partial_trace_potential(&state, &grid)?;
                    let psi = random_unit_vector::<f64>(particles.config_len(), cfg.run.seed.wrapping_add(s as u64));
                    let e = effective_operator(&particles, &v.samples)?.expectation(&psi).re + c;
                    worst = worst.min(e - floor);
                }
                bat.record("SPEC-LOWER-FLOOR", eps, samples, worst);
            }
        }
    }

    if modes.family() == ModelFamily::Polaron {
        polaron_battery(cfg, &particles, &modes, &mut rng, &mut bat)?;
    }

    let mut lines = vec!["invariant,eps,samples,min_slack,passed".to_string()];
    for (id, eps, n, slack) in &bat.rows {
        lines.push(format!("{id},{eps:.12e},{n},{slack:.12e},{}", *slack >= 0.0));
    }
    let csv = out.join("check.csv");
    std::fs::write(&csv, lines.join("\n") + "\n")?;
    report.artifacts.push(csv);
    bat.assertions(&mut report);
    Ok(report)
}

fn polaron_battery(
    cfg: &ExperimentConfig,
    particles: &ParticleModel<f64>,
    modes: &Modes,
    rng: &mut ChaCha8Rng,
    bat: &mut Battery,
) -> Result<(), HarnessError> {
    let grid = particles.grid().clone();
    let free = ParticleModel::external(grid.clone(), 1, &vec![0.0; grid.len()], PotentialSplit::PositivePart)?;
    let lap = assemble_h0(&free)?;
    let kabs = |k: &[f64]| k.iter().map(|c| c * c).sum::<f64>().sqrt();
    let kmin = modes.modes().iter().map(|m| kabs(&m.k)).fold(f64::INFINITY, f64::min);
    let kmax = modes.modes().iter().map(|m| kabs(&m.k)).fold(0.0, f64::max);
    let samples = cfg.run.check_samples;
    let (mut low, mut high) = (f64::INFINITY, f64::INFINITY);
    for s in 0..samples {
        let scale = rng.random_range(0.05..2.0);
        let z: Vec<C64> = (0..modes.len())
            .map(|_| C64::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale)))
            .collect();
        let rho = if kmax > kmin { rng.random_range(kmin..kmax) } else { kmin };
        let split = polaron_split(&z, rho, modes, &grid)?;
        let sup = split.low.iter().map(|c| c.norm()).fold(0.0, f64::max);
        low = low.min(split.low_sup_bound(grid.dim()) - sup + 1e-12);
        let psi = random_unit_vector::<f64>(grid.len(), cfg.run.seed.wrapping_add(0xa11ce + s as u64));
        let alpha = rng.random_range(0.05..2.0);
        let t = lap.expectation(&psi).re;
        let w = split
            .high
            .iter()
            .zip(&psi)
            .fold(C64::new(0.0, 0.0), |acc, (h, p)| acc + h * p.norm_sqr())
            .norm();
        high = high.min(split.high_form_bound(alpha, t, 1.0) - w + 1e-12);
    }
    bat.record("POL-BOUNDED-PART", 0.0, samples, low);
    bat.record("POL-FORM-BOUND", 0.0, samples, high);
    Ok(())
}
