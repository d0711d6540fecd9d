mod common;

use common::tolerances::{BUMP_SECOND_MOMENT_1D, BUMP_SECOND_MOMENT_2D};
use common::*;
use quasiclassical::effective::{
    classical_potential, effective_hamiltonian, effective_operator, mixture_state, mollify, partial_trace_potential,
    polaron_split, trap_coherent_amplitude, ClassicalMeasure, EffectivePotential, Mollifier,
};
use quasiclassical::fock::{adequate_cutoff, coherent_state, FockSpace, ModeSet, ModelFamily};
use quasiclassical::model::{Boundary, HamiltonianSpec, NamedPotential, SpatialGrid};
use quasiclassical::{Error, C64};

#[test]
fn mollified_parabola_shifts_by_second_moment() {
    let grid = SpatialGrid::<f64>::new(1, 4.0, 2048, Boundary::Periodic).unwrap();
    let w = NamedPotential::Harmonic { strength: 1.0 }.sample(&grid);
    for eps in [0.2, 0.1] {
        let f = mollify(&w, &grid, eps, Mollifier::Bump).unwrap();
        for i in 0..grid.len() {
            let x = grid.coordinate(i);
            if x.abs() < 3.0 {
                let want = x * x + eps * eps * BUMP_SECOND_MOMENT_1D;
                assert!((f[i] - want).abs() < 1e-8, "eps {eps} x {x}: {} vs {want}", f[i]);
            }
        }
    }
}

#[test]
fn mollified_paraboloid_in_the_plane() {
    let grid = SpatialGrid::<f64>::new(2, 4.0, 256, Boundary::Periodic).unwrap();
    let w = NamedPotential::Harmonic { strength: 1.0 }.sample(&grid);
    let eps = 0.3;
    let f = mollify(&w, &grid, eps, Mollifier::Bump).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..grid.len() {
        let p = grid.point(i);
        if p[0].abs() < 3.0 && p[1].abs() < 3.0 {
            let want = p[0] * p[0] + p[1] * p[1] + 2.0 * eps * eps * BUMP_SECOND_MOMENT_2D;
            worst = worst.max((f[i] - want).abs());
        }
    }
    assert!(worst < 1e-4, "{worst:e}");
}

#[test]
fn mollified_kink_converges() {
    let grid = SpatialGrid::<f64>::new(1, 4.0, 4096, Boundary::Periodic).unwrap();
    let w: Vec<f64> = (0..grid.len()).map(|i| grid.coordinate(i).abs()).collect();
    let h = grid.spacing();
    let errs: Vec<f64> = [0.2, 0.1, 0.05]
        .iter()
        .map(|&eps| {
            let f = mollify(&w, &grid, eps, Mollifier::Bump).unwrap();
            (0..grid.len())
                .filter(|&i| grid.coordinate(i).abs() <= 1.0)
                .map(|i| (f[i] - w[i]).powi(2) * h)
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    for pair in errs.windows(2) {
        assert!(pair[0] / pair[1] >= 1.8, "{errs:?}");
    }
}

#[test]
fn mollifier_needs_resolution() {
    let grid = SpatialGrid::<f64>::new(1, 4.0, 64, Boundary::Periodic).unwrap();
    let w = vec![1.0; grid.len()];
    assert!(matches!(mollify(&w, &grid, 0.1, Mollifier::Bump), Err(Error::Precondition(_))));
    let f = mollify(&w, &grid, 1.0, Mollifier::Bump).unwrap();
    assert!(f.iter().all(|v| (v - 1.0).abs() < 1e-14));
}

#[test]
fn flat_trap_has_zero_amplitude() {
    let grid = SpatialGrid::<f64>::new(1, 4.0, 128, Boundary::Periodic).unwrap();
    let modes = trap_modes(&grid);
    let tr = trap_coherent_amplitude(&vec![0.0; grid.len()], &grid, 0.4, &modes, Mollifier::Bump).unwrap();
    assert!(tr.amplitudes.iter().all(|z| z.norm() == 0.0));
    assert_eq!(tr.field_energy, 0.0);
}

#[test]
fn trap_outside_mode_set_is_rejected() {
    let grid = SpatialGrid::<f64>::new(1, 4.0, 512, Boundary::Periodic).unwrap();
    let coarse = SpatialGrid::<f64>::new(1, 4.0, 32, Boundary::Periodic).unwrap();
    let modes = ModeSet::fourier_dual(ModelFamily::NelsonCutoff, &coarse, |_| 1.0, |_| C64::new(1.0, 0.0)).unwrap();
    let w: Vec<f64> = (0..grid.len()).map(|i| (6.0 * std::f64::consts::PI * grid.coordinate(i)).cos()).collect();
    assert!(matches!(
        trap_coherent_amplitude(&w, &grid, 0.1, &modes, Mollifier::Bump),
        Err(Error::Unrepresentable(_))
    ));
}

#[test]
fn trap_coherent_state_reproduces_smooth_potential() {
    let grid = SpatialGrid::<f64>::new(1, 4.0, 128, Boundary::Periodic).unwrap();
    let modes = trap_modes(&grid);
    let w: Vec<f64> = (0..grid.len()).map(|i| (std::f64::consts::PI * grid.coordinate(i) / 4.0).cos()).collect();
    let eps = 0.5;
    let tr = trap_coherent_amplitude(&w, &grid, eps, &modes, Mollifier::Bump).unwrap();
    let cut: Vec<usize> = tr.amplitudes.iter().map(|z| adequate_cutoff(z.norm_sqr(), eps, 1e-10)).collect();
    let space = FockSpace::new(modes, eps, cut).unwrap();
    let xi = quasiclassical::fock::coherent_state_with_tolerance(&space, &tr.amplitudes, 1e-10).unwrap();
    let (v, c) = partial_trace_potential(&xi, &grid).unwrap();
    let err = v.samples.iter().zip(&tr.mollified).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 1e-8, "{err:e}");
    assert!((c - tr.field_energy).abs() < 1e-7 * (1.0 + c));
}

#[test]
fn three_atom_mixture_decays() {
    let particles = harmonic_particle(32);
    let grid = particles.grid().clone();
    let modes = massive_modes();
    let mu = ClassicalMeasure::new(vec![
        (0.2, vec![cz(0.5, 0.1), cz(0.2, 0.0)]),
        (0.3, vec![cz(-0.4, 0.2), cz(-0.1, 0.3)]),
        (0.5, vec![cz(0.0, -0.45), cz(0.3, -0.2)]),
    ])
    .unwrap();
    let v_mu = classical_potential(&mu, &grid, &modes).unwrap();
    let mut dists = Vec::new();
    for eps in [0.5, 0.25, 0.125, 0.0625] {
        let cut: Vec<usize> = (0..2)
            .map(|n| {
                let r = mu.points().iter().map(|z| z[n].norm_sqr()).fold(0.0, f64::max);
                adequate_cutoff(r, eps, 1e-10)
            })
            .collect();
        let space = FockSpace::new(modes.clone(), eps, cut).unwrap();
        let psi = mixture_state(&space, &mu).unwrap();
        assert!((psi.norm_sq() - 1.0).abs() < 1e-12);
        let (v, c) = partial_trace_potential(&psi, &grid).unwrap();
        dists.push(v.sup_distance(&v_mu));
        assert!((c - mu.field_energy(&modes)).abs() < 0.1 + eps);
    }
    assert!(dists.windows(2).all(|w| w[1] < w[0]), "{dists:?}");
    assert!(dists[3] < 0.05 * dists[0], "{dists:?}");
}

#[test]
fn coherent_effective_hamiltonian_equals_classical() {
    let particles = harmonic_particle(24);
    let modes = generic_modes();
    let f = vec![cz(0.2, -0.1), cz(0.15, 0.25)];
    let space = FockSpace::new(modes.clone(), 0.25, vec![14, 14]).unwrap();
    let spec = HamiltonianSpec::new(particles.clone(), space.clone()).unwrap();
    let xi = coherent_state(&space, &f).unwrap();
    let (h, c) = effective_hamiltonian(&spec, &xi).unwrap();
    let v = classical_potential(&ClassicalMeasure::dirac(f.clone()), particles.grid(), &modes).unwrap();
    let hc = effective_operator(&particles, &v.samples).unwrap();
    let diff = h.add(&hc.scaled(cz(-1.0, 0.0))).unwrap();
    assert!(diff.triplets().all(|(_, _, x)| x.norm() < 1e-8));
    assert!((c - modes.field_energy(&f)).abs() < 1e-8);
}

#[test]
fn measure_file_round_trip() {
    let mu = ClassicalMeasure::new(vec![
        (0.25, vec![cz(0.1, -0.2), cz(1.0 / 3.0, 0.0)]),
        (0.75, vec![cz(-0.3, 0.7), cz(0.0, 1e-9)]),
    ])
    .unwrap();
    let mut buf = Vec::new();
    mu.write(&mut buf).unwrap();
    let back = ClassicalMeasure::<f64>::read(buf.as_slice()).unwrap();
    assert_eq!(back, mu);
    assert!(ClassicalMeasure::<f64>::read("0.5; 1:0\n".as_bytes()).is_err());
    assert!(ClassicalMeasure::<f64>::read("1.0; 1,0\n".as_bytes()).is_err());
}

#[test]
fn potential_csv_layout() {
    let grid = SpatialGrid::<f64>::new(2, 1.0, 9, Boundary::Dirichlet).unwrap();
    let v = EffectivePotential::new(grid, vec![0.5; 81], "const").unwrap();
    let mut buf = Vec::new();
    v.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,y,V"));
    assert_eq!(lines.next(), Some("-8.000000000000e-1,-8.000000000000e-1,5.000000000000e-1"));
    assert_eq!(text.lines().count(), 82);
}

#[test]
fn polaron_high_part_is_a_divergence() {
    let modes = ModeSet::polaron(2, 1.5, 6).unwrap();
    let grid = SpatialGrid::<f64>::new(2, std::f64::consts::PI, 128, Boundary::Periodic).unwrap();
    let mut r = rng(11);
    let z: Vec<C64> = (0..modes.len()).map(|_| uniform_complex(&mut r, 0.5)).collect();
    let split = polaron_split(&z, 0.8, &modes, &grid).unwrap();
    let g = grid.points_per_axis();
    let h = grid.spacing();
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for iy in 1..g - 1 {
        for ix in 1..g - 1 {
            let at = |dx: i64, dy: i64| {
                let x = (ix as i64 + dx).rem_euclid(g as i64) as usize;
                let y = (iy as i64 + dy).rem_euclid(g as i64) as usize;
                x + g * y
            };
            let div = (split.high_gradient[0][at(1, 0)] - split.high_gradient[0][at(-1, 0)]
                + split.high_gradient[1][at(0, 1)]
                - split.high_gradient[1][at(0, -1)])
                / (2.0 * h);
            worst = worst.max((div - split.high[at(0, 0)]).norm());
            scale = scale.max(split.high[at(0, 0)].norm());
        }
    }
    assert!(worst < 1e-2 * scale, "{worst:e} vs {scale:e}");
    let full = classical_total(&z, &modes, &grid);
    for i in 0..grid.len() {
        assert!((split.low[i] + split.high[i] - full[i]).norm() < 1e-12);
    }
    assert!(polaron_split(&z, 0.01, &modes, &grid).is_err());
}

fn classical_total(z: &[C64], modes: &ModeSet<f64>, grid: &SpatialGrid<f64>) -> Vec<C64> {
    let norm = 1.0 / (2.0 * std::f64::consts::PI);
    (0..grid.len())
        .map(|i| {
            let x = grid.point(i);
            modes
                .modes()
                .iter()
                .zip(z)
                .map(|(m, zn)| m.coupling * zn * C64::from_polar(norm, m.k[0] * x[0] + m.k[1] * x[1]))
                .sum()
        })
        .collect()
}
