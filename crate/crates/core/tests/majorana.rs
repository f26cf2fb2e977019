use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use ndarray::Array2;
use proptest::prelude::*;
use tempent_core::majorana::*;
use tempent_core::model::{self, EdgeKind, ModelParams};

fn p(j: f64, g: f64) -> ModelParams {
    ModelParams::integrable(j, g).unwrap()
}

// one point per phase plus a generic trivial one
fn phase_points() -> Vec<ModelParams> {
    vec![p(0.31, 0.5), p(FRAC_PI_4, 0.31), p(FRAC_PI_4, FRAC_PI_2 - 0.31), p(1.2, 1.1)]
}

#[test]
fn powers_stay_orthogonal() {
    let m = build_majorana_map(20, &p(0.31, 0.5)).unwrap();
    let o = m.matrix();
    let mut pw = Array2::<f64>::eye(40);
    for _ in 0..300 {
        pw = pw.dot(o);
    }
    let r = pw.t().dot(&pw) - Array2::<f64>::eye(40);
    assert!(r.iter().all(|x| x.abs() < 1e-10));
}

#[test]
fn light_cone_exactness() {
    for pp in phase_points() {
        let tau_max = 120;
        let a = boundary_autocorrelation(&pp, tau_max + 2, tau_max).unwrap();
        let b = boundary_autocorrelation(&pp, 2 * tau_max, tau_max).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-13);
        }
    }
}

#[test]
fn mode_sum_identity() {
    for pp in phase_points() {
        let tau_max = 300;
        let k = kappa_exact(&pp, tau_max).unwrap();
        let dec = diagonalize_map(&build_majorana_map(tau_max + 2, &pp).unwrap()).unwrap();
        assert!((dec.total_weight() - 1.0).abs() < 1e-10);
        for tau in 0..=tau_max {
            let ms = k.prefactor * dec.mode_sum(tau);
            assert!((ms - k.values[tau]).abs() < 1e-10, "{pp:?} tau {tau}: {ms} vs {}", k.values[tau]);
        }
    }
}

#[test]
fn kappa_bounded_and_normalized() {
    for pp in phase_points() {
        let k = kappa_exact(&pp, 200).unwrap();
        assert!((k.values[0] - 2.0 * pp.j.tan().powi(2)).abs() < 1e-13);
        assert!(k.values.iter().all(|v| v.abs() <= k.values[0] + 1e-12));
    }
}

#[test]
fn self_dual_spectrum_is_linear() {
    let dec = diagonalize_map(&build_majorana_map(100, &p(FRAC_PI_4, FRAC_PI_4)).unwrap()).unwrap();
    let mut q: Vec<f64> = dec.modes.iter().filter(|m| m.weight > 1e-12).map(|m| m.quasienergy).collect();
    q.sort_by(f64::total_cmp);
    let gaps: Vec<f64> = q.windows(2).map(|w| w[1] - w[0]).collect();
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    assert!(gaps.iter().all(|g| (g - mean).abs() < 1e-9));
    assert!(q[0] > 0.0 && *q.last().unwrap() < PI);
}

#[test]
fn zero_mode_decay_ratio() {
    let pp = p(FRAC_PI_4, 0.31);
    let map = build_majorana_map(200, &pp).unwrap();
    let dec = diagonalize_map(&map).unwrap();
    let zero: Vec<usize> = (0..dec.modes.len()).filter(|&i| dec.modes[i].quasienergy < 1e-8).collect();
    assert_eq!(zero.len(), 1);
    // project e_0 onto the zero-mode subspace to isolate the left edge mode
    let q = dec.subspace(zero[0]);
    let v = q.dot(&q.row(0).t());
    let lam = 0.31f64.tan();
    for j in 1..6 {
        let a = (v[2 * j].powi(2) + v[2 * j + 1].powi(2)).sqrt();
        let b = (v[2 * j + 2].powi(2) + v[2 * j + 3].powi(2)).sqrt();
        assert!((b / a - lam).abs() < 1e-8);
    }
}

#[test]
fn edge_weights_closed_form_vs_finite_chain() {
    let cases = [
        (p(FRAC_PI_4, 0.31), EdgeKind::Zero),
        (p(1.2, 1.1), EdgeKind::Zero),
        (p(1.2, 1.1), EdgeKind::Pi),
        (p(1.0, 0.2), EdgeKind::Zero),
        (p(FRAC_PI_4, FRAC_PI_2 - 0.31), EdgeKind::Pi),
        (p(1.5, 1.4), EdgeKind::Pi),
        (p(0.9, 0.6), EdgeKind::Zero),
    ];
    for (pp, kind) in cases {
        let mode = model::edge_modes(&pp).unwrap().into_iter().find(|m| m.kind == kind).unwrap();
        let closed = edge_weight(&pp, &mode).unwrap();
        // finite-chain value, doubled until converged
        let mut l = 32;
        let mut prev = edge_weight_finite(&pp, kind, l).unwrap();
        loop {
            l *= 2;
            let next = edge_weight_finite(&pp, kind, l).unwrap();
            if (next - prev).abs() < 1e-10 || l > 512 {
                prev = next;
                break;
            }
            prev = next;
        }
        assert!((closed - prev).abs() < 1e-8, "{pp:?} {kind:?}: {closed} vs {prev}");
    }
    let mode = model::edge_modes(&p(FRAC_PI_4, 0.31)).unwrap()[0];
    assert!((edge_weight(&p(FRAC_PI_4, 0.31), &mode).unwrap() - 0.81388).abs() < 1e-5);
}

#[test]
fn perfectly_localized_edges() {
    // g = 0: a_0 is conserved, all weight in the zero mode
    let k = kappa_exact(&p(0.7, 0.0), 10).unwrap();
    assert!((k.edge_zero_sq - 1.0).abs() < 1e-12);
    assert!(k.values.iter().all(|v| (v - k.prefactor).abs() < 1e-12));
}

#[test]
fn weight_sum_rule_with_continuum() {
    for pp in phase_points() {
        let b = model::Bloch::new(pp).unwrap();
        let (cont, _) = tempent_core::quad::integrate(|k| b.point(k).unwrap().c.norm_sqr(), 0.0, PI, 1e-12, 1e-14, 2000).unwrap();
        let k = kappa_exact(&pp, 1).unwrap();
        let total = cont / PI + k.edge_zero_sq + k.edge_pi_sq;
        assert!((total - 1.0).abs() < 1e-9, "{pp:?}: {total}");
    }
}

#[test]
fn boundary_coefficient_matches_finite_chain_density() {
    let pp = p(0.31, FRAC_PI_4);
    let dec = diagonalize_map(&build_majorana_map(800, &pp).unwrap()).unwrap();
    let mut modes: Vec<(f64, f64)> = dec.modes.iter().map(|m| (m.quasienergy, m.weight)).collect();
    modes.sort_by(|a, b| a.0.total_cmp(&b.0));
    // momentum from the dispersion, k increasing with φ in the trivial phase
    let (s2j, c2j) = (2.0 * pp.j).sin_cos();
    let (s2g, c2g) = (2.0 * pp.g).sin_cos();
    let k_of = |phi: f64| ((phi.cos() - c2j * c2g) / (s2j * s2g)).clamp(-1.0, 1.0).acos();
    let target = model::dispersion(&pp, 0.5).unwrap();
    let i = (1..modes.len() - 1).min_by(|&a, &b| (modes[a].0 - target).abs().total_cmp(&(modes[b].0 - target).abs())).unwrap();
    let dk = 0.5 * (k_of(modes[i + 1].0) - k_of(modes[i - 1].0)).abs();
    let km = k_of(modes[i].0);
    let c2 = model::boundary_coefficient(&pp, km).unwrap().norm_sqr();
    assert!((modes[i].1 * PI / dk - c2).abs() < 1e-4, "{} vs {c2}", modes[i].1 * PI / dk);
}

#[test]
fn quadrature_agrees_with_light_cone() {
    let pp = p(0.31, 0.5);
    let k = kappa_exact(&pp, 100).unwrap();
    assert!((kappa_quadrature(&pp, 17).unwrap() - k.values[17]).abs() < 1e-6);
    for pp in phase_points() {
        let k = kappa_exact(&pp, 100).unwrap();
        for tau in (0..=100).step_by(7) {
            let q = kappa_quadrature(&pp, tau).unwrap();
            assert!((q - k.values[tau]).abs() < 1e-6, "{pp:?} tau {tau}: {q} vs {}", k.values[tau]);
        }
    }
    assert!(kappa_quadrature(&p(FRAC_PI_4, FRAC_PI_4), 3).unwrap().abs() < 1e-8);
    assert!((kappa_quadrature(&p(0.31, FRAC_PI_4), 0).unwrap() - 2.0 * 0.31f64.tan().powi(2)).abs() < 1e-8);
    let crit = p(0.31, 0.31);
    let q = kappa_quadrature(&crit, 9).unwrap();
    assert!((q - kappa_exact(&crit, 9).unwrap().values[9]).abs() < 1e-6);
}

#[test]
fn tail_exponent_trivial_phase() {
    let k = kappa_exact(&p(0.31, FRAC_PI_4), 200).unwrap();
    let slope = tail_exponent(&k.values, 20, 200).unwrap();
    assert!((slope + 1.5).abs() < 0.1, "slope {slope}");
}

#[test]
fn zero_mode_kernel_plateau() {
    let pp = p(FRAC_PI_4, 0.31);
    let k = kappa_exact(&pp, 400).unwrap();
    let c = k.continuum();
    assert!(k.edge_zero_sq > 0.5 && k.edge_pi_sq == 0.0);
    assert!(c[300..].iter().all(|x| x.abs() < 1e-2 * k.values[0]));
    assert!(c[300..].iter().map(|x| x.abs()).fold(0.0, f64::max) < c[20..40].iter().map(|x| x.abs()).fold(0.0, f64::max));
}

#[test]
fn pi_mode_alternation() {
    let pp = p(FRAC_PI_4, FRAC_PI_2 - 0.31);
    let k = kappa_exact(&pp, 400).unwrap();
    assert!(k.edge_pi_sq > 0.5 && k.edge_zero_sq == 0.0);
    for t in 200..400 {
        assert!(k.values[t] * k.values[t + 1] < 0.0);
    }
}

#[test]
fn spectral_density_dephaser_flat() {
    let sd = spectral_density_with_window(&p(FRAC_PI_4, FRAC_PI_4), 256, 1024).unwrap();
    assert!(sd.jr.iter().all(|x| (x - 2.0).abs() < 1e-10));
    assert!(sd.ji.iter().all(|x| x.abs() < 1e-10));
}

#[test]
fn spectral_density_support_and_sign() {
    let pp = p(0.31, FRAC_PI_4);
    let sd = spectral_density(&pp, 1024).unwrap();
    assert_eq!(sd.window, 8192);
    assert!(sd.leakage < 1e-4, "leakage {}", sd.leakage);
    assert!(sd.warnings.is_empty());
    let bands = model::band_edges(&pp);
    for (om, jr) in sd.omega.iter().zip(&sd.jr) {
        if bands.iter().any(|&(lo, hi)| (lo..=hi).contains(om)) {
            assert!(*jr > -1e-6, "JR({om}) = {jr}");
        }
    }
    assert_eq!(sd.delta_zero, 0.0);
}

#[test]
fn spectral_density_sqrt_edges() {
    let pp = p(0.31, 0.5);
    let sd = spectral_density(&pp, 16384).unwrap();
    let lo = 2.0 * (0.5 - 0.31);
    let hi = 2.0 * (0.5 + 0.31);
    for (edge, dir) in [(lo, 1.0), (hi, -1.0), (-lo, -1.0), (-hi, 1.0)] {
        let e = band_edge_exponent(&sd, edge, dir, 0.002, 0.01).unwrap();
        assert!((e - 0.5).abs() < 0.05, "edge {edge}: exponent {e}");
    }
}

#[test]
fn imaginary_part_is_principal_value_transform() {
    let pp = p(0.31, 0.5);
    let n = 2048;
    let sd = spectral_density_with_window(&pp, n, 256).unwrap();
    // periodic Hilbert transform using only points at odd offsets
    for j in [100usize, 700, 1111, 1500] {
        let mut pv = 0.0;
        for m in 0..n {
            if (m + n - j) % 2 == 1 {
                pv += (0.5 * (sd.omega[m] - sd.omega[j])).tan().recip() * sd.jr[m];
            }
        }
        pv *= 2.0 / n as f64;
        assert!((pv - sd.ji[j]).abs() < 1e-10, "{pv} vs {}", sd.ji[j]);
    }
}

#[test]
fn edge_deltas_reported_separately() {
    let pp = p(1.2, 1.1);
    let sd = spectral_density_with_window(&pp, 64, 1024).unwrap();
    let k = kappa_exact(&pp, 1).unwrap();
    assert!((sd.delta_zero - k.prefactor * k.edge_zero_sq).abs() < 1e-15);
    assert!((sd.delta_pi - k.prefactor * k.edge_pi_sq).abs() < 1e-15);
    assert!(sd.delta_zero > 0.0 && sd.delta_pi > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn prop_map_orthogonal(j in 0.0..FRAC_PI_2, g in 0.0..FRAC_PI_2, l in 2usize..30) {
        let m = build_majorana_map(l, &p(j, g)).unwrap();
        prop_assert!(m.orthogonality_residual() < 1e-13);
        prop_assert!((m.determinant().unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn prop_weights_sum_to_one(j in 0.05..1.5f64, g in 0.05..1.5f64, l in 2usize..40) {
        let dec = diagonalize_map(&build_majorana_map(l, &p(j, g)).unwrap()).unwrap();
        prop_assert!((dec.total_weight() - 1.0).abs() < 1e-10);
        prop_assert!(dec.quasienergies().iter().all(|q| (0.0..=PI).contains(q)));
    }

    #[test]
    fn prop_kappa_bounded(j in 0.01..1.5f64, g in 0.0..FRAC_PI_2) {
        let k = kappa_exact(&p(j, g), 60).unwrap();
        prop_assert!(k.values.iter().all(|v| v.abs() <= k.values[0] * (1.0 + 1e-12)));
    }
}
