use heatlab::carleman::{build_xi, carleman_sides, CarlemanParams};
use heatlab::control::{hum_solve, HumOptions};
use heatlab::mesh::{SpaceGrid, SpaceMask, TimeGrid, TimeSet};
use heatlab::observability::{gramian_apply, ObservationRegion};
use heatlab::pde::{duality_gap, HalfStepSource, Propagator, SpaceTimeField};
use heatlab::potential::{norms, Potential, SpaceProfile};
use heatlab::spectral::{hill_eigensolve, spectral_ratio};
use proptest::collection::vec;
use proptest::prelude::*;

fn grid(n: usize) -> SpaceGrid<f64> {
    SpaceGrid::new(0.0, 1.0, n).unwrap()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn duality_holds_for_random_data(
        y0 in vec(-1.0f64..1.0, 12),
        qt in vec(-1.0f64..1.0, 12),
        f in vec(-1.0f64..1.0, 12 * 10),
        vmid in vec(-30.0f64..30.0, 12 * 10),
    ) {
        let g = grid(12);
        let tg = TimeGrid::new(0.3, 10).unwrap();
        let prop = Propagator::from_midstep(g, tg, vmid.chunks(12).map(<[f64]>::to_vec).collect(), false).unwrap();
        let src = HalfStepSource { values: f.chunks(12).map(<[f64]>::to_vec).collect() };
        let gap = duality_gap(&prop, &y0, &qt, Some(&src)).unwrap();
        prop_assert!(gap.relative() < 1e-11);
    }

    #[test]
    fn gramian_is_symmetric_psd(
        a in vec(-1.0f64..1.0, 10),
        b in vec(-1.0f64..1.0, 10),
        lo in 0.0f64..0.5,
        amp in 0.0f64..50.0,
    ) {
        let g = grid(10);
        let tg = TimeGrid::new(0.4, 16).unwrap();
        let prop = Propagator::new(g, tg, &Potential::constant(amp)).unwrap();
        let region = ObservationRegion::new(SpaceMask::new(&g, &[(lo, lo + 0.45)]).unwrap(), TimeSet::full(&tg)).unwrap();
        let la = gramian_apply(&prop, &region, &a).unwrap();
        let lb = gramian_apply(&prop, &region, &b).unwrap();
        let scale = (dot(&a, &la) * dot(&b, &lb)).sqrt().max(1e-300);
        prop_assert!((dot(&b, &la) - dot(&a, &lb)).abs() <= 1e-12 * scale.max(1e-3));
        prop_assert!(dot(&a, &la) >= -1e-15);
    }

    #[test]
    fn carleman_sides_are_quadratic(alpha in -50.0f64..50.0, tau in 0.1f64..1e3) {
        prop_assume!(alpha.abs() > 1e-3);
        let g = grid(15);
        let tg = TimeGrid::new(1.0, 16).unwrap();
        let xi = build_xi(&g, 0.4).unwrap();
        let mask = SpaceMask::new(&g, &[(0.2, 0.6)]).unwrap();
        let p = CarlemanParams::new(1.5, 2.0, tau, 1.0).unwrap();
        let w = SpaceTimeField::from_fn(g, tg, |x, t| (x * std::f64::consts::PI).sin() * (1.0 + t * x));
        let v = Potential::constant(4.0);
        let a = carleman_sides(&w, &v, &xi, &p, &mask);
        let b = carleman_sides(&w.scaled(alpha), &v, &xi, &p, &mask);
        let shift = (b.log_scale - a.log_scale).exp();
        let pa = [a.lhs3, a.lhs1, a.lhs_neg1, a.rhs_f, a.rhs_local];
        let pb = [b.lhs3, b.lhs1, b.lhs_neg1, b.rhs_f, b.rhs_local];
        for k in 0..5 {
            prop_assert!((pb[k] * shift - alpha * alpha * pa[k]).abs() <= 1e-12 * alpha * alpha * pa[k].abs());
        }
        prop_assert_eq!(a.holds, b.holds);
    }

    #[test]
    fn norms_scale_and_shift(c in -20.0f64..20.0, s in 0.1f64..10.0) {
        let g = grid(20);
        let tg = TimeGrid::new(1.0, 10).unwrap();
        let v = Potential::time_independent(SpaceProfile::Sin { amplitude: 3.0, frequency: 2.0 });
        let base = norms(&v, &g, &tg, 4).unwrap();
        let scaled = norms(&v.clone().scaled(s), &g, &tg, 4).unwrap();
        prop_assert!((scaled.sup - s * base.sup).abs() < 1e-10 * scaled.sup);
        prop_assert!((scaled.grad_sup - s * base.grad_sup).abs() < 1e-10 * scaled.grad_sup);
        let shifted = norms(&v.shifted(c), &g, &tg, 4).unwrap();
        prop_assert!((shifted.grad_sup - base.grad_sup).abs() < 1e-10 * base.grad_sup);
        prop_assert_eq!(shifted.dt_sup, 0.0);
    }

    #[test]
    fn spectral_ratio_is_at_least_one(lo in 0.0f64..0.6, width in 0.15f64..0.4, amp in 0.0f64..80.0, modes in 1usize..6) {
        let g = grid(40);
        let b = hill_eigensolve(&Potential::time_independent(SpaceProfile::Sin { amplitude: amp, frequency: 1.0 }), &g).unwrap();
        let mask = SpaceMask::new(&g, &[(lo, (lo + width).min(1.0))]).unwrap();
        let r = spectral_ratio(&b, &b.window(b.eigenvalues[modes - 1]), &mask, 0.0).unwrap();
        prop_assert!(r.max_ratio >= 1.0 - 1e-12);
    }

    #[test]
    fn hum_is_linear_in_data(s in -5.0f64..5.0) {
        prop_assume!(s.abs() > 1e-2);
        let g = grid(12);
        let tg = TimeGrid::new(0.5, 24).unwrap();
        let prop = Propagator::new(g, tg, &Potential::constant(0.0)).unwrap();
        let region = ObservationRegion::new(SpaceMask::new(&g, &[(0.3, 0.7)]).unwrap(), TimeSet::full(&tg)).unwrap();
        let y0 = g.sine_mode(1);
        let ys: Vec<f64> = y0.iter().map(|v| s * v).collect();
        let a = hum_solve(&prop, &region, &y0, &HumOptions::default()).unwrap();
        let b = hum_solve(&prop, &region, &ys, &HumOptions::default()).unwrap();
        let na = a.q_terminal.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (qa, qb) in a.q_terminal.iter().zip(&b.q_terminal) {
            prop_assert!((qb - s * qa).abs() <= 1e-6 * s.abs() * na);
        }
    }
}
