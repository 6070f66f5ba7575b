mod common;

use decoupling_core::caps::{cap_family, DyadicRational, FamilyKind};
use decoupling_core::harness::{
    curve_family, curve_ratio, decoupling_ratio, recursion_closed_form, recursion_iterate, sweep, CurveMode, Ensemble,
    RatioRecord, RhsWeight, SweepConfig,
};
use proptest::prelude::*;

fn within(rec_val: f64, se: f64, exact: f64, err: f64, mult: f64) -> bool {
    (rec_val - exact).abs() <= mult * (se * se + err * err).sqrt() + 1e-12 * exact
}

#[test]
fn lattice_ratio_matches_dense_grid() {
    let fam = cap_family(16, 2, 1, FamilyKind::F4).unwrap();
    let ens = Ensemble::AtomicLattice { n: 4, seed: 5 };
    let rec = decoupling_ratio(&ens, 2.0, 16, &fam, RhsWeight::Indicator, 20_000, 5).unwrap();
    let groups = common::planar_groups(&ens.build(&fam).unwrap(), &fam, 16.0);
    let o = &common::planar_oracle(&groups, 16.0, 0.125, &[2.0])[0];
    assert!(within(rec.lhs, rec.lhs_stderr, o.lhs, o.lhs_err, 3.0), "{rec:?} vs {}", o.lhs);
    assert!(within(rec.rhs, rec.rhs_stderr, o.rhs, o.rhs_err, 3.0), "{rec:?} vs {}", o.rhs);
    let ratio_err = (o.lhs / o.rhs) * ((o.lhs_err / o.lhs).powi(2) + (o.rhs_err / o.rhs).powi(2)).sqrt();
    assert!(within(rec.ratio, rec.ratio_stderr, o.lhs / o.rhs, ratio_err, 3.0));
}

#[test]
fn curve_ratio_matches_dense_grid() {
    let half = DyadicRational::pow2(-1);
    let ens = Ensemble::RandomPhasePerCap { seed: 1 };
    let rec = curve_ratio(
        &ens,
        6.0,
        256,
        half,
        None,
        RhsWeight::Indicator,
        CurveMode::MonteCarlo { budget: 20_000, seed: 1 },
    )
    .unwrap();
    let fam = curve_family(half, 256).unwrap();
    assert_eq!(fam.len(), 4);
    let groups = common::planar_groups(&ens.build(&fam).unwrap(), &fam, 256.0);
    let o = &common::planar_oracle(&groups, 256.0, 0.5, &[6.0])[0];
    assert!(within(rec.lhs, rec.lhs_stderr, o.lhs, o.lhs_err, 3.0), "{rec:?} vs {} ± {}", o.lhs, o.lhs_err);
    assert!(within(rec.rhs, rec.rhs_stderr, o.rhs, o.rhs_err, 3.0), "{rec:?} vs {} ± {}", o.rhs, o.rhs_err);
}

#[test]
fn curve_grid_mode_matches_oracle() {
    // the grid mode uses the square [-R, R]², so only the midpoint error
    // along the circle separates it from the chord-exact oracle
    let half = DyadicRational::pow2(-1);
    let ens = Ensemble::RandomPhasePerCap { seed: 4 };
    let rec = curve_ratio(&ens, 4.0, 16, half, Some(256), RhsWeight::Indicator, CurveMode::Grid { steps: 256 }).unwrap();
    let fam = curve_family(half, 256).unwrap();
    let groups = common::planar_groups(&ens.build(&fam).unwrap(), &fam, 16.0);
    let o = &common::planar_oracle(&groups, 16.0, 0.0625, &[4.0])[0];
    assert!((rec.lhs - o.lhs).abs() < 0.02 * o.lhs, "{} vs {}", rec.lhs, o.lhs);
    assert!((rec.rhs - o.rhs).abs() < 0.02 * o.rhs, "{} vs {}", rec.rhs, o.rhs);
}

#[test]
fn p2_ratio_bounded_on_battery() {
    for d in [1usize, 2] {
        for r in [16u64, 256] {
            let fam = cap_family(r, 2, d, FamilyKind::F4).unwrap();
            for ens in [
                Ensemble::SingleCap { cap: None },
                Ensemble::ConstantOne,
                Ensemble::RandomPhasePerCap { seed: 3 },
                Ensemble::AtomicLattice { n: 4, seed: 3 },
            ] {
                let rec = decoupling_ratio(&ens, 2.0, r, &fam, RhsWeight::Indicator, 4000, 3).unwrap();
                assert!(rec.ratio <= 4.0, "{rec:?}");
            }
        }
    }
}

#[test]
fn single_cap_exact_at_p2_for_every_family() {
    for kind in [FamilyKind::F4, FamilyKind::F4Tilde, FamilyKind::UniformGrid, FamilyKind::mixed(&[2])] {
        let fam = cap_family(256, 2, 3, kind).unwrap();
        let rec = decoupling_ratio(&Ensemble::SingleCap { cap: Some(7) }, 2.0, 256, &fam, RhsWeight::Indicator, 1000, 0)
            .unwrap();
        assert!((rec.ratio - 1.0).abs() < 1e-12, "{rec:?}");
    }
}

#[test]
fn refinement_changes_rhs_by_bounded_factor() {
    let f4 = cap_family(256, 2, 2, FamilyKind::F4).unwrap();
    let uni = cap_family(256, 2, 2, FamilyKind::UniformGrid).unwrap();
    // ensembles defined independently of the family, so both sides see the same f
    for ens in [Ensemble::ConstantOne, Ensemble::AtomicLattice { n: 6, seed: 2 }] {
        for p in [2.0, 4.0] {
            let a = decoupling_ratio(&ens, p, 256, &f4, RhsWeight::Indicator, 4000, 2).unwrap();
            let b = decoupling_ratio(&ens, p, 256, &uni, RhsWeight::Indicator, 4000, 2).unwrap();
            assert!((a.lhs - b.lhs).abs() <= 1e-9 * a.lhs);
            let q = a.rhs / b.rhs;
            assert!((1.0 / 8.0..=8.0).contains(&q), "{} p={p}: {q}", ens.label());
        }
    }
}

#[test]
fn sweep_p2_growth_is_small() {
    let cfg = SweepConfig {
        r_values: vec![16, 256, 4096],
        p_values: vec![2.0],
        d: 1,
        m: 2,
        kind: FamilyKind::F4,
        ensembles: vec![Ensemble::RandomPhasePerCap { seed: 0 }],
        budget: 4000,
        seeds: vec![0, 1, 2],
        rhs_weight: RhsWeight::Indicator,
    };
    let mut seen = 0;
    let out = sweep(&cfg, |_, r| {
        assert!(r.is_ok());
        seen += 1;
    })
    .unwrap();
    assert_eq!(seen, 9);
    assert!(out.failures.is_empty());
    assert_eq!(out.fits.len(), 1);
    assert!(out.fits[0].epsilon_hat <= 0.1, "{:?}", out.fits[0]);
    let again = sweep(&cfg, |_, _| {}).unwrap();
    assert!(out.records.iter().zip(&again.records).all(|(a, b)| a.same_measurement(b)));
}

#[test]
fn sextic_family_runs() {
    let fam = cap_family(64, 3, 1, FamilyKind::F4).unwrap();
    let rec: RatioRecord =
        decoupling_ratio(&Ensemble::RandomPhasePerCap { seed: 1 }, 4.0, 64, &fam, RhsWeight::PaperWeight, 2000, 1).unwrap();
    assert_eq!(rec.m, 3);
    assert!(rec.ratio.is_finite() && rec.ratio > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn recursion_matches_closed_form(c in 0.3..5.0f64, lk in 1u32..10, n in 1u32..6, eps in 0.0..0.6f64) {
        let k = 1u64 << lk;
        let r = k.pow(n);
        let it = recursion_iterate(c, k, eps, r, 4.0).unwrap();
        let cf = recursion_closed_form(c, k, eps, r, 4.0).unwrap();
        prop_assert!((it - cf).abs() <= 1e-11 * it, "{} vs {}", it, cf);
    }

    #[test]
    fn ensembles_are_reproducible(seed in 0u64..1000, n in 1usize..5) {
        let fam = cap_family(256, 2, 2, FamilyKind::F4).unwrap();
        for ens in [Ensemble::RandomPhasePerCap { seed }, Ensemble::AtomicLattice { n, seed }] {
            prop_assert_eq!(ens.build(&fam).unwrap(), ens.build(&fam).unwrap());
            let parsed = Ensemble::parse(&ens.family_label(), seed).unwrap();
            prop_assert_eq!(parsed, ens.clone());
        }
    }
}
