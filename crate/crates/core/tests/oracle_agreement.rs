mod common;

use common::{agrees, plus, random_setups};
use postsel_core::model::{mean_pz_exact, mean_z_exact, postselection_probability};
use postsel_core::oracle::*;
use postsel_core::quadrature::QuadratureSpec;
use postsel_core::{Channel, Error};

#[test]
fn closed_forms_match_quadrature() {
    let spec = QuadratureSpec::default();
    let mut checked_means = 0;
    for (i, s) in random_setups(0x5eed, 200, 0.5).iter().enumerate() {
        for ch in Channel::ALL {
            let p = postselection_probability(ch, s);
            let po = oracle_postselection_probability(s, ch, &spec).unwrap();
            assert!(agrees(p, po, 1e-8, 1e-12), "setup {i} {ch:?}: {p} vs {po}");

            match (mean_z_exact(s, ch), oracle_mean_z(s, ch, &spec)) {
                (Ok(m), Ok(o)) => {
                    assert!(agrees(m, o, 1e-8, 1e-12), "setup {i} {ch:?} z: {m} vs {o}");
                    let mp = mean_pz_exact(s, ch).unwrap();
                    let op = oracle_mean_pz(s, ch, &spec).unwrap();
                    assert!(agrees(mp, op, 1e-8, 1e-12), "setup {i} {ch:?} p: {mp} vs {op}");
                    checked_means += 1;
                }
                (Err(Error::ZeroPostselection), _) | (_, Err(Error::ZeroPostselection)) => {}
                (a, b) => panic!("setup {i}: {a:?} {b:?}"),
            }
        }
    }
    assert!(checked_means > 390);
}

#[test]
fn window_width_does_not_matter() {
    let narrow = QuadratureSpec::default();
    let wide = QuadratureSpec::new(16.0, 1e-10, 40).unwrap();
    for s in random_setups(7, 20, 0.5) {
        for ch in Channel::ALL {
            let a = oracle_postselection_probability(&s, ch, &narrow).unwrap();
            let b = oracle_postselection_probability(&s, ch, &wide).unwrap();
            assert!(agrees(a, b, 1e-12, 1e-15), "{a} {b}");
            let a = oracle_momentum_norm(&s, ch, &narrow).unwrap();
            let b = oracle_momentum_norm(&s, ch, &wide).unwrap();
            assert!(agrees(a, b, 1e-12, 1e-15), "{a} {b}");
            if let (Ok(a), Ok(b)) = (oracle_mean_z(&s, ch, &narrow), oracle_mean_z(&s, ch, &wide)) {
                assert!(agrees(a, b, 1e-12, 1e-14), "{a} {b}");
            }
            if let (Ok(a), Ok(b)) = (oracle_mean_pz(&s, ch, &narrow), oracle_mean_pz(&s, ch, &wide)) {
                assert!(agrees(a, b, 1e-12, 1e-14), "{a} {b}");
            }
        }
    }
}

#[test]
fn parseval() {
    let spec = QuadratureSpec::default();
    for s in random_setups(11, 50, 0.8) {
        for ch in Channel::ALL {
            let z = oracle_postselection_probability(&s, ch, &spec).unwrap();
            let p = oracle_momentum_norm(&s, ch, &spec).unwrap();
            assert!((z - p).abs() < 1e-9, "{z} {p}");
        }
    }
}

#[test]
fn verify_grid_matches_oracle() {
    let grid: Vec<VerifyPoint> = [0.0, 0.05, 0.1]
        .iter()
        .flat_map(|&epsilon| {
            [-0.1, 0.0, 0.05, 0.2].iter().flat_map(move |&delta| {
                [1e-3, 0.05, 0.1, 0.3].iter().map(move |&eta| VerifyPoint { epsilon, delta, eta })
            })
        })
        .collect();
    let rows = verify_report(&plus(), &grid, &QuadratureSpec::default()).unwrap();
    assert_eq!(rows.len(), 2 * grid.len());
    for row in &rows {
        match row.flag {
            RowFlag::Ok => assert!(row.oracle_discrepancy().unwrap() <= 1e-8, "{row:?}"),
            RowFlag::ZeroPostselection => assert!(row.exact.is_none()),
        }
    }
}
