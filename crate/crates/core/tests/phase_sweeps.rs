use cwflow_core::acc::{fold_times, FoldScan};
use cwflow_core::cost::{classify_bad, BadScan};
use cwflow_core::phase::{beta_sb, diagram, t_ngs_closed, thresholds_numeric, DiagramSpec, RegionLabel};
use cwflow_core::{Error, ModelParams, Sequential};

#[test]
fn closed_form_matches_first_fold() {
    for beta in [1.1, 1.25, 1.4, 1.5] {
        let p = ModelParams::new(beta, 0.0, 0.0).unwrap();
        let folds = fold_times(&p, 2.0, &FoldScan::default(), &Sequential).unwrap();
        let tc = t_ngs_closed(beta, 0.0).unwrap();
        assert!((folds[0].t - tc).abs() < 1e-3, "beta={beta}: {:?} vs {tc}", folds[0]);
        assert!(folds[0].m0.abs() < 1e-3);
    }
}

#[test]
fn high_temperature_never_folds() {
    for beta in [0.3, 0.6, 0.9, 0.99] {
        for bp in [0.0, 0.8, 1.5] {
            let p = ModelParams::new(beta, bp, 0.0).unwrap();
            let r = fold_times(&p, 10.0, &FoldScan::default(), &Sequential);
            assert!(matches!(r, Err(Error::NoFold { .. })), "beta={beta} bp={bp}: {r:?}");
        }
    }
}

#[test]
fn broken_symmetry_window() {
    assert!(2.5 > beta_sb(0.0));
    let th = thresholds_numeric(2.5, 0.0, 0.3, 30, &BadScan::default(), &Sequential).unwrap();
    let (t0, t1) = (th.t0.unwrap(), th.t1.unwrap());
    assert!(0.0 < t0 && t0 + 0.01 < t1, "{th:?}");
    assert!(t1 < t_ngs_closed(2.5, 0.0).unwrap());
    for t in [t0 + 0.3 * (t1 - t0), t0 + 0.7 * (t1 - t0)] {
        let rep = classify_bad(&ModelParams::new(2.5, 0.0, t).unwrap(), &BadScan::default(), &Sequential).unwrap();
        assert_eq!(RegionLabel::of(&rep), RegionLabel::NonGibbsBroken);
        assert_eq!(rep.bad.len(), 2);
        assert!(rep.bad[1].m > 0.0 && (rep.bad[0].m + rep.bad[1].m).abs() < 1e-8);
    }
}

#[test]
fn independent_dynamics_diagram() {
    let mut spec = DiagramSpec::uniform(0.8, 1.1, 2, 0.6, 12);
    spec.beta_inv = vec![0.8, 1.1];
    let d = diagram(0.0, &spec, &Sequential).unwrap();
    assert!(d.unknown.is_empty() && d.monotonicity_violations.is_empty());
    assert!(d.labels[1].iter().all(|l| l.is_gibbs()));
    let b = d.boundary[0];
    assert!((b.t.unwrap() - 0.25 * 5f64.ln()).abs() < 1e-2, "{b:?}");
    assert_eq!(b.t_closed, Some(0.25 * 5f64.ln()));
    assert!(d.boundary[1].t.is_none());
    let again = diagram(0.0, &spec, &Sequential).unwrap();
    assert_eq!(d, again);
}

#[test]
fn quench_diagram_has_three_bands() {
    let bp = 1.5;
    let inv_sb = 1.0 / beta_sb(bp);
    let mut spec = DiagramSpec::uniform(0.3, 0.85, 3, 2.0, 4);
    spec.beta_inv = vec![0.3, 0.6, 0.85, 1.1];
    spec.times = vec![0.05, 0.3, 1.0, 2.0];
    spec.trace_boundary = false;
    assert!(0.3 < inv_sb && inv_sb < 0.6 && 0.6 < 1.0 / bp && 1.0 / bp < 0.85);
    let d = diagram(bp, &spec, &Sequential).unwrap();
    assert!(d.unknown.is_empty(), "{:?}", d.unknown);
    assert!(d.monotonicity_violations.is_empty(), "{:?}", d.labels);
    let col = |i: usize| &d.labels[i];
    assert!(col(0).contains(&RegionLabel::NonGibbsBroken), "{:?}", col(0));
    let symmetric = col(1).iter().filter(|l| !l.is_gibbs());
    assert!(symmetric.clone().count() >= 2 && symmetric.into_iter().all(|&l| l == RegionLabel::NonGibbsSymmetric));
    let cooling = col(2).iter().filter(|l| !l.is_gibbs());
    assert!(cooling.clone().count() >= 1 && cooling.into_iter().all(|&l| l == RegionLabel::NonGibbsBroken));
    assert!(col(3).iter().all(|l| l.is_gibbs()));
}
