use latwalk::coarse::{irreducible_decompose, q_measure_mass, skeleton_repulsive, verify_P1_P2};
use latwalk::enumerate::{endpoint_law, enumeration_result, fekete_bracket, gf_result, PathCensus};
use latwalk::geometry::{ConeSpec, NormTable, WulffShape, DEFAULT_TOLERANCE};
use latwalk::path::{LatticePath, Locality, Site};
use latwalk::phase::{classify_phase, free_energy_with, speed_from_free_energy_with, Phase, PhaseEvidence};
use latwalk::potential::{GCParams, ModelParams, PhiSpec};
use latwalk::sampler::{estimate_speed, mcmc_sample, ChainConfig};
use serde::de::DeserializeOwned;
use serde::Serialize;

fn round_trip<T: Serialize + DeserializeOwned + PartialEq + std::fmt::Debug>(v: &T) {
    let s = serde_json::to_string(v).unwrap();
    let back: T = serde_json::from_str(&s).unwrap();
    assert_eq!(&back, v);
}

#[test]
fn saw_from_census_to_decomposition() {
    let spec = ModelParams::default_for("saw").unwrap().build().unwrap();
    let census = PathCensus::build(&spec, 2, 10).unwrap();
    let r = enumeration_result(&census, &[0.0, 0.0], 4).unwrap();
    assert_eq!(r.paths, 100);
    round_trip(&r);
    let b = fekete_bracket(&census, &spec, &[0.0, 0.0], 10).unwrap();
    // the square-lattice connective constant is about 2.638
    assert!(b.lo <= 2.638f64.ln() && 2.638f64.ln() <= b.hi);

    let lambda = 1.5;
    let table = NormTable::estimate(&census, lambda, 2).unwrap();
    round_trip(&table);
    let shape = WulffShape::from_table(table, DEFAULT_TOLERANCE).unwrap();
    round_trip(&shape);
    let h = shape.dual_drift(&[1.0, 0.0]).unwrap().h;
    let gf = gf_result(&census, Site::from_slice(&[2, 1]), lambda, 10, None).unwrap();
    assert!(gf.log_h.unwrap() <= gf.log_d.unwrap() + 1e-12);
    round_trip(&gf);

    let mut cfg = ChainConfig::new(40, h.clone(), 400, 50, 9);
    cfg.keep_paths = true;
    let stats = mcmc_sample(&spec, &cfg).unwrap();
    round_trip(&stats);
    let cone = ConeSpec::new(&shape, h.clone(), 0.1, 1).unwrap();
    for p in stats.paths.iter().step_by(25) {
        let sk = skeleton_repulsive(p, 3.0, &shape).unwrap();
        assert!(verify_P1_P2(p, &sk, &shape).is_clean());
        round_trip(&sk);
        let d = irreducible_decompose(p, &shape, &cone);
        assert_eq!(&d.reassemble().unwrap(), p);
        round_trip(&d);
    }
    let q = q_measure_mass(&spec, lambda, 8, &shape, &cone).unwrap();
    assert!(q.mass > 0.0 && q.cumulative.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn endpoint_law_is_a_distribution() {
    for id in ["domb-joyce", "reinforced", "annealed-gamma"] {
        let spec = ModelParams::default_for(id).unwrap().build().unwrap();
        let census = PathCensus::build(&spec, 2, 6).unwrap();
        let law = endpoint_law(&census, &[0.2, -0.1], 6).unwrap();
        let total: f64 = law.iter().map(|e| e.p).sum();
        assert!((total - 1.0).abs() < 1e-12, "{id}: {total}");
        // parity: six steps end on an even site
        assert!(law.iter().all(|e| (e.x[0] + e.x[1]).rem_euclid(2) == 0));
    }
}

#[test]
fn weights_match_path_by_path() {
    let spec = PhiSpec::domb_joyce(0.5, Locality::Site).unwrap();
    // around a plaquette and one more step: the origin and e₁ are visited twice
    let p = LatticePath::from_steps(2, Site::ORIGIN, &[0, 2, 1, 3, 0]).unwrap();
    let params = GCParams::new(vec![0.3, 0.0], 1.0);
    let w = spec.log_weight(&params, &p).unwrap().unwrap();
    assert!((w - (0.3 - 5.0 - 2.0 * 0.5)).abs() < 1e-12, "{w}");
}

#[test]
fn free_line_phase_chain() {
    let spec = PhiSpec::free(Locality::Site);
    let census = PathCensus::build(&spec, 1, 24).unwrap();
    let fe = free_energy_with(&census, &spec, &[0.6], 24).unwrap();
    assert!((fe.lambda_hat - (2.0 * 0.6f64.cosh()).ln()).abs() < 1e-9);
    round_trip(&fe);
    let grad = speed_from_free_energy_with(&census, &spec, &[0.6], 0.01, 24).unwrap();
    assert!((grad.v[0] - 0.6f64.tanh()).abs() < 1e-4);
    let stats = mcmc_sample(&spec, &ChainConfig::new(40, vec![0.6], 2000, 100, 4)).unwrap();
    let v = estimate_speed(&stats);
    assert!((v.v[0] - 0.6f64.tanh()).abs() < 4.0 * v.se[0] + 1e-3);
    let evidence = PhaseEvidence {
        shape: latwalk::geometry::ShapeLimit::Point,
        tolerance: DEFAULT_TOLERANCE,
        speeds: vec![v],
        free_energy: Some(fe),
        lambda0: None,
        rate: None,
    };
    let report = classify_phase(&spec, &[0.6], &evidence).unwrap();
    assert_eq!(report.classification, Some(Phase::Ballistic));
    round_trip(&report);
}
