use std::f64::consts::PI;

use ghz_tomo::fock::{format_ensemble_dump, parse_ensemble_dump};
use ghz_tomo::source::{herald, CrystalParams, D2Port};

const GOLDEN: &str = include_str!("data/heralded_moderate_coupling.dump");

fn params() -> CrystalParams {
    CrystalParams {
        gamma: 0.1,
        phi1: 0.0,
        chi: 0.3 * PI,
        phi_a: 0.0,
        phi_b: 0.0,
        eta1: 0.3,
        eta2: 0.3,
    }
}

#[test]
fn heralded_ensemble_matches_golden_dump() {
    let out = herald(&params(), D2Port::Ordinary, 2).unwrap();
    let golden = parse_ensemble_dump(GOLDEN).unwrap();
    let produced = parse_ensemble_dump(&format_ensemble_dump(&out.state)).unwrap();
    assert_eq!(golden.len(), produced.len());
    for ((wg, kg), (wp, kp)) in golden.iter().zip(&produced) {
        assert!((wg - wp).abs() < 1e-15);
        assert_eq!(kg.len(), kp.len());
        for ((og, ag), (op, ap)) in kg.iter().zip(kp.iter()) {
            assert_eq!(og, op);
            assert!((ag - ap).norm() < 1e-15);
        }
    }
}

#[test]
fn dump_round_trip_is_exact() {
    let out = herald(&params(), D2Port::Extraordinary, 2).unwrap();
    let text = format_ensemble_dump(&out.state);
    let parsed = parse_ensemble_dump(&text).unwrap();
    for ((w, k), (wp, kp)) in out.state.components().iter().zip(&parsed) {
        assert_eq!(w, wp);
        assert_eq!(k.iter().collect::<Vec<_>>(), kp.iter().collect::<Vec<_>>());
    }
}
