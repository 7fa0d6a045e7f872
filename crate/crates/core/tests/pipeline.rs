use zharm_core::family::{packet, test_family};
use zharm_core::lpaley::calderon_reconstruct;
use zharm_core::molec::{decompose_with, verify_molecule, DecomposeOptions, Flavor};
use zharm_core::spaces::besov_norm;
use zharm_core::{Partition, DEFAULT_JMIN};

#[test]
fn packet_survives_blocks_and_molecules() {
    let p = Partition::default();
    let f = packet(0.9, 200);
    let r = calderon_reconstruct(&p, &f, DEFAULT_JMIN).unwrap();
    assert!(r.residual < 1e-10, "{}", r.residual);

    let d = decompose_with(&p, &f, &DecomposeOptions::default()).unwrap();
    assert!(d.residual(&f) < 1e-6);
    let g = d.reconstruct_sequence();
    assert!((&g - &f).l2_norm() < 1e-6 * f.l2_norm());
    for c in d.coefficients.iter().take(20) {
        let rep = verify_molecule(&c.molecule, Flavor::Besov);
        assert!(rep.constant.is_finite() && rep.constant > 0.0);
    }
}

#[test]
fn family_energy_is_framed() {
    let p = Partition::default();
    let (a, b) = p.frame_bounds();
    for s in test_family(20, 3).unwrap() {
        let e = besov_norm(&p, &s.seq, 0.0, 2.0, 2.0, DEFAULT_JMIN).unwrap().value.powi(2);
        let n = s.seq.l2_norm().powi(2);
        assert!(e >= a * n * (1.0 - 1e-3) && e <= b * n * (1.0 + 1e-12), "{}", s.label);
    }
}

#[test]
fn family_is_reproducible() {
    let a = test_family(20, 11).unwrap();
    let b = test_family(20, 11).unwrap();
    let c = test_family(40, 11).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.label, y.label);
        assert_eq!(x.seq, y.seq);
    }
    assert!(a.iter().all(|s| c.iter().any(|t| t.label == s.label && t.seq == s.seq)));
}
