mod common;

use common::*;
use qpwave::hilbert::{config_index, dense_hamiltonian, embed_operator};
use qpwave::linalg::{dagger, eigh, max_abs, random_vector, vdot, Mat, C64};
use qpwave::model::ladder::{gauge_invariant_basis, ladder_hamiltonian};
use qpwave::model::su3::surd_exponent;
use qpwave::model::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn energy_of(h: &Mat, digits: &[u8]) -> f64 {
    let i = config_index(digits);
    h[[i, i]].re
}

#[test]
fn clock_algebra_relations() {
    let ca = clock_algebra();
    let eta = C64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
    assert!((ca.eta - eta).norm() < 1e-15);
    for q in 0..3 {
        assert!((ca.sigma[[q, q]] - eta.powu(q as u32)).norm() < 1e-15);
    }
    let t3 = ca.tau.dot(&ca.tau).dot(&ca.tau);
    assert!(max_dev(&t3, &Mat::eye(3)) < 1e-15);
    let s3 = ca.sigma.dot(&ca.sigma).dot(&ca.sigma);
    assert!(max_dev(&s3, &Mat::eye(3)) < 1e-14);
    let comm = ca.sigma.dot(&ca.tau) - ca.tau.dot(&ca.sigma).mapv(|z| z * eta);
    assert!(max_abs(&comm) < 1e-15);
}

#[test]
fn electric_energies_of_flip_configurations() {
    for group in [GaugeGroup::Z3, GaugeGroup::Su3] {
        let c2 = group.casimir();
        let he = electric_hamiltonian(6, group, Boundary::Periodic).unwrap();
        let h = dense_hamiltonian(&he).unwrap();
        let vac = energy_of(&h, &[0; 6]);
        assert!((energy_of(&h, &[0, 0, 1, 0, 0, 0]) - vac - 4.0 * c2).abs() < 1e-12);
        assert!((energy_of(&h, &[0, 0, 1, 1, 0, 0]) - vac - 6.0 * c2).abs() < 1e-12);
        assert!((energy_of(&h, &[0, 0, 1, 2, 0, 0]) - vac - 7.0 * c2).abs() < 1e-12);
        assert!((energy_of(&h, &[0, 1, 1, 1, 0, 0]) - vac - 8.0 * c2).abs() < 1e-12);
        assert!((energy_of(&h, &[0, 1, 1, 2, 0, 0]) - vac - 9.0 * c2).abs() < 1e-12);
        // diagonal
        let off = &h - &Mat::from_diag(&h.diag());
        assert!(max_abs(&off) == 0.0);
    }
    assert!(electric_hamiltonian(1, GaugeGroup::Z3, Boundary::Open).is_err());
}

#[test]
fn local_terms_sum_to_clock_form() {
    for (l, periodic) in [(4, true), (5, true), (4, false), (5, false)] {
        let b = if periodic { Boundary::Periodic } else { Boundary::Open };
        for lambda in [0.0, 0.3, 1.0] {
            let h = dense_hamiltonian(&build_hamiltonian(GaugeGroup::Z3, lambda, l, b).unwrap()).unwrap();
            let c2 = GaugeGroup::Z3.casimir();
            let mut want = clock_electric(l, c2, periodic).mapv(|z| z * lambda) + clock_magnetic(l).mapv(|z| z * (1.0 - lambda));
            if !periodic {
                // l - 1 bonds plus two boundary rungs: constant shift of the offset
                let n = want.nrows();
                want = want - Mat::eye(n).mapv(|z| z * (2.0 * c2 * lambda / 3.0));
            }
            assert!(max_dev(&h, &want) < 1e-12, "l={l} pbc={periodic} lambda={lambda} dev={}", max_dev(&h, &want));
        }
    }
}

#[test]
fn z3_magnetic_term_structure() {
    let hb = z3_plaquette_hamiltonian(4, Boundary::Periodic).unwrap();
    assert_eq!(hb.support_width, 1);
    for t in &hb.terms {
        assert_eq!(t.sites.len(), 1);
    }
    let u = plaquette_operator(GaugeGroup::Z3).unwrap();
    // U lowers the middle site: <p, q-1, r| U |p, q, r> = 1
    assert_eq!(u[[config_index(&[0, 0, 0]), config_index(&[0, 1, 0])]].re, 1.0);
    assert_eq!(u[[config_index(&[0, 2, 0]), config_index(&[0, 0, 0])]].re, 1.0);
    let ca = clock_algebra();
    // same as tau^dag on the middle site
    let want = embed_operator(&dagger(&ca.tau), &[1], 3).unwrap();
    assert!(max_dev(&u, &want) == 0.0);

    // product of single-site ground states of tau + tau^dag is an eigenstate
    let h = dense_hamiltonian(&build_hamiltonian(GaugeGroup::Z3, 0.0, 4, Boundary::Periodic).unwrap()).unwrap();
    let (w, _) = eigh(&h).unwrap();
    assert!((w[0] + 8.0).abs() < 1e-12);
    let psi = qpwave::linalg::Vector::from_elem(81, C64::new(1.0 / 9.0, 0.0));
    let hp = h.dot(&psi);
    assert!(max_abs(&(hp.clone() + psi.mapv(|z| z * 8.0)).insert_axis(ndarray::Axis(0))) < 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let v = random_vector(81, &mut rng);
        assert!(vdot(&v, &h.dot(&v)).im.abs() < 1e-13);
    }
}

#[test]
fn su3_corner_table_elements() {
    let table = su3_corner_table();
    assert_eq!(table.len(), 9);
    let vac = table.iter().find(|e| e.junction == [0, 0, 0]).unwrap();
    assert!((vac.amplitude - 1.0).abs() < 1e-15);
    assert_eq!(vac.image, [1, 2, 0]);
    for e in &table {
        let m = e.amplitude.abs();
        // magnitudes 3^{-m/4}, m in {0, 1, 2}
        assert!((0..=2).any(|k| (m - 3f64.powf(-(k as f64) / 4.0)).abs() < 1e-12), "{e:?}");
    }
}

#[test]
fn su3_plaquette_table_multiset_and_symmetry() {
    let t = su3_plaquette_table().unwrap();
    assert_eq!(t.entries.len(), 27);
    assert!((t.amplitude(0, 0, 0) - 1.0).abs() < 1e-15);
    let mut counts = [0usize; 5];
    for &a in t.entries.values() {
        counts[surd_exponent(a).unwrap() as usize] += 1;
    }
    assert_eq!(counts, [3, 8, 10, 4, 2]);
    for p in 0..3u8 {
        for q in 0..3u8 {
            for r in 0..3u8 {
                // reflection symmetric
                assert!((t.amplitude(p, q, r) - t.amplitude(r, q, p)).abs() < 1e-15);
                // C U C = U^dag
                let cp = |x: u8| (3 - x) % 3;
                assert!((t.amplitude(cp(p), cp(q), cp(r)) - t.amplitude(p, (q + 1) % 3, r)).abs() < 1e-15);
            }
        }
    }
    let u = plaquette_operator(GaugeGroup::Su3).unwrap();
    let herm = &u + &dagger(&u);
    assert!(max_dev(&herm, &dagger(&herm)) == 0.0);
    // only the middle site changes, lowered by one
    for r in 0..27 {
        for c in 0..27 {
            if u[[r, c]].norm() > 0.0 {
                let o = qpwave::hilbert::config_digits(r, 3);
                let i = qpwave::hilbert::config_digits(c, 3);
                assert_eq!((o[0], o[2]), (i[0], i[2]));
                assert_eq!(o[1], (i[1] + 2) % 3);
            }
        }
    }
}

#[test]
fn hamiltonian_hermitian_and_translation_invariant() {
    let t = dense_translation(5);
    for group in [GaugeGroup::Z3, GaugeGroup::Su3] {
        for lambda in [0.0, 0.25, 0.5, 0.9, 1.0] {
            let hl = build_hamiltonian(group, lambda, 5, Boundary::Periodic).unwrap();
            let h = dense_hamiltonian(&hl).unwrap();
            assert!(max_dev(&h, &dagger(&h)) < 1e-12);
            let comm = h.dot(&t) - t.dot(&h);
            assert!(max_abs(&comm) < 1e-12);
            // translation covariance of the terms
            for j in 0..5 {
                assert_eq!(hl.terms[j].sites, vec![(j + 4) % 5, j, (j + 1) % 5]);
                assert!(max_dev(&hl.terms[j].matrix, &hl.terms[0].matrix) == 0.0);
            }
        }
    }
}

#[test]
fn strong_coupling_groups_differ_by_casimir_ratio() {
    let hz = dense_hamiltonian(&build_hamiltonian(GaugeGroup::Z3, 1.0, 4, Boundary::Periodic).unwrap()).unwrap();
    let hs = dense_hamiltonian(&build_hamiltonian(GaugeGroup::Su3, 1.0, 4, Boundary::Periodic).unwrap()).unwrap();
    let ratio = GaugeGroup::Su3.casimir() / GaugeGroup::Z3.casimir();
    assert!(max_dev(&hs, &hz.mapv(|z| z * ratio)) < 1e-12);
}

#[test]
fn coupling_validation_and_reparameterization() {
    assert!((lambda_from_g(1.0) - 0.5).abs() < 1e-15);
    assert!(build_hamiltonian(GaugeGroup::Z3, 1.5, 4, Boundary::Periodic).is_err());
    assert!(build_hamiltonian(GaugeGroup::Z3, -0.1, 4, Boundary::Periodic).is_err());
    assert!(build_hamiltonian(GaugeGroup::Z3, f64::NAN, 4, Boundary::Periodic).is_err());
}

#[test]
fn ladder_gauss_law_sector() {
    for l in 2..=4 {
        let basis = gauge_invariant_basis(l);
        assert_eq!(basis.len(), 3usize.pow(l as u32));
    }
    // every Gauss-law configuration has uniform longitudinal flux
    let l = 3;
    let mut count = 0;
    for i in 0..3usize.pow(9) {
        let mut x = i;
        let mut take = || {
            let v = (x % 3) as u8;
            x /= 3;
            v
        };
        let c = qpwave::model::ladder::LadderConfig {
            top: (0..l).map(|_| take()).collect(),
            bottom: (0..l).map(|_| take()).collect(),
            rung: (0..l).map(|_| take()).collect(),
        };
        if c.gauss_ok() {
            count += 1;
            let nx = c.longitudinal();
            assert!(nx.iter().all(|&v| v == nx[0]));
        }
    }
    // three longitudinal sectors of 3^l states each
    assert_eq!(count, 3 * 27);
}

#[test]
fn ladder_spectrum_equals_dual_chain() {
    for lambda in [0.1, 0.5, 0.7, 0.9] {
        let ladder = z3_ladder_oracle(4, lambda).unwrap();
        let h = dense_hamiltonian(&build_hamiltonian(GaugeGroup::Z3, lambda, 4, Boundary::Periodic).unwrap()).unwrap();
        let (w, _) = eigh(&h).unwrap();
        assert_eq!(ladder.len(), w.len());
        for (a, b) in ladder.iter().zip(w.iter()) {
            assert!((a - b).abs() < 1e-10, "lambda={lambda}: {a} vs {b}");
        }
    }
    let (_, h) = ladder_hamiltonian(3, 0.4).unwrap();
    assert!(max_dev(&h, &dagger(&h)) < 1e-14);
}
