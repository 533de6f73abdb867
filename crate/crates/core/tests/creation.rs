mod common;

use common::*;
use qpwave::creation::*;
use qpwave::hilbert::{reduced_density_matrix_dense, split_window};
use qpwave::linalg::{dagger, expm_hermitian, haar_unitary, random_hermitian, svd_full, trace, Mat, Vector, C64, ONE};
use qpwave::model::{build_hamiltonian, Boundary, GaugeGroup};
use qpwave::spectroscopy::*;
use qpwave::wannier::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Setup {
    l: usize,
    vacuum: Vector,
    mlwf: Vector,
}

fn setup(group: GaugeGroup, lambda: f64, l: usize) -> Setup {
    let h = build_hamiltonian(group, lambda, l, Boundary::Periodic).unwrap();
    let solver = SpectrumSolver::new(l).unwrap();
    let spec = solver.spectrum(&h, 1, EigenMethod::Auto).unwrap();
    let band = classify_bands(&spec, 1).unwrap().into_iter().find(|b| b.label.c == 1).unwrap();
    let m = precompute_kspace_matrix(&band, h.term(0)).unwrap();
    let opts = WannierOptions { restarts: 8, ..Default::default() };
    let w = minimize_spread(&band, &m, &opts).unwrap();
    Setup { l, vacuum: spec.vacuum.clone(), mlwf: w.state }
}

#[test]
fn fidelity_is_the_squared_trace_norm() {
    for (group, lambda) in [(GaugeGroup::Z3, 0.5), (GaugeGroup::Su3, 0.3)] {
        let s = setup(group, lambda, 8);
        for w in [1, 3] {
            let op = CreationOperator::extract(&s.mlwf, &s.vacuum, s.l, 0, w).unwrap();
            let a = partial_overlap_operator(&s.mlwf, &s.vacuum, s.l, &op.support).unwrap();
            let tn = trace_norm(&a).unwrap();
            assert!(tn <= 1.0 + 1e-12);
            assert!((op.fidelity - tn * tn).abs() < 1e-10);
            assert!((fidelity(&op.unitary, &a) - op.fidelity).abs() < 1e-10);
            assert!(op.unitarity_defect() < 1e-10);
        }
    }
}

#[test]
fn procrustes_beats_random_unitaries() {
    let s = setup(GaugeGroup::Su3, 0.3, 8);
    let op = CreationOperator::extract(&s.mlwf, &s.vacuum, s.l, 0, 1).unwrap();
    let a = partial_overlap_operator(&s.mlwf, &s.vacuum, s.l, &op.support).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let best = (0..100_000).map(|_| fidelity(&haar_unitary(3, &mut rng), &a)).fold(0.0, f64::max);
    assert!(op.fidelity >= best, "{} < {best}", op.fidelity);
}

#[test]
fn optimum_is_stable_under_unitary_perturbations() {
    let s = setup(GaugeGroup::Z3, 0.5, 8);
    let op = CreationOperator::extract(&s.mlwf, &s.vacuum, s.l, 0, 3).unwrap();
    let a = partial_overlap_operator(&s.mlwf, &s.vacuum, s.l, &op.support).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let k = random_hermitian(27, &mut rng);
        let nk = k.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let k = k.mapv(|z| z / nk);
        let v = expm_hermitian(&k, -1e-3).unwrap().dot(&op.unitary);
        assert!(fidelity(&v, &a) <= op.fidelity + 1e-8);
    }
}

#[test]
fn strong_coupling_single_site_is_exact() {
    let s = setup(GaugeGroup::Z3, 1.0, 8);
    for w in [1, 3] {
        let op = CreationOperator::extract(&s.mlwf, &s.vacuum, s.l, 0, w).unwrap();
        assert!(op.infidelity() <= 1e-10, "w={w}: {}", op.infidelity());
    }
}

#[test]
fn gauge_freedom_in_the_null_space() {
    let s = setup(GaugeGroup::Su3, 1.0, 8);
    let op = CreationOperator::extract(&s.mlwf, &s.vacuum, s.l, 0, 3).unwrap();
    assert!(op.null_dim > 0);
    let a = partial_overlap_operator(&s.mlwf, &s.vacuum, s.l, &op.support).unwrap();
    // directions touched by A: its non-null left and right singular vectors
    let (x, sv, yt) = svd_full(&a).unwrap();
    let smax = sv[0];
    let mut cols = Vec::new();
    for (i, &v) in sv.iter().enumerate() {
        if v >= NULL_THRESHOLD * smax {
            cols.push(x.column(i).to_owned());
            cols.push(dagger(&yt).column(i).to_owned());
        }
    }
    let n = 27;
    let mut used = Mat::zeros((n, cols.len()));
    for (i, c) in cols.iter().enumerate() {
        used.column_mut(i).assign(c);
    }
    let (q, s2, _) = svd_full(&used).unwrap();
    let rank = s2.iter().filter(|&&v| v > 1e-10).count();
    let comp = q.slice(ndarray::s![.., rank..]).to_owned();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let w = haar_unitary(n - rank, &mut rng);
    let lam = Mat::eye(n) - comp.dot(&dagger(&comp)) + comp.dot(&w).dot(&dagger(&comp));
    assert!(max_dev(&dagger(&lam).dot(&lam), &Mat::eye(n)) < 1e-12);
    let rotated = lam.dot(&op.unitary).dot(&dagger(&lam));
    assert!((fidelity(&rotated, &a) - op.fidelity).abs() < 1e-10);
}

#[test]
fn infidelity_decreases_with_support() {
    let mut at_low = Vec::new();
    for group in [GaugeGroup::Z3, GaugeGroup::Su3] {
        let s = setup(group, 0.1, 8);
        let rows = infidelity_scan(group.tag(), "0_1^++", 0.1, &s.mlwf, &s.vacuum, s.l, 0, &[1, 3, 5]).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].infidelity <= w[0].infidelity + 1e-12, "{rows:?}");
        }
        at_low.push(rows[1].infidelity);
    }
    // the non-abelian theory is much harder to excite locally at weak coupling
    assert!(at_low[0] < at_low[1], "{at_low:?}");
}

#[test]
fn partial_overlap_limits() {
    let s = setup(GaugeGroup::Z3, 0.5, 6);
    let sup = support_window(6, 2, 3).unwrap();
    assert_eq!(sup, vec![1, 2, 3]);
    assert_eq!(support_window(6, 0, 3).unwrap(), vec![5, 0, 1]);
    let a = partial_overlap_operator(&s.vacuum, &s.vacuum, 6, &sup).unwrap();
    let rdm = reduced_density_matrix_dense(&s.vacuum, 6, &sup).unwrap();
    assert!(max_dev(&a, &rdm) < 1e-14);
    assert!((trace(&a) - ONE).norm() < 1e-12);
    assert!(support_window(6, 0, 7).is_err());
    assert!(support_window(6, 0, 2).is_err());
    // product states differing only inside the window give a rank-one overlap
    let mut vac = Vector::zeros(729);
    vac[0] = ONE;
    let mut flip = Vector::zeros(729);
    flip[9] = C64::new(0.6, 0.0);
    flip[18] = C64::new(0.0, 0.8);
    let a = partial_overlap_operator(&flip, &vac, 6, &[3, 4]).unwrap();
    let (_, sv, _) = svd_full(&a).unwrap();
    assert!((sv[0] - 1.0).abs() < 1e-14 && sv[1] < 1e-14);
    let _ = split_window(&flip, 6, &[3, 4]).unwrap();
}

#[test]
fn operator_chain_reproduces_the_unitary() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let u = haar_unitary(27, &mut rng);
    let op = CreationOperator { support: vec![0, 1, 2], center: 1, unitary: u.clone(), fidelity: 0.0, singular_values: vec![], null_dim: 0 };
    let mpo = op.to_mpo(3, 0).unwrap();
    assert!(max_dev(&mpo.to_dense().unwrap(), &u) < 1e-12);
    let embedded = op.to_mpo(5, 1).unwrap();
    let want = qpwave::linalg::kron(&qpwave::linalg::kron(&Mat::eye(3), &u), &Mat::eye(3));
    assert!(max_dev(&embedded.to_dense().unwrap(), &want) < 1e-12);
    // a single-site unitary gives a bond-dimension-one chain
    let single = CreationOperator { support: vec![0], center: 0, unitary: haar_unitary(3, &mut rng), fidelity: 0.0, singular_values: vec![], null_dim: 0 };
    assert!(single.to_mpo(6, 2).unwrap().bond_dims().iter().all(|&b| b == 1));
    let ident = CreationOperator { support: vec![0, 1, 2], center: 1, unitary: Mat::eye(27), fidelity: 0.0, singular_values: vec![], null_dim: 0 };
    let chain = ident.to_mpo(4, 0).unwrap();
    assert!(chain.bond_dims().iter().all(|&b| b == 1));
    assert!(max_dev(&chain.to_dense().unwrap(), &Mat::eye(81)) < 1e-12);
}
