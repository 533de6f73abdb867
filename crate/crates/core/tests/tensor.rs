mod common;

use common::*;
use proptest::prelude::*;
use qpwave::hilbert::{apply_local_operator, reduced_density_matrix_dense, sparse_hamiltonian, split_window};
use qpwave::krylov::lanczos_lowest;
use qpwave::linalg::{
    dagger, expm_hermitian, haar_unitary, norm, random_hermitian, random_vector, svd, vdot, Mat, Vector, C64, ONE,
};
use qpwave::model::{build_hamiltonian, Boundary, GaugeGroup, LocalHamiltonian};
use qpwave::sparse::CsrMatrix;
use qpwave::tensor::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn obc(group: GaugeGroup, lambda: f64, l: usize) -> LocalHamiltonian {
    build_hamiltonian(group, lambda, l, Boundary::Open).unwrap()
}

fn ed_ground(h: &LocalHamiltonian) -> (f64, Vector) {
    let sp = sparse_hamiltonian(h).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let v0 = random_vector(sp.n, &mut rng);
    let res = lanczos_lowest(|v| sp.matvec(v), &v0, sp.n, 1, 1e-9, 400).unwrap();
    (res.values[0], res.vectors[0].clone())
}

fn fidelity(a: &Vector, b: &Vector) -> f64 {
    vdot(a, b).norm_sqr() / (vdot(a, a).re * vdot(b, b).re)
}

fn dense_from_csr(h: &CsrMatrix) -> Mat {
    h.to_dense()
}

#[test]
fn mps_dense_round_trip_and_canonical_forms() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let psi = random_vector(3usize.pow(6), &mut rng);
    let mut m = Mps::from_dense(&psi, 6, 3, &Truncation::exact()).unwrap();
    assert_eq!(m.bond_dims(), vec![3, 9, 27, 9, 3]);
    let back = m.to_dense().unwrap();
    assert!(norm(&(&back - &psi)) < 1e-12);
    for c in [0, 3, 5, 2] {
        m.canonicalize(c);
        assert!((m.norm() - 1.0).abs() < 1e-12);
        assert!(norm(&(&m.to_dense().unwrap() - &psi)) < 1e-12);
        // tensors left of the center are left-orthogonal
        for j in 0..c {
            let (cl, d, cr) = m.tensors[j].dim();
            let a = m.tensors[j].clone().into_shape_with_order((cl * d, cr)).unwrap();
            assert!(max_dev(&dagger(&a).dot(&a), &Mat::eye(cr)) < 1e-12);
        }
        for j in c + 1..6 {
            let (cl, d, cr) = m.tensors[j].dim();
            let a = m.tensors[j].clone().into_shape_with_order((cl, d * cr)).unwrap();
            assert!(max_dev(&a.dot(&dagger(&a)), &Mat::eye(cl)) < 1e-12);
        }
    }
    let p = Mps::product(&[0, 1, 2, 0], 3);
    let dense = p.to_dense().unwrap();
    assert_eq!(dense[9 + 2 * 3], ONE);
}

#[test]
fn hamiltonian_mpo_reproduces_dense_operator() {
    for group in [GaugeGroup::Z3, GaugeGroup::Su3] {
        for lambda in [0.0, 0.3, 1.0] {
            let h = obc(group, lambda, 6);
            let mpo = Mpo::from_local_hamiltonian(&h).unwrap();
            let dense = dense_from_csr(&sparse_hamiltonian(&h).unwrap());
            assert!(max_dev(&mpo.to_dense().unwrap(), &dense) < 1e-10, "{group:?} {lambda}");
            assert!(mpo.max_bond() <= 20);
        }
    }
    // Z3 at lambda = 1/2 has a short automaton
    let mpo = Mpo::from_local_hamiltonian(&obc(GaugeGroup::Z3, 0.5, 10)).unwrap();
    assert!(mpo.max_bond() <= 8, "bond dims {:?}", mpo.bond_dims());
    assert!(Mpo::from_local_hamiltonian(&build_hamiltonian(GaugeGroup::Z3, 0.5, 6, Boundary::Periodic).unwrap()).is_err());
}

#[test]
fn dmrg_flat_limit_is_product_state() {
    let l = 12;
    let h = Mpo::from_local_hamiltonian(&obc(GaugeGroup::Z3, 0.0, l)).unwrap();
    let res = dmrg_ground_state(&h, &DmrgOptions::default()).unwrap();
    assert!(res.converged);
    assert!((res.energy + 2.0 * l as f64).abs() < 1e-9, "{}", res.energy);
    let mut st = res.state.clone();
    for b in 0..l - 1 {
        assert!(st.entanglement_entropy(b).unwrap() < 1e-9);
    }
}

#[test]
fn dmrg_matches_exact_diagonalization() {
    for group in [GaugeGroup::Z3, GaugeGroup::Su3] {
        let lh = obc(group, 0.5, 10);
        let h = Mpo::from_local_hamiltonian(&lh).unwrap();
        let res = dmrg_ground_state(&h, &DmrgOptions::default()).unwrap();
        let (e0, v0) = ed_ground(&lh);
        assert!((res.energy - e0).abs() < 1e-8, "{group:?}: {} vs {e0}", res.energy);
        assert!(fidelity(&res.state.to_dense().unwrap(), &v0) > 1.0 - 1e-8);
        // energy is monotone across sweeps
        for w in res.sweep_energies.windows(2) {
            assert!(w[1] <= w[0] + 1e-10, "{:?}", res.sweep_energies);
        }
        let direct = h.expectation(&res.state).unwrap();
        assert!((direct.re - res.energy).abs() < 1e-8);
    }
}

#[test]
fn dmrg_vacuum_is_homogeneous_in_the_bulk() {
    let l = 40;
    let lh = obc(GaugeGroup::Z3, 0.5, l);
    let h = Mpo::from_local_hamiltonian(&lh).unwrap();
    let opts = DmrgOptions { trunc: Truncation { cutoff: 1e-12, max_chi: 40 }, ..Default::default() };
    let mut res = dmrg_ground_state(&h, &opts).unwrap();
    let dens: Vec<f64> = (l / 2 - 2..l / 2 + 2)
        .map(|j| {
            let t = lh.term(j);
            res.state.reduced_density_matrix(t.sites[0], 3).unwrap().dot(&t.matrix).diag().sum().re
        })
        .collect();
    for w in dens.windows(2) {
        assert!((w[0] - w[1]).abs() < 1e-6, "{dens:?}");
    }
}

#[test]
fn krylov_oracle_matches_dense_exponential() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 3usize.pow(5);
    let hd = random_hermitian(n, &mut rng);
    let trip: Vec<(u32, u32, C64)> =
        (0..n).flat_map(|r| (0..n).map(move |c| (r as u32, c as u32))).map(|(r, c)| (r, c, hd[[r as usize, c as usize]])).collect();
    let h = CsrMatrix::from_triplets(n, trip);
    let v = random_vector(n, &mut rng);
    let traj = krylov_exact_evolve(&v, &h, 0.05, 4).unwrap();
    for (s, x) in traj.iter().enumerate() {
        let exact = expm_hermitian(&hd, 0.05 * s as f64).unwrap().dot(&v);
        assert!(norm(&(x - &exact)) < 1e-12, "step {s}");
        let e = vdot(x, &h.matvec(x)).re;
        assert!((e - vdot(&v, &h.matvec(&v)).re).abs() < 1e-10);
    }
    // diagonal operator gives exact phases
    let diag: Vec<(u32, u32, C64)> = (0..n).map(|i| (i as u32, i as u32, C64::new(i as f64 * 0.1, 0.0))).collect();
    let hdg = CsrMatrix::from_triplets(n, diag);
    let traj = krylov_exact_evolve(&v, &hdg, 0.3, 2).unwrap();
    for i in 0..n {
        let want = v[i] * C64::from_polar(1.0, -0.6 * i as f64 * 0.1);
        assert!((traj[2][i] - want).norm() < 1e-12);
    }
}

#[test]
fn tdvp_tracks_exact_evolution() {
    let l = 10;
    let lh = obc(GaugeGroup::Z3, 0.5, l);
    let h = Mpo::from_local_hamiltonian(&lh).unwrap();
    let digits: Vec<u8> = (0..l).map(|j| [0u8, 1, 0, 2][j % 4]).collect();
    let psi0 = Mps::product(&digits, 3);
    let dense0 = psi0.to_dense().unwrap();
    let (t_max, dt) = (5.0, 0.05);
    let mut config = EvolutionConfig::new(dt, t_max);
    config.trunc = Truncation { cutoff: 1e-10, max_chi: 64 };
    let sp = sparse_hamiltonian(&lh).unwrap();
    let exact = krylov_exact_evolve(&dense0, &sp, dt, config.steps()).unwrap();
    let e0 = h.expectation(&psi0).unwrap().re;
    let mut worst_norm = 0.0f64;
    let mut worst_energy = 0.0f64;
    let mut last_fid = 0.0;
    tdvp_evolve(psi0, &h, config.clone(), |n, _t, st| {
        worst_norm = worst_norm.max((st.norm() - 1.0).abs());
        worst_energy = worst_energy.max((h.expectation(st)?.re - e0).abs());
        if n % 20 == 0 || n == config.steps() {
            last_fid = fidelity(&st.to_dense()?, &exact[n]);
            assert!(last_fid > 0.999, "step {n}: fidelity {last_fid}");
        }
        Ok(())
    })
    .unwrap();
    assert!(last_fid > 0.999);
    assert!(worst_norm < 1e-10, "norm drift {worst_norm}");
    assert!(worst_energy < 1e-6 * 20.0, "energy drift {worst_energy}");
}

#[test]
fn tdvp_leaves_eigenstates_stationary() {
    let l = 8;
    let lh = obc(GaugeGroup::Su3, 0.4, l);
    let h = Mpo::from_local_hamiltonian(&lh).unwrap();
    let gs = dmrg_ground_state(&h, &DmrgOptions::default()).unwrap();
    let mut start = gs.state.clone();
    let rho0 = start.reduced_density_matrix(3, 2).unwrap();
    // same truncation as the ground-state search, so nothing new is discarded
    let mut config = EvolutionConfig::new(0.1, 1.0);
    config.trunc.cutoff = DmrgOptions::default().trunc.cutoff;
    let mut worst_fid = 0.0f64;
    let mut worst_rdm = 0.0f64;
    tdvp_evolve(gs.state.clone(), &h, config, |_, _, st| {
        worst_fid = worst_fid.max(1.0 - gs.state.overlap(st)?.norm_sqr());
        worst_rdm = worst_rdm.max(max_dev(&st.reduced_density_matrix(3, 2)?, &rho0));
        Ok(())
    })
    .unwrap();
    assert!(worst_fid < 1e-8, "{worst_fid}");
    assert!(worst_rdm < 1e-8, "{worst_rdm}");
}

#[test]
fn apply_mpo_matches_dense_application() {
    let l = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let psi = Mps::random(l, 3, 6, &mut rng);
    let dense = psi.to_dense().unwrap();
    let u = haar_unitary(27, &mut rng);
    let op = Mpo::embed(&u, 3, l, 3, 1e-14).unwrap();
    let out = apply_mpo(&op, &psi, &Truncation { cutoff: 1e-14, max_chi: 200 }).unwrap();
    let want = apply_local_operator(&u, &[3, 4, 5], l, &dense);
    let got = out.to_dense().unwrap();
    assert!(fidelity(&got, &want) > 1.0 - 1e-10);
    assert!((norm(&got) - 1.0).abs() < 1e-10);
    // identity chain
    let id = apply_mpo(&Mpo::identity(l, 3), &psi, &Truncation::default()).unwrap();
    assert!(fidelity(&id.to_dense().unwrap(), &dense) > 1.0 - 1e-12);
    // a Hamiltonian is not unitary; compare the full vector
    let lh = obc(GaugeGroup::Z3, 0.3, l);
    let hmpo = Mpo::from_local_hamiltonian(&lh).unwrap();
    let hpsi = apply_mpo(&hmpo, &psi, &Truncation::exact()).unwrap().to_dense().unwrap();
    let want = sparse_hamiltonian(&lh).unwrap().matvec(&dense);
    assert!(norm(&(&hpsi - &want)) < 1e-10 * norm(&want));
}

#[test]
fn mpo_sum_of_disjoint_unitaries() {
    let l = 6;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let u1 = haar_unitary(3, &mut rng);
    let u2 = haar_unitary(3, &mut rng);
    let a = Mpo::embed(&u1, 1, l, 3, 1e-14).unwrap();
    let b = Mpo::embed(&u2, 4, l, 3, 1e-14).unwrap();
    let (c1, c2) = (C64::new(0.3, -0.2), C64::new(-1.1, 0.5));
    let sum = mpo_sum_compress(&[a.clone(), b.clone()], &[c1, c2], 1e-14, usize::MAX).unwrap();
    let want = site_op(&u1, 1, l).mapv(|z| z * c1) + site_op(&u2, 4, l).mapv(|z| z * c2);
    assert!(max_dev(&sum.to_dense().unwrap(), &want) < 1e-10);
    let raw = a.add(c1, &b, c2).unwrap();
    for (x, y) in sum.bond_dims().iter().zip(raw.bond_dims()) {
        assert!(*x <= y);
    }
    let single = mpo_sum_compress(&[a.clone()], &[c1], 1e-14, usize::MAX).unwrap();
    assert!(max_dev(&single.to_dense().unwrap(), &site_op(&u1, 1, l).mapv(|z| z * c1)) < 1e-12);
}

#[test]
fn reduced_density_matrices_match_partial_trace() {
    let l = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut psi = Mps::random(l, 3, 9, &mut rng);
    let dense = psi.to_dense().unwrap();
    for (start, width) in [(0, 1), (2, 3), (5, 3), (3, 5)] {
        let rho = psi.reduced_density_matrix(start, width).unwrap();
        let window: Vec<usize> = (start..start + width).collect();
        let want = reduced_density_matrix_dense(&dense, l, &window).unwrap();
        assert!(max_dev(&rho, &want) < 1e-12);
        assert!((rho.diag().sum() - ONE).norm() < 1e-12);
        assert!(max_dev(&rho, &dagger(&rho)) < 1e-13);
    }
    let mut p = Mps::product(&[1, 2, 0, 1], 3);
    let rho = p.reduced_density_matrix(1, 2).unwrap();
    assert!((rho.dot(&rho).diag().sum().re - 1.0).abs() < 1e-12);
    // a pair split by the window edge is mixed
    let mut bell = Vector::zeros(81);
    for a in 0..3 {
        bell[(a * 3 + a) * 3] = C64::new(1.0 / 3f64.sqrt(), 0.0);
    }
    let mut m = Mps::from_dense(&bell, 4, 3, &Truncation::exact()).unwrap();
    let rho = m.reduced_density_matrix(0, 2).unwrap();
    assert!((rho.dot(&rho).diag().sum().re - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn entanglement_entropy_matches_dense_schmidt() {
    let p = Mps::product(&[0, 1, 2], 3);
    let mut p2 = p.clone();
    assert!(p2.entanglement_entropy(1).unwrap().abs() < 1e-14);
    let mut pair = Vector::zeros(9);
    for a in 0..3 {
        pair[a * 3 + a] = C64::new(1.0 / 3f64.sqrt(), 0.0);
    }
    let mut m = Mps::from_dense(&pair, 2, 3, &Truncation::exact()).unwrap();
    assert!((m.entanglement_entropy(0).unwrap() - 3f64.ln()).abs() < 1e-12);

    let l = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut psi = Mps::random(l, 3, 12, &mut rng);
    let dense = psi.to_dense().unwrap();
    let prof = psi.entropy_profile().unwrap();
    for b in 0..l - 1 {
        let window: Vec<usize> = (0..=b).collect();
        let (_, sv, _) = svd(&split_window(&dense, l, &window).unwrap()).unwrap();
        let s: f64 = sv.iter().map(|x| x * x).filter(|&p| p > 1e-300).map(|p| -p * p.ln()).sum();
        assert!((prof[b] - s).abs() < 1e-10, "bond {b}");
    }
}

#[test]
fn truncation_respects_cap_and_reports_weight() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let psi = random_vector(3usize.pow(8), &mut rng);
    let m = Mps::from_dense(&psi, 8, 3, &Truncation { cutoff: 0.0, max_chi: 10 }).unwrap();
    assert!(m.max_bond() <= 10);
    assert!(m.log.max_discarded > 0.0);
    let mut c = Mps::from_dense(&psi, 8, 3, &Truncation::exact()).unwrap();
    c.compress(&Truncation { cutoff: 0.0, max_chi: 10 }).unwrap();
    assert!(c.max_bond() <= 10);
    assert!(c.log.steps > 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn canonicalization_preserves_the_state(seed in 0u64..1000, chi in 1usize..10, center in 0usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Mps::random(6, 3, chi, &mut rng);
        let before = m.to_dense().unwrap();
        m.canonicalize(center);
        let after = m.to_dense().unwrap();
        prop_assert!(norm(&(&after - &before)) < 1e-12);
        prop_assert!((m.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mps_addition_is_linear(seed in 0u64..1000, re in -2.0f64..2.0, im in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Mps::random(5, 3, 4, &mut rng);
        let b = Mps::random(5, 3, 3, &mut rng);
        let c = C64::new(re, im);
        let s = a.add(ONE, &b, c).unwrap();
        let want = a.to_dense().unwrap() + b.to_dense().unwrap().mapv(|z| z * c);
        prop_assert!(norm(&(&s.to_dense().unwrap() - &want)) < 1e-12);
    }
}
