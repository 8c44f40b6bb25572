//! Property suites for the linear-algebra kernel: the Kronecker identities,
//! matrix-exponential laws, Lyapunov residuals and gain synthesis over
//! random inputs.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use syncnet_core::matcore::{
    eigenvalues, expm, kron, solve_lyapunov, stabilizing_gain,
};

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..=1.0))
}

fn random_dim(rng: &mut ChaCha8Rng) -> usize {
    rng.gen_range(1..=4)
}

#[test]
fn kronecker_mixed_product_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..100 {
        let (m, n, q) = (random_dim(&mut rng), random_dim(&mut rng), random_dim(&mut rng));
        let (p, r, s) = (random_dim(&mut rng), random_dim(&mut rng), random_dim(&mut rng));
        let a = random_matrix(&mut rng, m, n);
        let b = random_matrix(&mut rng, n, q);
        let c = random_matrix(&mut rng, p, r);
        let d = random_matrix(&mut rng, r, s);
        let lhs = kron(&(&a * &b), &(&c * &d));
        let rhs = kron(&a, &c) * kron(&b, &d);
        assert!((lhs - rhs).amax() <= 1e-10);
    }
}

#[test]
fn kronecker_associativity_and_distributivity() {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    for _ in 0..100 {
        let (ra, ca) = (random_dim(&mut rng), random_dim(&mut rng));
        let (rb, cb) = (random_dim(&mut rng), random_dim(&mut rng));
        let (rd, cd) = (random_dim(&mut rng), random_dim(&mut rng));
        let a = random_matrix(&mut rng, ra, ca);
        let b = random_matrix(&mut rng, rb, cb);
        let c = random_matrix(&mut rng, rb, cb);
        let d = random_matrix(&mut rng, rd, cd);

        let assoc_l = kron(&kron(&a, &b), &d);
        let assoc_r = kron(&a, &kron(&b, &d));
        assert!((assoc_l - assoc_r).amax() <= 1e-10);

        let dist_l = kron(&a, &(&b + &c));
        let dist_r = kron(&a, &b) + kron(&a, &c);
        assert!((dist_l - dist_r).amax() <= 1e-10);
    }
}

#[test]
fn kronecker_commutation_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    for _ in 0..100 {
        let (m, n) = (random_dim(&mut rng), random_dim(&mut rng));
        let (p, q) = (random_dim(&mut rng), random_dim(&mut rng));
        let a = random_matrix(&mut rng, m, n);
        let b = random_matrix(&mut rng, p, q);
        let direct = kron(&a, &b);
        let left = kron(&a, &DMatrix::identity(p, p)) * kron(&DMatrix::identity(n, n), &b);
        let right = kron(&DMatrix::identity(m, m), &b) * kron(&a, &DMatrix::identity(q, q));
        assert!((&direct - left).amax() <= 1e-10);
        assert!((&direct - right).amax() <= 1e-10);
    }
}

#[test]
fn kronecker_product_of_identity_factors() {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    for _ in 0..100 {
        let n = random_dim(&mut rng);
        let a = random_matrix(&mut rng, n, n);
        let b = random_matrix(&mut rng, n, n);
        let p = random_dim(&mut rng);
        let eye = DMatrix::<f64>::identity(p, p);
        let lhs = kron(&(&a * &b), &eye);
        let rhs = kron(&a, &eye) * kron(&b, &eye);
        assert!((lhs - rhs).amax() <= 1e-10);
    }
}

/// Shifts a random matrix so its spectrum is stable or at worst marginal.
fn random_stable_or_marginal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let raw = random_matrix(rng, n, n);
    let max_re = eigenvalues(&raw)
        .unwrap()
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let shift = if rng.gen_bool(0.5) { max_re } else { max_re + rng.gen_range(0.1..1.0) };
    raw - DMatrix::identity(n, n) * shift
}

#[test]
fn expm_semigroup_property() {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    for _ in 0..100 {
        let n = rng.gen_range(1..=4);
        let a = random_stable_or_marginal(&mut rng, n);
        let s = rng.gen_range(0.0..2.0);
        let t = rng.gen_range(0.0..2.0);
        let compound = expm(&a, s).unwrap() * expm(&a, t).unwrap();
        let direct = expm(&a, s + t).unwrap();
        let scale = direct.amax().max(1.0);
        assert!((compound - direct).amax() <= 1e-8 * scale);
    }
}

#[test]
fn expm_of_rotation_generators_stays_bounded() {
    for &omega in &[0.3, 1.0, 4.0] {
        let j = DMatrix::from_row_slice(2, 2, &[0.0, omega, -omega, 0.0]);
        for k in 0..=100 {
            let t = k as f64;
            let e = expm(&j, t).unwrap();
            // Orthogonal for every t: Frobenius norm sqrt(2).
            assert!(e.norm() <= 2.0f64.sqrt() + 1e-9);
        }
    }
}

#[test]
fn stabilizing_gain_succeeds_on_random_controllable_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let mut tried = 0;
    while tried < 100 {
        let n = rng.gen_range(1..=5);
        let m = rng.gen_range(1..=2);
        let a = random_matrix(&mut rng, n, n) * 2.0;
        let b = random_matrix(&mut rng, n, m);
        // Random real pairs are controllable almost surely; skip the rest.
        if !syncnet_core::matcore::pbh_controllable(&a, &b).unwrap().ok {
            continue;
        }
        tried += 1;
        let k = stabilizing_gain(&a, &b).unwrap();
        let max_re = eigenvalues(&(&a + &b * &k))
            .unwrap()
            .iter()
            .map(|l| l.re)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(max_re < 0.0, "closed-loop max Re = {max_re}");
    }
}

#[test]
fn lyapunov_residual_bound_on_random_stable_systems() {
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    for _ in 0..100 {
        let n = rng.gen_range(1..=4);
        let raw = random_matrix(&mut rng, n, n);
        let max_re = eigenvalues(&raw)
            .unwrap()
            .iter()
            .map(|l| l.re)
            .fold(f64::NEG_INFINITY, f64::max);
        let m = raw - DMatrix::identity(n, n) * (max_re + rng.gen_range(0.2..1.0));
        let g = random_matrix(&mut rng, n, n);
        let q = &g * g.transpose() + DMatrix::identity(n, n) * 0.05;
        let x = solve_lyapunov(&m, &q).unwrap();
        let residual = (m.transpose() * &x + &x * &m + &q).norm();
        assert!(residual <= 1e-8 * q.norm(), "residual {residual}");
    }
}

#[test]
fn eigenvalue_product_tracks_the_determinant() {
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    for _ in 0..100 {
        let n = rng.gen_range(1..=4);
        let a = random_matrix(&mut rng, n, n);
        let det = a.determinant();
        let prod = eigenvalues(&a)
            .unwrap()
            .iter()
            .fold(num_complex::Complex::new(1.0, 0.0), |p, l| p * l);
        let scale = det.abs().max(1e-3);
        assert!((prod.re - det).abs() <= 1e-8 * scale);
        assert!(prod.im.abs() <= 1e-8 * scale);
    }
}
