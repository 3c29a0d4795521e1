use dbacs_core::linalg::{cholesky, covariance, floor_spectrum, sqrtm_psd, sym_eig, Mat, RIDGE};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    Mat::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn random_symmetric(rng: &mut ChaCha8Rng, d: usize) -> Mat {
    let a = random_mat(rng, d, d);
    a.add(&a.transpose()).unwrap().scale(0.5)
}

fn gram_plus_identity(rng: &mut ChaCha8Rng, d: usize) -> Mat {
    let b = random_mat(rng, d, d);
    b.matmul(&b.transpose()).unwrap().add(&Mat::identity(d)).unwrap()
}

/// Double loop over rows, kept deliberately naive.
fn brute_force_covariance(x: &Mat) -> Mat {
    let (n, d) = (x.rows(), x.cols());
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for j in 0..d {
            mean[j] += x[(i, j)] / n as f64;
        }
    }
    let mut out = Mat::zeros(d, d);
    for i in 0..n {
        for a in 0..d {
            for b in 0..d {
                out[(a, b)] += (x[(i, a)] - mean[a]) * (x[(i, b)] - mean[b]) / (n - 1) as f64;
            }
        }
    }
    out
}

fn max_abs_diff(a: &Mat, b: &Mat) -> f64 {
    a.sub(b).unwrap().max_abs()
}

/// Determinant by Gaussian elimination with partial pivoting.
fn determinant(a: &Mat) -> f64 {
    let n = a.rows();
    let mut m: Vec<Vec<f64>> = (0..n).map(|i| a.row(i).to_vec()).collect();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).unwrap();
        if m[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            m.swap(pivot, col);
            det = -det;
        }
        det *= m[col][col];
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for c in col..n {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    det
}

#[test]
fn covariance_matches_brute_force_on_100_random_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let x = random_mat(&mut rng, 50, 4);
        let c = covariance(&x, false).unwrap();
        assert!(max_abs_diff(&c, &brute_force_covariance(&x)) <= 1e-12);
        assert!(c.asymmetry() <= 1e-10);
    }
}

#[test]
fn covariance_of_centered_input_skips_mean() {
    let x = Mat::from_rows(&[&[1.0, -1.0], &[-1.0, 1.0]]).unwrap();
    let c = covariance(&x, true).unwrap();
    assert_eq!(c, Mat::from_rows(&[&[2.0, -2.0], &[-2.0, 2.0]]).unwrap());
}

#[test]
fn eigendecomposition_reconstructs_100_random_symmetric_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let a = random_symmetric(&mut rng, 6);
        let e = sym_eig(&a).unwrap();
        let rebuilt = e.reconstruct_with(|l| l);
        assert!(max_abs_diff(&rebuilt, &a) <= 1e-8);
        let vtv = e.vectors.transpose().matmul(&e.vectors).unwrap();
        assert!(max_abs_diff(&vtv, &Mat::identity(6)) <= 1e-8);
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        for i in 0..6 {
            let v = e.vectors.column(i);
            let first = v.iter().find(|x| x.abs() > 1e-10).unwrap();
            assert!(*first > 0.0);
        }
    }
}

#[test]
fn eigenvalues_sum_to_trace_and_multiply_to_determinant() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..100 {
        let a = gram_plus_identity(&mut rng, 5);
        let e = sym_eig(&a).unwrap();
        assert!((e.values.iter().sum::<f64>() - a.trace()).abs() <= 1e-8);
        let det = determinant(&a);
        let prod: f64 = e.values.iter().product();
        assert!(((prod - det) / det).abs() <= 1e-6);
    }
}

#[test]
fn eigenpairs_satisfy_the_defining_equation() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let a = random_symmetric(&mut rng, 7);
    let e = sym_eig(&a).unwrap();
    for i in 0..7 {
        let v = Mat::from_vec(7, 1, e.vectors.column(i)).unwrap();
        let av = a.matmul(&v).unwrap();
        assert!(max_abs_diff(&av, &v.scale(e.values[i])) <= 1e-8);
    }
}

#[test]
fn cholesky_reconstructs_100_random_spd_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..100 {
        let a = gram_plus_identity(&mut rng, 8);
        let l = cholesky(&a).unwrap();
        for i in 0..8 {
            for j in i + 1..8 {
                assert_eq!(l[(i, j)], 0.0);
            }
        }
        assert!(max_abs_diff(&l.matmul(&l.transpose()).unwrap(), &a) <= 1e-8);
    }
}

#[test]
fn cholesky_of_product_recovers_the_factor() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let mut l = random_mat(&mut rng, 5, 5);
    for i in 0..5 {
        for j in i + 1..5 {
            l[(i, j)] = 0.0;
        }
        l[(i, i)] = l[(i, i)].abs() + 0.5;
    }
    let recovered = cholesky(&l.matmul(&l.transpose()).unwrap()).unwrap();
    assert!(max_abs_diff(&recovered, &l) <= 1e-10);
}

#[test]
fn cholesky_two_by_two_by_hand() {
    let l = cholesky(&Mat::from_rows(&[&[4.0, 2.0], &[2.0, 3.0]]).unwrap()).unwrap();
    let want = Mat::from_rows(&[&[2.0, 0.0], &[1.0, 2f64.sqrt()]]).unwrap();
    assert!(max_abs_diff(&l, &want) <= 1e-15);
    assert_eq!(cholesky(&Mat::identity(3)).unwrap(), Mat::identity(3));
}

#[test]
fn psd_square_root_squares_back_on_100_random_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..100 {
        // rank-deficient PSD: 5x5 from a 5x3 factor
        let b = random_mat(&mut rng, 5, 3);
        let a = b.matmul(&b.transpose()).unwrap();
        let s = sqrtm_psd(&a).unwrap();
        assert!(s.asymmetry() <= 1e-10);
        assert!(max_abs_diff(&s.matmul(&s).unwrap(), &a) <= 1e-6);
        assert!(sym_eig(&s).unwrap().values.iter().all(|v| *v >= -1e-8));
    }
}

#[test]
fn psd_square_root_is_accurate_up_to_condition_1e6() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let q = sym_eig(&random_symmetric(&mut rng, 4)).unwrap().vectors;
    let a = q.matmul(&Mat::diag(&[1.0, 1e-2, 1e-4, 1e-6])).unwrap().matmul(&q.transpose()).unwrap();
    let s = sqrtm_psd(&a).unwrap();
    assert!(max_abs_diff(&s.matmul(&s).unwrap(), &a) <= 1e-6);
}

#[test]
fn spectral_floor_leaves_well_conditioned_matrices_alone() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let a = gram_plus_identity(&mut rng, 6);
    assert!(max_abs_diff(&floor_spectrum(&a, RIDGE).unwrap(), &a) <= 1e-12);
    let singular = Mat::from_rows(&[&[1.0, 1.0], &[1.0, 1.0]]).unwrap();
    let floored = floor_spectrum(&singular, RIDGE).unwrap();
    assert!(cholesky(&floored).is_ok());
    assert!(cholesky(&singular).is_err());
}

proptest! {
    #[test]
    fn covariance_ignores_row_order(seed in any::<u64>(), n in 3usize..30, d in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_mat(&mut rng, n, d);
        let mut order: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
        let mut data = Vec::new();
        for &i in &order {
            data.extend_from_slice(x.row(i));
        }
        let shuffled = Mat::from_vec(n, d, data).unwrap();
        let gap = max_abs_diff(&covariance(&x, false).unwrap(), &covariance(&shuffled, false).unwrap());
        prop_assert!(gap <= 1e-12);
    }

    #[test]
    fn covariance_is_positive_semidefinite(seed in any::<u64>(), n in 2usize..20, d in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = covariance(&random_mat(&mut rng, n, d), false).unwrap();
        let e = sym_eig(&c).unwrap();
        prop_assert!(e.values.iter().all(|v| *v >= -1e-10));
    }
}

#[test]
fn large_matrices_take_the_tridiagonal_path_and_still_reconstruct() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let d = dbacs_core::linalg::JACOBI_MAX_DIM + 40;
    let b = random_mat(&mut rng, d, 60);
    // rank-deficient plus a full-rank symmetric part
    let a = b.matmul(&b.transpose()).unwrap().add(&random_symmetric(&mut rng, d)).unwrap();
    let e = sym_eig(&a).unwrap();
    assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
    let scale = a.max_abs();
    assert!(max_abs_diff(&e.reconstruct_with(|l| l), &a) <= 1e-10 * scale);
    let vtv = e.vectors.transpose().matmul(&e.vectors).unwrap();
    assert!(max_abs_diff(&vtv, &Mat::identity(d)) <= 1e-10);
    assert!((e.values.iter().sum::<f64>() - a.trace()).abs() <= 1e-8 * scale);
}

#[test]
fn tridiagonal_path_handles_diagonal_and_repeated_spectra() {
    let d = dbacs_core::linalg::JACOBI_MAX_DIM + 1;
    let diag: Vec<f64> = (0..d).map(|i| (i % 7) as f64).collect();
    let e = sym_eig(&Mat::diag(&diag)).unwrap();
    let mut want = diag.clone();
    want.sort_by(|a, b| b.total_cmp(a));
    assert!(e.values.iter().zip(&want).all(|(a, b)| (a - b).abs() <= 1e-12));
    assert!(max_abs_diff(&e.reconstruct_with(|l| l), &Mat::diag(&diag)) <= 1e-12);
    let id = sym_eig(&Mat::identity(d)).unwrap();
    assert!(id.values.iter().all(|v| (v - 1.0).abs() <= 1e-12));
}
