use std::sync::Arc;

use mchaos_core::kernels::{
    bump_selfconvolve, check_positive_definite, kernel_matrix, psd_threshold, remainder_kernel, ExpBump,
};
use mchaos_core::math::linalg::{semidefinite_cholesky, symmetric_eigenvalues};
use mchaos_core::BAdicGrid;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn nalgebra_min_eig(a: &[f64], n: usize) -> f64 {
    let m = DMatrix::from_row_slice(n, n, a);
    m.symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn jacobi_matches_nalgebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in [1usize, 2, 5, 17, 40] {
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v: f64 = rng.random_range(-1.0..1.0);
                a[i * n + j] = v;
                a[j * n + i] = v;
            }
        }
        let ours = symmetric_eigenvalues(&a, n).unwrap();
        let mut theirs: Vec<f64> = DMatrix::from_row_slice(n, n, &a)
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .collect();
        theirs.sort_by(f64::total_cmp);
        for (x, y) in ours.iter().zip(&theirs) {
            assert!((x - y).abs() < 1e-10, "n = {n}: {x} vs {y}");
        }
    }
}

#[test]
fn semidefinite_cholesky_reconstructs_rank_deficient() {
    let n = 12;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let v: Vec<f64> = (0..n * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = (0..3).map(|k| v[i * 3 + k] * v[j * 3 + k]).sum();
        }
    }
    let l = semidefinite_cholesky(&a, n, 1e-10).unwrap();
    for i in 0..n {
        for j in 0..n {
            let s: f64 = (0..n).map(|k| l[i * n + k] * l[j * n + k]).sum();
            assert!((s - a[i * n + j]).abs() < 1e-9);
        }
    }
    a[0] -= 1.0;
    assert!(semidefinite_cholesky(&a, n, 1e-10).is_err());
}

#[test]
fn fft_certificate_matches_dense_circulant() {
    // triangle kernel of half-width w is PSD; 1 - 8|t| on [0, 1/4] is not
    for (w, indefinite) in [(0.2, false), (0.25, true)] {
        let k = move |t: &[f64]| {
            let r = t[0].abs();
            if indefinite {
                if r <= w {
                    1.0 - 8.0 * r
                } else {
                    0.0
                }
            } else {
                (1.0 - r / w).max(0.0)
            }
        };
        let (n, h) = (32usize, 1.0 / 32.0);
        let rep = check_positive_definite(&k, 1, n, h, 1e-8);
        let l = 2 * n;
        let mut a = vec![0.0; l * l];
        for i in 0..l {
            for j in 0..l {
                let lag = (i as i64 - j as i64).rem_euclid(l as i64) as usize;
                a[i * l + j] = k(&[lag.min(l - lag) as f64 * h]);
            }
        }
        let min = nalgebra_min_eig(&a, l);
        assert!(
            (rep.min_eigenvalue - min).abs() < 1e-9,
            "{} vs {min}",
            rep.min_eigenvalue
        );
        assert_eq!(rep.pass, !indefinite);
    }
}

#[test]
fn psd_threshold_matches_nalgebra_bisection() {
    let profile = Arc::new(bump_selfconvolve(&ExpBump::default(), 1, 513).unwrap());
    let grid = BAdicGrid::new(1, 2, 5).unwrap();
    let r = remainder_kernel(|_, _| 0.0, profile, 0.0);
    let lam = psd_threshold(&r, &grid, 0.0, 10.0, 1e-9)
        .unwrap()
        .expect("psd for large lambda");
    let base = kernel_matrix(&|t, s| r.evaluate(t, s), &grid);
    let n = grid.cell_count();
    let at = |l: f64| {
        let a: Vec<f64> = base.iter().map(|x| x + l).collect();
        nalgebra_min_eig(&a, n)
    };
    let scale = base.iter().map(|x| x.abs()).fold(0.0, f64::max) + lam;
    assert!(at(lam + 1e-8) >= -1e-10 * scale * n as f64);
    if lam > 1e-8 {
        assert!(at(lam - 1e-6) < 0.0);
    }
}
