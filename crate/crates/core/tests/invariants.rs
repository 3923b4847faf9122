use mchaos_core::field::LayerValues;
use mchaos_core::math::harmonic;
use mchaos_core::spectral::{fourier_coefficients, FourierSpectrum};
use mchaos_core::{BAdicGrid, DensityField};
use proptest::prelude::*;

fn field_strategy() -> impl Strategy<Value = DensityField> {
    (1usize..=2, 2u32..=3, 1u32..=4).prop_flat_map(|(d, b, level)| {
        let grid = BAdicGrid::new(d, b, level).unwrap();
        prop::collection::vec(0.0f64..10.0, grid.cell_count())
            .prop_map(move |v| DensityField::from_values(grid, v, 0).unwrap())
    })
}

proptest! {
    #[test]
    fn index_round_trip(d in 1usize..=3, b in 2u32..=5, level in 0u32..=3, seed in any::<u64>()) {
        let grid = BAdicGrid::new(d, b, level).unwrap();
        let flat = (seed as usize) % grid.cell_count();
        let idx = grid.multi_index(flat);
        prop_assert_eq!(grid.flat_index(&idx).unwrap(), flat);
        let c = grid.cell_center(&idx);
        let v = grid.min_vertex(&idx).unwrap();
        for (c, v) in c.iter().zip(&v) {
            prop_assert!((c - v - grid.cell_width() / 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn coarse_graining_keeps_mass(f in field_strategy()) {
        let total = f.total_mass();
        for k in 0..=f.grid().level() {
            let c = f.coarse_grain(k).unwrap();
            prop_assert!((c.total_mass() - total).abs() <= 1e-12 * total.max(1.0));
            let s: f64 = f.cell_masses(k).unwrap().iter().sum();
            prop_assert!((s - total).abs() <= 1e-12 * total.max(1.0));
        }
    }

    #[test]
    fn unit_layer_is_identity(f in field_strategy()) {
        prop_assume!(f.grid().level() > 0);
        let layer = LayerValues { grid: *f.grid(), values: vec![1.0; f.grid().cell_count()] };
        let g = f.multiply_layer(&layer).unwrap();
        prop_assert_eq!(g.values(), f.values());
        prop_assert_eq!(g.level(), 1);
    }

    #[test]
    fn spectrum_invariants(f in field_strategy()) {
        let n = f.grid().cells_per_axis();
        let s = fourier_coefficients(&f, n / 2).unwrap();
        let d = f.grid().d();
        let zero = s.get(&vec![0; d]).unwrap();
        prop_assert!((zero.re - f.total_mass()).abs() <= 1e-12 * f.total_mass().max(1.0));
        prop_assert!(zero.im.abs() <= 1e-12 * f.total_mass().max(1.0));
        let tol = 1e-12 * zero.re.max(1e-300);
        s.for_each(|k, c| {
            let neg: Vec<i64> = k.iter().map(|a| -a).collect();
            let m = s.get(&neg).unwrap();
            assert!((c - m.conj()).norm() <= tol, "{k:?}");
            assert!(c.norm() <= zero.re + tol);
        });
        let grid_l2 = f.values().iter().map(|v| v * v).sum::<f64>() * f.grid().cell_volume();
        let e = s.nyquist_energy().unwrap();
        prop_assert!((e - grid_l2).abs() <= 1e-8 * grid_l2.max(1e-300));
    }
}

#[test]
fn harmonic_matches_direct_sum() {
    for n in [0u64, 1, 2, 10, 1000, 65_536, 65_537, 1_000_000] {
        let direct: f64 = (1..=n).rev().map(|k| 1.0 / k as f64).sum();
        assert!((harmonic(n) - direct).abs() < 1e-12, "n = {n}");
    }
}

#[test]
fn synthetic_spectrum_lookup() {
    let s = FourierSpectrum::from_fn(2, 3, |n| mchaos_core::math::Complex64::new(n[0] as f64, n[1] as f64)).unwrap();
    assert_eq!(s.get(&[2, -3]).unwrap().re, 2.0);
    assert_eq!(s.get(&[2, -3]).unwrap().im, -3.0);
    assert!(s.get(&[4, 0]).is_none());
    assert!(s.get(&[0]).is_none());
}
