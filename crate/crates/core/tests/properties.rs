use betawolff::coeffs::{beta2, density_bucket, CoeffTable};
use betawolff::measure::{Ball, DiscreteMeasure};
use betawolff::riesz::{haar_energy, riesz_energy, suppressed_kernel};
use betawolff::stopping::{Stopper, StoppingConfig};
use betawolff::{Lattice, LatticeParams};
use proptest::prelude::*;

/// Clustered planar clouds: a few random blobs at different scales.
fn cloud() -> impl Strategy<Value = DiscreteMeasure> {
    prop::collection::vec(((-1.0f64..1.0), (-1.0f64..1.0), (-4i32..0), 1usize..40), 1..5).prop_flat_map(|blobs| {
        let total: usize = blobs.iter().map(|b| b.3).sum();
        prop::collection::vec(((-1.0f64..1.0), (-1.0f64..1.0), (0.1f64..1.0)), total).prop_map(move |jitter| {
            let mut coords = Vec::new();
            let mut weights = Vec::new();
            let mut k = 0;
            for &(cx, cy, e, count) in &blobs {
                let s = 10f64.powi(e);
                for _ in 0..count {
                    let (dx, dy, w) = jitter[k];
                    coords.extend([cx + s * dx, cy + s * dy]);
                    weights.push(w);
                    k += 1;
                }
            }
            DiscreteMeasure::new(1, coords, weights).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lattice_invariants_hold(mu in cloud()) {
        let lat = Lattice::build(&mu, LatticeParams::default()).unwrap();
        let report = lat.check_invariants();
        prop_assert!(report.ok(), "{:?}", report);
        for c in lat.cubes() {
            for &s in &c.children {
                prop_assert!(lat.is_within(s, c.id));
            }
        }
    }

    #[test]
    fn coefficient_bounds(mu in cloud()) {
        let lat = Lattice::build(&mu, LatticeParams::default()).unwrap();
        let table = CoeffTable::build(&lat, None).unwrap();
        let a0n = lat.a0();
        for k in table.all() {
            prop_assert!(k.big_theta <= k.density && k.density < a0n * k.big_theta);
            prop_assert!(k.poisson >= k.density * (1.0 - 1e-12));
            prop_assert!(k.beta >= 0.0 && k.beta.is_finite());
        }
    }

    #[test]
    fn stopping_families_are_disjoint(mu in cloud(), delta0 in 1e-4f64..0.5) {
        let lat = Lattice::build(&mu, LatticeParams::default()).unwrap();
        let table = CoeffTable::build(&lat, None).unwrap();
        let s = Stopper::new(&table, StoppingConfig { delta0, ..Default::default() }).unwrap();
        for c in lat.cubes().iter().filter(|c| !c.leaf).take(20) {
            let fam = s.families(c.id).unwrap();
            for (i, &a) in fam.stop.iter().enumerate() {
                prop_assert!(lat.is_within(a, c.id) && a != c.id);
                for &b in &fam.stop[i + 1..] {
                    prop_assert!(!lat.is_within(a, b) && !lat.is_within(b, a));
                }
            }
            let mut prev = true;
            for m in [1.0, 2.0, 4.0, 16.0] {
                let now = s.db_witness(c.id, m).unwrap().is_some();
                prop_assert!(prev || !now);
                prev = now;
            }
            let mut atoms: Vec<usize> = Vec::new();
            for j in 0..4 {
                let e = s.enlarged_cube(c.id, j).unwrap();
                prop_assert!(atoms.iter().all(|a| e.atoms.binary_search(a).is_ok()));
                atoms = e.atoms;
            }
        }
        let corona = s.corona().unwrap();
        prop_assert_eq!(corona.uncovered, 0);
        prop_assert_eq!(corona.bad_overlaps, 0);
    }

    #[test]
    fn haar_pieces_sum_to_variance(mu in cloud(), seed in 0u64..1000) {
        let lat = Lattice::build(&mu, LatticeParams::default()).unwrap();
        let f: Vec<f64> = (0..mu.len()).map(|i| ((i as u64 * 2654435761 + seed) % 1000) as f64 / 500.0 - 1.0).collect();
        let total: f64 = haar_energy(&lat, &f).unwrap().iter().sum();
        let m = mu.total_mass();
        let mean = (0..mu.len()).map(|i| mu.weight(i) * f[i]).sum::<f64>() / m;
        let var: f64 = (0..mu.len()).map(|i| mu.weight(i) * (f[i] - mean).powi(2)).sum();
        prop_assert!((total - var).abs() <= 1e-9 * var.max(1e-300));
    }

    #[test]
    fn beta_is_rigid_and_homogeneous(mu in cloud(), angle in 0.0f64..6.3, t in 0.1f64..10.0, r in 0.05f64..2.0) {
        let (c, s) = (angle.cos(), angle.sin());
        let moved = mu.transformed(1.0, Some(&[c, -s, s, c]), Some(&[0.3, -0.7]), t).unwrap();
        let x = mu.point(0).to_vec();
        let y = moved.point(0).to_vec();
        let a = beta2(&mu, &Ball::new(x, r).unwrap()).unwrap().beta;
        let b = beta2(&moved, &Ball::new(y, r).unwrap()).unwrap().beta;
        prop_assert!((b * b - t * a * a).abs() <= 1e-6 * (t * a * a).max(1e-12));
    }

    #[test]
    fn riesz_energy_scales_and_translates(mu in cloud(), t in 0.1f64..10.0) {
        let base = riesz_energy(&mu);
        let heavy = riesz_energy(&mu.transformed(1.0, None, None, t).unwrap());
        prop_assert!((heavy - t.powi(3) * base).abs() <= 1e-9 * t.powi(3) * base.max(1e-300));
        let shifted = riesz_energy(&mu.transformed(1.0, None, Some(&[5.0, 5.0]), 1.0).unwrap());
        prop_assert!((shifted - base).abs() <= 1e-6 * base.max(1e-300));
    }

    #[test]
    fn bucket_brackets_value(v in 1e-12f64..1e12, a0 in 16u32..64, n in 1usize..3) {
        let (b, k) = density_bucket(v, a0 as f64, n).unwrap();
        let base = (a0 as f64).powi(n as i32);
        prop_assert!(b <= v && v < b * base);
        prop_assert_eq!(b, base.powi(k));
    }

    #[test]
    fn suppressed_kernel_is_dominated(x in prop::array::uniform2(-1.0f64..1.0), y in prop::array::uniform2(-1.0f64..1.0), px in 0.0f64..1.0, py in 0.0f64..1.0) {
        let d2 = (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2);
        prop_assume!(d2 + px * py > 0.0);
        let k = suppressed_kernel(&x, &y, px, py, 1).unwrap();
        let mag = k[0].hypot(k[1]);
        prop_assert!(mag <= (1.0 + 1e-12) / (d2 + px * py).sqrt());
    }
}
