use proptest::prelude::*;

use qpert::cluster::{creation_apply, exp_apply, truncate_log, ClusterVector, Collection, Truncation};
use qpert::lattice::{cluster_metric, cluster_metric_rel, Boundary, Volume};
use qpert::linalg::{self, C64};
use qpert::oneparticle::{Dispersion, Hoppings};
use qpert::scatter::{FockVector, Shape, WavePacket};
use qpert::space::StateSpace;

fn c64() -> impl Strategy<Value = C64> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| C64::new(a, b))
}

/// A collection on `n` sites of a `d`-level chain, one entry per chosen support mask.
fn collection(n: usize, e: usize) -> impl Strategy<Value = Collection> {
    prop::collection::vec((1u32..(1 << n), prop::collection::vec(c64(), e.pow(n as u32))), 0..8).prop_map(
        move |entries| {
            let mut c = Collection::new();
            for (mask, amps) in entries {
                let sites: Vec<usize> = (0..n).filter(|&s| mask >> s & 1 == 1).collect();
                let len = e.pow(sites.len() as u32);
                let u = ClusterVector::new(&sites, &amps[..len], e).unwrap();
                c.add(u.support(), u.amps(), C64::from(0.5));
            }
            c
        },
    )
}

fn tfi_like(t1: f64, t2: f64) -> Dispersion {
    Dispersion::from_hoppings(&Hoppings {
        offsets: vec![vec![0], vec![1], vec![-1], vec![2], vec![-2]],
        values: vec![C64::from(1.0), C64::from(t1), C64::from(t1), C64::new(0.0, t2), C64::new(0.0, -t2)],
        extent: None,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exp_log_roundtrip((d, n, coll) in (2usize..4, 2usize..5).prop_flat_map(|(d, n)| (Just(d), Just(n), collection(n, d - 1)))) {
        let space = StateSpace::new(d, n).unwrap();
        let vol = Volume::chain(n, Boundary::Open).unwrap();
        let v = exp_apply(&coll, &space).unwrap();
        let back = truncate_log(&v, &space, &Truncation::unbounded(), &vol).unwrap();
        let mut diff = back.clone();
        diff.axpy(C64::from(-1.0), &coll);
        prop_assert!(diff.triple_norm() <= 1e-12 * (1.0 + coll.triple_norm()));
    }

    #[test]
    fn creations_commute_or_annihilate(a in prop::collection::vec(c64(), 4), b in prop::collection::vec(c64(), 2),
                                       x in prop::collection::vec(c64(), 81), s in 0usize..4, t in 0usize..4) {
        let space = StateSpace::new(3, 4).unwrap();
        let sites_a = [s, (s + 1) % 4];
        let mut sa = sites_a;
        sa.sort();
        if sa[0] == sa[1] { return Ok(()); }
        let u = ClusterVector::new(&sa, &a, 2).unwrap();
        let w = ClusterVector::new(&[t], &b, 2).unwrap();
        let uw = creation_apply(&u, &creation_apply(&w, &x, &space).unwrap(), &space).unwrap();
        let wu = creation_apply(&w, &creation_apply(&u, &x, &space).unwrap(), &space).unwrap();
        if sa.contains(&t) {
            prop_assert!(uw.iter().chain(&wu).all(|z| *z == C64::from(0.0)));
        } else {
            prop_assert!(linalg::norm(&linalg::sub(&uw, &wu)) <= 1e-14 * (1.0 + linalg::norm(&uw)));
        }
    }

    #[test]
    fn triple_norm_is_a_norm(a in collection(4, 1), b in collection(4, 1), c in c64()) {
        let (na, nb) = (a.triple_norm(), b.triple_norm());
        let mut sum = a.clone();
        sum.axpy(C64::from(1.0), &b);
        prop_assert!(sum.triple_norm() <= na + nb + 1e-12);
        let mut scaled = a.clone();
        scaled.scale(c);
        prop_assert!((scaled.triple_norm() - c.norm() * na).abs() <= 1e-12 * (1.0 + na));
        prop_assert_eq!(Collection::new().triple_norm(), 0.0);
    }

    #[test]
    fn ring_shifts_are_isometric(a in collection(5, 1), g in -7i64..7) {
        let vol = Volume::chain(5, Boundary::Periodic).unwrap();
        let moved = a.translated(&[g], &vol, 1).unwrap();
        prop_assert!((moved.triple_norm() - a.triple_norm()).abs() < 1e-12);
        let back = moved.translated(&[-g], &vol, 1).unwrap();
        let mut diff = back;
        diff.axpy(C64::from(-1.0), &a);
        prop_assert!(diff.triple_norm() < 1e-14);
    }

    #[test]
    fn cluster_metric_properties(sites in prop::collection::btree_set(0usize..12, 1..5), extra in 0usize..12, g in 0usize..12) {
        let sites: Vec<usize> = sites.into_iter().collect();
        let ring = Volume::chain(12, Boundary::Periodic).unwrap();
        let line = Volume::chain(12, Boundary::Open).unwrap();
        let d = cluster_metric(&sites, &line);
        prop_assert_eq!(d as usize, sites[sites.len() - 1] - sites[0]);
        let mut rev = sites.clone();
        rev.reverse();
        prop_assert_eq!(cluster_metric(&rev, &ring), cluster_metric(&sites, &ring));
        let mut shifted: Vec<usize> = sites.iter().map(|s| (s + g) % 12).collect();
        shifted.sort();
        prop_assert_eq!(cluster_metric(&shifted, &ring), cluster_metric(&sites, &ring));
        let mut bigger = sites.clone();
        if !bigger.contains(&extra) {
            bigger.push(extra);
            bigger.sort();
        }
        for vol in [&ring, &line] {
            prop_assert!(cluster_metric(&sites, vol) <= cluster_metric(&bigger, vol));
            prop_assert!(cluster_metric_rel(&bigger, &sites, vol) <= cluster_metric(&bigger, vol));
            prop_assert_eq!(cluster_metric_rel(&sites, &sites, vol), 0);
        }
    }

    #[test]
    fn free_evolution_is_a_group(t1 in -0.2f64..0.2, t2 in -0.1f64..0.1, s in -20.0f64..20.0, t in -20.0f64..20.0,
                                 p0 in 0.0f64..1.0, x in -5.0f64..5.0) {
        let disp = tfi_like(t1, t2);
        let f = WavePacket::new(64, p0, 0.2, Shape::RaisedCosine { power: 2 }, 0.0).unwrap();
        let a = f.evolved(s, &disp).evolved(t, &disp);
        let b = f.evolved(s + t, &disp);
        prop_assert!(a.values().iter().zip(b.values()).all(|(u, v)| (u - v).norm() < 1e-10));
        prop_assert!((b.inner(&b).re - 1.0).abs() < 1e-12);
        let c = f.shifted(x).evolved(t, &disp);
        let d = f.evolved(t, &disp).shifted(x);
        prop_assert!(c.values().iter().zip(d.values()).all(|(u, v)| (u - v).norm() < 1e-10));
        let g = WavePacket::new(64, (p0 + 0.5) % 1.0, 0.2, Shape::Bump, 3.0).unwrap();
        let two = FockVector::product(vec![f.clone(), g.clone()]);
        let moved = two.free_evolve(t, &disp);
        prop_assert!((moved.norm() - two.norm()).abs() < 1e-10);
    }

    #[test]
    fn hermitian_hoppings_give_real_dispersion(t1 in -0.3f64..0.3, t2 in -0.3f64..0.3, p in 0.0f64..1.0) {
        let disp = tfi_like(t1, t2);
        prop_assert!(disp.eval_complex(&[p]).im.abs() < 1e-14);
    }
}
