use degen_core::approximator::{
    appendixb_pair, delta_decomposition, predict_h, spot_check_invariance, target_h, ScalarFunctionTriple, Tensor3,
};
use degen_core::counterexamples::{
    builtin_catalog, error_floor, fold_pair, make_degenerate_pair, make_degenerate_pair_unchecked, periodize, ring12,
    tetrahedra_pair, DegenerateParams, EnergyPair, ExtraPair, C_INDEX, C_PRIME_INDEX, RING_EDGE, W_INDEX, W_PRIME_INDEX,
};
use degen_core::distinctness::{congruent, per_node_distance_multisets_equal, CongruenceOptions};
use degen_core::geometry::{displacement, minimum_image_displacement, neighbor_list, Atom, LabeledPointCloud};
use degen_core::graph::{build_graph, compare_distance_wl, wl_refine, NeighborhoodPolicy, Quantizer};
use degen_core::xyz::{read_xyz_str, write_xyz_string};
use degen_core::{Error, Species};
use nalgebra::{Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn smooth_triple() -> ScalarFunctionTriple {
    ScalarFunctionTriple::new(
        |a| Ok(0.3 + a.distinguished()[0].cos() + 0.01 * a.rest().iter().map(|x| x * x).sum::<f64>()),
        |a| Ok((0.4 * a.distinguished()[0]).exp() + 0.1 * a.rest().iter().sum::<f64>()),
        |a| Ok(a.rest().iter().map(|x| x.abs()).sum::<f64>()),
    )
}

#[test]
fn distance_matrices_differ_only_in_swapped_c_w_entries() {
    let pair = make_degenerate_pair_unchecked(&DegenerateParams::example()).unwrap();
    let n = pair.plus.len();
    let d2 = |c: &LabeledPointCloud, i: usize, j: usize| minimum_image_displacement(c, i, j).distance_sq();
    let cs = [C_INDEX, C_PRIME_INDEX];
    let ws = [W_INDEX, W_PRIME_INDEX];
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (d2(&pair.plus, i, j), d2(&pair.minus, i, j));
            let c_w = (cs.contains(&i) && ws.contains(&j)) || (ws.contains(&i) && cs.contains(&j));
            if c_w {
                // the other W of the same C
                let swap = |k: usize| if k == W_INDEX { W_PRIME_INDEX } else if k == W_PRIME_INDEX { W_INDEX } else { k };
                assert_eq!(a, d2(&pair.minus, swap(i), swap(j)), "({i},{j})");
            } else {
                assert_eq!(a, b, "({i},{j})");
            }
        }
    }
    assert_eq!(d2(&pair.plus, C_INDEX, W_INDEX), 3.0);
    assert_eq!(d2(&pair.plus, C_INDEX, W_PRIME_INDEX), 11.0);
}

#[test]
fn one_extra_w_pair_stays_degenerate() {
    let params = DegenerateParams::example().with_extra(ExtraPair::W {
        y: -0.75,
        z: 0.5,
        label: Species::from("W"),
    });
    assert_eq!(params.manifold_dimension(), 9);
    let pair = make_degenerate_pair(&params).unwrap();
    assert_eq!(pair.plus.len(), 8);
    assert!(pair.swap_identities().iter().all(|s| s.holds_exactly()));
}

#[test]
fn folded_pairs() {
    let pair = make_degenerate_pair_unchecked(&DegenerateParams::example()).unwrap();
    let q = Quantizer::tolerant(1e-9);
    for (repeats, points) in [(2, 12), (5, 30)] {
        let (a, b) = fold_pair(&pair, repeats).unwrap();
        assert_eq!(a.len(), points);
        let (_, _, cmp) = compare_distance_wl(&a, &b, &NeighborhoodPolicy::FullyConnected, &q, None).unwrap();
        assert!(cmp.equal, "P={repeats}");
        assert!(!congruent(&a, &b, &CongruenceOptions::default()).unwrap().is_congruent());
    }
}

#[test]
fn neighbor_list_matches_brute_force() {
    let pair = make_degenerate_pair_unchecked(&DegenerateParams::example()).unwrap();
    let cloud = &pair.plus;
    let p = pair.period();
    let cutoff = 3.0 * p;
    let nl = neighbor_list(cloud, cutoff).unwrap();
    let reach = (cutoff / p).ceil() as i32 + 1;
    for i in 0..cloud.len() {
        let mut brute = Vec::new();
        for j in 0..cloud.len() {
            for n in -reach - 1..=reach + 1 {
                let d = displacement(cloud, i, j, [n, 0, 0]);
                let dist = d.distance();
                if dist > 0.0 && dist <= cutoff {
                    brute.push((j, n, d.distance_sq().to_bits()));
                }
            }
        }
        let got: Vec<_> = nl[i].iter().map(|nb| (nb.index, nb.replica()[0], nb.distance_sq().to_bits())).collect();
        brute.sort();
        assert_eq!(got, brute, "node {i}");
    }
}

#[test]
fn k_nearest_includes_ties_on_the_ring() {
    let (ring, _) = ring12(RING_EDGE);
    let g = build_graph(&ring, &NeighborhoodPolicy::KNearest { k: 1 }, &Quantizer::default()).unwrap();
    for i in 0..ring.len() {
        assert_eq!(g.edges(i).iter().map(|e| e.multiplicity as usize).sum::<usize>(), 2, "node {i}");
    }
}

#[test]
fn large_extra_periods_change_nothing() {
    let pair = make_degenerate_pair_unchecked(&DegenerateParams::example()).unwrap();
    let p = pair.period();
    let policy = NeighborhoodPolicy::Cutoff { radius: 3.0 * p };
    let q = Quantizer::default();
    let huge = periodize(&pair, Some(100.0 * p), Some(100.0 * p)).unwrap();
    let fp = |c: &LabeledPointCloud| wl_refine(&build_graph(c, &policy, &q).unwrap(), None);
    assert_eq!(fp(&pair.plus).iterations, fp(&huge.plus).iterations);
    let (_, _, cmp) = compare_distance_wl(&huge.plus, &huge.minus, &policy, &q, None).unwrap();
    assert!(cmp.equal);
}

#[test]
fn random_clouds_differ_early() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut cloud = || {
        let atoms = (0..6)
            .map(|_| Atom::new("A", [rng.random_range(0.0..3.0), rng.random_range(0.0..3.0), rng.random_range(0.0..3.0)]))
            .collect();
        LabeledPointCloud::finite(atoms).unwrap()
    };
    let (a, b) = (cloud(), cloud());
    let (_, _, cmp) = compare_distance_wl(&a, &b, &NeighborhoodPolicy::FullyConnected, &Quantizer::default(), None).unwrap();
    assert!(cmp.first_divergent_iteration.is_some_and(|k| k <= 2));
}

#[test]
fn per_node_differences_are_seen_at_iteration_one() {
    let (a, b) = tetrahedra_pair();
    assert!(!per_node_distance_multisets_equal(&a, &b, 1e-9).unwrap());
    let (_, _, cmp) = compare_distance_wl(&a, &b, &NeighborhoodPolicy::FullyConnected, &Quantizer::tolerant(1e-9), None).unwrap();
    assert_eq!(cmp.first_divergent_iteration, Some(1));
}

#[test]
fn catalog_round_trips_through_xyz() {
    for entry in builtin_catalog() {
        for cloud in [&entry.a, &entry.b] {
            let back = read_xyz_str(&write_xyz_string(cloud)).unwrap();
            assert_eq!(back.cell(), cloud.cell());
            for i in 0..cloud.len() {
                assert!((back.position(i) - cloud.position(i)).abs().max() <= 1e-12);
                assert_eq!(back.species(i), cloud.species(i));
            }
        }
    }
}

#[test]
fn target_gap_is_192() {
    let (rp, rm) = appendixb_pair();
    let diff = target_h(&rp).unwrap() - target_h(&rm).unwrap();
    assert!((diff - Tensor3::identity() * 192.0).abs().max() <= 1e-8);
}

#[test]
fn delta_decomposition_matches_reference() {
    let d = delta_decomposition(&smooth_triple()).unwrap();
    assert_eq!(d.delta2, Tensor3::zeros());
    assert!((d.delta0 - d.expected_delta0()).abs().max() <= 1e-12, "{}", d.delta0);
    assert!((d.delta1 - d.expected_delta1()).abs().max() <= 1e-12, "{}", d.delta1);
    for k in 0..3 {
        assert!(d.delta0[(k, k)].abs() <= 1e-12 && d.delta1[(k, k)].abs() <= 1e-12);
        assert_eq!(d.delta1[(k, 0)], 0.0);
    }
    let a = d.audit;
    assert_eq!((a.f0_surviving, a.f0_terms, a.f1_surviving, a.f1_terms, a.f2_surviving), (2, 10, 8, 20, 0));
    assert_eq!(d.zeta.rest().len(), 16);
    assert!(d.kappa.iter().all(|k| k.rest().len() == 24));
}

#[test]
fn invariance_harness_separates_good_and_bad_evaluators() {
    let (rp, _) = appendixb_pair();
    assert!(spot_check_invariance(&smooth_triple(), &rp, 5, 1).unwrap());
    let order_dependent = ScalarFunctionTriple::new(
        |a| Ok(a.rest().iter().enumerate().map(|(k, x)| k as f64 * x).sum()),
        |_| Ok(0.0),
        |_| Ok(0.0),
    );
    assert!(!spot_check_invariance(&order_dependent, &rp, 5, 1).unwrap());
}

#[test]
fn prediction_is_rotation_equivariant() {
    let (rp, _) = appendixb_pair();
    let rot = Rotation3::from_axis_angle(&Vector3::y_axis(), 0.83) * Rotation3::from_axis_angle(&Vector3::x_axis(), -1.1);
    let r = rot.into_inner();
    let turned = rp.transformed(&r, &Vector3::zeros());
    let fns = smooth_triple();
    let h = predict_h(&rp, &fns).unwrap();
    let h_turned = predict_h(&turned, &fns).unwrap();
    assert!((h_turned - r * h * r.transpose()).abs().max() <= 1e-8 * (1.0 + h.abs().max()));
}

#[test]
fn error_floor_values() {
    let paper = [EnergyPair::new(-0.92, 2.43), EnergyPair::new(0.39, 2.07), EnergyPair::new(-0.65, -0.04)];
    assert!((error_floor(&paper).unwrap() - 1.0961).abs() < 1e-4);
    assert_eq!(error_floor(&[EnergyPair::new(0.5, 0.5)]).unwrap(), 0.0);
    assert_eq!(error_floor(&[EnergyPair::new(0.0, 2.0)]).unwrap(), 1.0);
    assert!(matches!(error_floor(&[]), Err(Error::InvalidInput(_))));
}
