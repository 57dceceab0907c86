mod common;

use astro_core::nn::{gcn_layer, Tensor};
use astro_core::{build_topology, normalized_operator};
use common::chain_plant;
use proptest::prelude::*;

fn spectral_radius(op: &[f64], n: usize) -> f64 {
    // symmetric operator: power iteration on Op^2 converges to rho^2
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.37).sin()).collect();
    let mut rho = 0.0;
    for _ in 0..500 {
        let mut w = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                w[i] += op[i * n + j] * v[j];
            }
        }
        let mut u = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                u[i] += op[i * n + j] * w[j];
            }
        }
        let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        let vnorm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        rho = (norm / vnorm).sqrt();
        v = u.iter().map(|x| x / norm).collect();
    }
    rho
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn edge_count_matches_closed_form(sizes in prop::collection::vec(1usize..6, 1..6)) {
        let g = build_topology(&chain_plant(&sizes)).unwrap();
        let intra: usize = sizes.iter().map(|k| k * (k - 1)).sum();
        let inter: usize = sizes.windows(2).map(|w| 2 * w[0] * w[1]).sum();
        prop_assert_eq!(g.n_edges(), intra + inter);
        prop_assert!(g.validate().is_ok());
    }

    #[test]
    fn operator_is_symmetric_and_contractive(sizes in prop::collection::vec(1usize..5, 1..5)) {
        let g = build_topology(&chain_plant(&sizes)).unwrap();
        let n = g.n_nodes;
        let op = normalized_operator(&g).unwrap();
        for i in 0..n {
            for j in 0..n {
                prop_assert!((op[i * n + j] - op[j * n + i]).abs() < 1e-15);
            }
        }
        prop_assert!(spectral_radius(&op, n) <= 1.0 + 1e-9);
    }

    #[test]
    fn relabeling_conjugates_operator(sizes in prop::collection::vec(1usize..5, 1..5), seed in any::<u64>()) {
        let g = build_topology(&chain_plant(&sizes)).unwrap();
        let n = g.n_nodes;
        let mut perm: Vec<usize> = (0..n).collect();
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let op = normalized_operator(&g).unwrap();
        let op_p = normalized_operator(&g.permuted(&perm)).unwrap();
        for i in 0..n {
            for j in 0..n {
                prop_assert!((op_p[perm[i] * n + perm[j]] - op[i * n + j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn gcn_on_zero_input_is_relu_bias(n in 1usize..6, d in 1usize..5, bias in -1.0f64..1.0) {
        let op = Tensor::identity(n);
        let h = Tensor::zeros(vec![n, d]);
        let w = Tensor::matrix(d, d, vec![0.5; d * d]).unwrap();
        let b = Tensor::from_vec(vec![bias; d]);
        let out = gcn_layer(&h, &op, &w, &b).unwrap();
        prop_assert!(out.data().iter().all(|&v| v == bias.max(0.0)));
    }
}

#[test]
fn shipped_plant_config_has_expected_shape() {
    let plant = astro_core::PlantSpec::load(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/swat_plant.toml")).unwrap();
    assert_eq!(plant.n_nodes(), 51);
    let g = build_topology(&plant).unwrap();
    let sizes = [5usize, 11, 9, 9, 13, 4];
    let intra: usize = sizes.iter().map(|k| k * (k - 1)).sum();
    let inter: usize = sizes.windows(2).map(|w| 2 * w[0] * w[1]).sum();
    assert_eq!(g.n_edges(), intra + inter);
    assert_eq!(g.n_edges(), 1250);
}
