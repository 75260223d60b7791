use chainscope::chains::{build_chain_digraph, decompose};
use chainscope::config::{ModelSpec, RunConfig};
use chainscope::entropy::{
    restricted_spectral_entropy, separated_count, spectral_chain_entropy, CountMode,
};
use chainscope::model::{build_grid_model, FiniteModel, GridSpec, MapSpec, DEFAULT_NODE_CAP};
use chainscope::pointwise::{
    chain_sensitive_star, is_chain_continuous, is_sensitive, is_shadowable,
};
use chainscope::zoo;
use proptest::prelude::*;
use std::collections::BTreeMap;

/// Points on a line with an arbitrary self-map.
fn line_model() -> impl Strategy<Value = FiniteModel> {
    (3usize..=10).prop_flat_map(|n| {
        (
            prop::collection::vec(0.0f64..1.0, n),
            prop::collection::vec(0..n, n),
        )
            .prop_map(|(pts, map)| {
                let dist = pts
                    .iter()
                    .map(|a| pts.iter().map(|b| (a - b).abs()).collect())
                    .collect();
                FiniteModel::from_map("line", dist, &map).unwrap()
            })
    })
}

fn grid_model() -> impl Strategy<Value = FiniteModel> {
    (
        0usize..5,
        prop::sample::select(vec![1.0 / 16.0, 1.0 / 32.0]),
    )
        .prop_map(|(k, h)| {
            let name = ["identity", "rotation", "doubling", "tent", "north_south"][k];
            let mut params = BTreeMap::new();
            if name == "rotation" {
                params.insert("alpha".to_string(), 0.25);
            }
            if name == "north_south" {
                params.insert("lambda".to_string(), 3.0);
                params.insert("phase".to_string(), h / 2.0);
            }
            build_grid_model(&GridSpec {
                map: MapSpec::from_name(name, &params).unwrap(),
                mesh: h,
                node_cap: DEFAULT_NODE_CAP,
            })
            .unwrap()
        })
}

fn ordered(a: f64, b: f64) -> (f64, f64) {
    (a.min(b), a.max(b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn digraph_grows_with_delta(m in line_model(), a in 0.0f64..0.4, b in 0.0f64..0.4) {
        let (d1, d2) = ordered(a, b);
        let g1 = build_chain_digraph(&m, d1).unwrap();
        let g2 = build_chain_digraph(&m, d2).unwrap();
        for (i, j) in g1.edges() {
            prop_assert!(g2.has_edge(i, j));
        }
        let (c1, c2) = (decompose(&g1), decompose(&g2));
        for v in &c1.cr_nodes {
            prop_assert!(c2.cr_nodes.contains(v));
        }
        for i in 0..m.len() {
            let (r1, r2) = (g1.reachable_from(&[i]), g2.reachable_from(&[i]));
            prop_assert!(r1.iter().zip(&r2).all(|(&p, &q)| !p || q));
        }
        prop_assert!(spectral_chain_entropy(&g1).value <= spectral_chain_entropy(&g2).value + 1e-9);
    }

    #[test]
    fn component_entropy_bounded_by_whole(m in line_model(), d in 0.0f64..0.4) {
        let g = build_chain_digraph(&m, d).unwrap();
        let whole = spectral_chain_entropy(&g).value;
        for nodes in &decompose(&g).components {
            prop_assert!(restricted_spectral_entropy(&g, nodes).value <= whole + 1e-9);
        }
    }

    #[test]
    fn shadowing_monotone(m in line_model(), e in (0.01f64..0.5, 0.01f64..0.5), d in (0.0f64..0.3, 0.0f64..0.3)) {
        let (e1, e2) = ordered(e.0, e.1);
        let (d1, d2) = ordered(d.0, d.1);
        let g1 = build_chain_digraph(&m, d1).unwrap();
        let g2 = build_chain_digraph(&m, d2).unwrap();
        for x in 0..m.len() {
            let fine = is_shadowable(&m, &g1, x, e1).unwrap().holds;
            prop_assert!(!fine || is_shadowable(&m, &g1, x, e2).unwrap().holds);
            let coarse_delta = is_shadowable(&m, &g2, x, e1).unwrap().holds;
            prop_assert!(!coarse_delta || fine);
            prop_assert!(!is_chain_continuous(&m, &g1, x, e1).unwrap().holds || fine);
        }
    }

    #[test]
    fn chain_sensitivity_monotone(m in line_model(), r in (0.05f64..0.8, 0.05f64..0.8), d in (0.0f64..0.3, 0.0f64..0.3)) {
        let (r1, r2) = ordered(r.0, r.1);
        let (d1, d2) = ordered(d.0, d.1);
        let g1 = build_chain_digraph(&m, d1).unwrap();
        let g2 = build_chain_digraph(&m, d2).unwrap();
        for x in 0..m.len() {
            if chain_sensitive_star(&m, &g1, x, r2).unwrap().is_some() {
                prop_assert!(chain_sensitive_star(&m, &g2, x, r1).unwrap().is_some());
            }
        }
    }

    #[test]
    fn sensitivity_implies_chain_sensitivity(m in grid_model(), x_frac in 0.0f64..1.0, r in 0.2f64..0.45) {
        let x = ((x_frac * m.len() as f64) as usize).min(m.len() - 1);
        let radii = [4.0 * m.mesh(), m.mesh()];
        if is_sensitive(&m, x, r, &radii).unwrap().sensitive {
            let delta = m.proj_error().max(m.chain_floor());
            let g = build_chain_digraph(&m, delta).unwrap();
            let r_chain = r - 2.0 * m.proj_error();
            prop_assert!(chain_sensitive_star(&m, &g, x, r_chain).unwrap().is_some());
        }
    }

    #[test]
    fn separated_count_monotone(m in line_model(), r in (0.01f64..0.5, 0.01f64..0.5), n in 1usize..5, cut in 1usize..10) {
        let (r1, r2) = ordered(r.0, r.1);
        let all: Vec<usize> = (0..m.len()).collect();
        let part: Vec<usize> = all.iter().copied().take(cut.min(m.len())).collect();
        let count = |k: &[usize], n: usize, r: f64| separated_count(&m, k, n, r, CountMode::Exact, 24).unwrap();
        prop_assert!(count(&all, n, r2) <= count(&all, n, r1));
        prop_assert!(count(&all, n, r1) <= count(&all, n + 1, r1));
        prop_assert!(count(&part, n, r1) <= count(&all, n, r1));
    }

    #[test]
    fn config_round_trips(theta in 0.0f64..1.0, seed in any::<u64>(), k in 0usize..8) {
        let mut cfg = zoo::ZOO[k].config();
        cfg.analysis.theta = theta;
        cfg.run.seed = seed;
        let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        prop_assert_eq!(back.hash(), cfg.hash());
        prop_assert_eq!(back, cfg);
    }
}

#[test]
fn explicit_spec_builds_from_toml() {
    let text = r#"
[model]
kind = "explicit"
dist = [[0.0, 1.0], [1.0, 0.0]]
map = [1, 0]
[schedule]
epsilons = [0.5]
deltas = [0.5]
radii = [0.5]
"#;
    let cfg = RunConfig::from_toml(text).unwrap();
    assert!(matches!(cfg.model, ModelSpec::Explicit { .. }));
    let m = cfg.model.build().unwrap();
    assert_eq!(m.len(), 2);
    assert_eq!(m.image(0), 1);
}
