mod common;

use common::{brute_force_apsp, integer_graph, values};
use proptest::prelude::*;
use sgt_core::exact::{bellman_finite_horizon, floyd_warshall, floyd_warshall_path, greedy_sgt_trajectory, sgtdp, ExactError};
use sgt_core::graph::{ceil_log2, g4};
use sgt_core::trajectory_cost;

#[test]
fn oracle_agrees_on_the_four_node_fixture() {
    let g = g4();
    let bf = brute_force_apsp(&g);
    assert_eq!(&bf[..4], &[0.0, 1.0, 2.0, 3.0]);
    assert_eq!(values(sgtdp(&g).top()), bf);
}

#[test]
fn greedy_trajectory_on_the_fixture() {
    let g = g4();
    let states = greedy_sgt_trajectory(&sgtdp(&g), 0, 3).unwrap().flatten().unwrap();
    assert_eq!(states, vec![0, 0, 1, 2, 3]);
    assert_eq!(trajectory_cost(&g, &states).value(), 3.0);
    assert_eq!(greedy_sgt_trajectory(&sgtdp(&g), 3, 0).unwrap_err(), ExactError::Unreachable { start: 3, goal: 0 });
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn all_solvers_match_enumeration(n in 1usize..=12, density in 0.0f64..=1.0, seed in any::<u64>()) {
        let g = integer_graph(n, density, seed);
        let bf = brute_force_apsp(&g);
        prop_assert_eq!(values(sgtdp(&g).top()), bf.clone());
        prop_assert_eq!(values(&floyd_warshall(&g)), bf.clone());
        prop_assert_eq!(values(bellman_finite_horizon(&g).top()), bf);
    }

    #[test]
    fn levels_never_increase(n in 1usize..=12, density in 0.0f64..=1.0, seed in any::<u64>()) {
        let g = integer_graph(n, density, seed);
        let stack = sgtdp(&g);
        prop_assert_eq!(stack.depth(), ceil_log2(n));
        for w in stack.tables.windows(2) {
            for (hi, lo) in w[0].values().iter().zip(w[1].values()) {
                prop_assert!(lo <= hi);
            }
        }
    }

    #[test]
    fn converged_table_is_a_metric(n in 1usize..=12, density in 0.0f64..=1.0, seed in any::<u64>()) {
        let g = integer_graph(n, density, seed);
        let top = sgtdp(&g).top().clone();
        for i in 0..n {
            prop_assert_eq!(top.get(i, i).value(), 0.0);
            for j in 0..n {
                for m in 0..n {
                    prop_assert!(top.get(i, j) <= top.get(i, m) + top.get(m, j));
                }
            }
        }
    }

    #[test]
    fn greedy_extraction_is_optimal(n in 1usize..=12, density in 0.0f64..=1.0, seed in any::<u64>()) {
        let g = integer_graph(n, density, seed);
        let stack = sgtdp(&g);
        let k = stack.depth();
        for s in 0..n {
            for t in 0..n {
                let v = stack.top().get(s, t);
                match greedy_sgt_trajectory(&stack, s, t) {
                    Ok(tree) => {
                        let states = tree.flatten().unwrap();
                        prop_assert_eq!(states.len(), (1 << k) + 1);
                        prop_assert_eq!((states[0], states[1 << k]), (s, t));
                        prop_assert_eq!(trajectory_cost(&g, &states), v);
                        let fw = floyd_warshall_path(&g, s, t).unwrap();
                        prop_assert_eq!(trajectory_cost(&g, &fw), v);
                    }
                    Err(e) => {
                        prop_assert!(v.is_max());
                        prop_assert_eq!(e, ExactError::Unreachable { start: s, goal: t });
                    }
                }
            }
        }
    }
}
