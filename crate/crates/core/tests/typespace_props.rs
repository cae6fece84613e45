use ird_core::typespace::{
    dyadic_partition, empirical_cell_weights, sample_types, theoretical_cell_weights, Law1D,
    MeasureSpec,
};
use proptest::prelude::*;

fn law() -> impl Strategy<Value = Law1D> {
    prop_oneof![
        (-5.0..5.0f64, 0.01..5.0f64).prop_map(|(a, w)| Law1D::Uniform { a, b: a + w }),
        (0.1..5.0f64).prop_map(|rate| Law1D::Exponential { rate }),
        (0.5..4.0f64, 0.1..3.0f64).prop_map(|(alpha, x_min)| Law1D::Pareto { alpha, x_min }),
        (-3.0..3.0f64, -3.0..3.0f64, 0.0..=1.0f64).prop_map(|(v1, v2, p)| Law1D::TwoPoint { v1, v2, p }),
    ]
}

fn product(dim: usize) -> impl Strategy<Value = MeasureSpec> {
    prop::collection::vec(law(), dim).prop_map(|coords| MeasureSpec::Product { coords })
}

fn discrete() -> impl Strategy<Value = MeasureSpec> {
    (1usize..6, 1usize..=3)
        .prop_flat_map(|(k, d)| {
            (
                prop::collection::vec(prop::collection::vec(-10i32..10, d), k),
                prop::collection::vec(0.01..1.0f64, k),
            )
        })
        .prop_filter_map("distinct atoms", |(atoms, raw)| {
            let mut sorted = atoms.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != atoms.len() {
                return None;
            }
            let total: f64 = raw.iter().sum();
            let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
            let head: f64 = weights[..weights.len() - 1].iter().sum();
            *weights.last_mut().unwrap() = 1.0 - head;
            Some(MeasureSpec::Discrete {
                atoms: atoms
                    .into_iter()
                    .map(|a| a.into_iter().map(f64::from).collect())
                    .collect(),
                weights,
            })
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn theoretical_weights_sum_to_one(spec in prop_oneof![product(1), product(2), product(3), discrete()], m in 1u32..4) {
        let partition = dyadic_partition(&spec, m).unwrap();
        let w = theoretical_cell_weights(&spec, &partition).unwrap();
        prop_assert!(w.iter().all(|&x| x >= -1e-15));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn samples_are_covered_and_reproducible(spec in prop_oneof![product(2), discrete()], seed in any::<u64>()) {
        let a = sample_types(&spec, 200, seed).unwrap();
        let b = sample_types(&spec, 200, seed).unwrap();
        prop_assert_eq!(&a, &b);
        let partition = dyadic_partition(&spec, 2).unwrap();
        let w = empirical_cell_weights(&a, &partition).unwrap();
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn empirical_weights_converge() {
    let spec = MeasureSpec::Product {
        coords: vec![
            Law1D::Pareto { alpha: 2.5, x_min: 1.0 },
            Law1D::Exponential { rate: 1.5 },
        ],
    };
    let partition = dyadic_partition(&spec, 2).unwrap();
    let theo = theoretical_cell_weights(&spec, &partition).unwrap();
    let n = 100_000;
    let bound = 5.0
        * theo
            .iter()
            .map(|&m| (m / n as f64).sqrt())
            .fold(0.0, f64::max);
    let mut failures = 0;
    for seed in 0..20 {
        let sample = sample_types(&spec, n, seed).unwrap();
        let emp = empirical_cell_weights(&sample, &partition).unwrap();
        let dev = emp
            .iter()
            .zip(&theo)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if dev >= bound {
            failures += 1;
        }
    }
    assert_eq!(failures, 0);
}
