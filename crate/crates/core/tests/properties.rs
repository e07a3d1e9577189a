//! Randomized structural invariants.

use gch_core::baselines::inverted_dropout_mask;
use gch_core::gates::samplewise_gate;
use gch_core::metrics::logratio_deformation;
use gch_core::sampler::{sine_transform_2d, RandomStream, TransformDirection};
use gch_core::{GridSpec, LatentField, Site};
use proptest::prelude::*;

fn field_strategy(max_dim: usize) -> impl Strategy<Value = LatentField> {
    (1..=max_dim, 1..=max_dim).prop_flat_map(|(h, w)| {
        proptest::collection::vec(-50.0..50.0f64, h * w)
            .prop_map(move |v| LatentField::new(h, w, v).unwrap())
    })
}

proptest! {
    #[test]
    fn samplewise_gate_is_positive_mean_one(
        psi in field_strategy(6),
        gamma in -3.0..3.0f64,
    ) {
        let gate = samplewise_gate(&psi, gamma, 1.0);
        let vals = gate.values().values();
        prop_assert!(vals.iter().all(|&v| v > 0.0 && v.is_finite()));
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        prop_assert!((mean - 1.0).abs() < 1e-10);
    }

    #[test]
    fn sine_transform_round_trips(psi in field_strategy(8)) {
        let (h, w) = (psi.height(), psi.width());
        let fwd = sine_transform_2d(psi.values(), h, w, TransformDirection::Forward).unwrap();
        let back = sine_transform_2d(&fwd, h, w, TransformDirection::Inverse).unwrap();
        for (a, b) in back.iter().zip(psi.values()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        // orthonormality: energy is preserved
        let e0: f64 = psi.values().iter().map(|v| v * v).sum();
        let e1: f64 = fwd.iter().map(|v| v * v).sum();
        prop_assert!((e0 - e1).abs() < 1e-8 * (1.0 + e0));
    }

    #[test]
    fn dropout_mask_entries_are_binary(
        (h, w) in (1usize..=5, 1usize..=5),
        q in 0.05..1.0f64,
        seed in 0u64..1000,
    ) {
        let grid = GridSpec::new(h, w).unwrap();
        let mut rng = RandomStream::new(seed, 0).rng();
        let m = inverted_dropout_mask(&grid, q, &mut rng).unwrap();
        prop_assert!(m
            .values()
            .values()
            .iter()
            .all(|&v| v == 0.0 || (v - 1.0 / q).abs() < 1e-15));
    }

    #[test]
    fn deformation_identity_for_arbitrary_inputs(
        psi in field_strategy(5),
        gamma in -2.0..2.0f64,
        log_h in -3.0..3.0f64,
    ) {
        let (h_dim, w_dim) = (psi.height(), psi.width());
        prop_assume!(h_dim * w_dim >= 2);
        let h = LatentField::constant(h_dim, w_dim, log_h.exp());
        let xi = samplewise_gate(&psi, gamma, 1.0);
        let gated = LatentField::new(
            h_dim,
            w_dim,
            h.values().iter().zip(xi.values().values()).map(|(a, b)| a * b).collect(),
        )
        .unwrap();
        let x = Site::new(1, 1);
        let y = Site::new(h_dim, w_dim);
        let d = logratio_deformation(&h, &gated, x, y).unwrap();
        prop_assert!((d - gamma * (psi.get(x) - psi.get(y))).abs() < 1e-9);
    }
}
