//! Backpropagation against central finite differences.

use minactor_core::nn::gradcheck::GradCase;
use minactor_core::nn::{HiddenActivation, MlpParams, MlpSpec, OutputActivation, Tape};
use minactor_core::rng::seeded;
use proptest::prelude::*;

#[test]
fn hundred_random_networks() {
    let mut rng = seeded(0x6EAD);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        worst = worst.max(GradCase::random(&mut rng).unwrap().max_error().unwrap());
    }
    assert!(worst < 1e-4, "max relative error {worst:e}");
}

#[test]
fn widest_two_layer_network() {
    let spec = MlpSpec::new(3, &[32, 32], 1, HiddenActivation::Tanh, OutputActivation::Linear).unwrap();
    let case = GradCase {
        net: MlpParams::init(spec, 11).unwrap(),
        inputs: vec![0.2, -1.0, 0.7, 1.1, 0.0, -0.3],
        batch: 2,
        weights: vec![1.0, -0.5],
    };
    let err = case.max_error().unwrap();
    assert!(err < 1e-4, "{err:e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gradients_match_differences(seed in any::<u64>()) {
        let err = GradCase::random(&mut seeded(seed)).unwrap().max_error().unwrap();
        prop_assert!(err < 1e-4, "{err:e}");
    }

    #[test]
    fn batch_gradient_is_sum_of_single_gradients(seed in any::<u64>()) {
        let GradCase { net, inputs, batch, weights } = GradCase::random(&mut seeded(seed)).unwrap();
        let (ind, outd) = (net.in_dim(), net.out_dim());
        let mut tape = Tape::new();
        net.forward_batch(&inputs, batch, &mut tape).unwrap();
        let mut together = net.zeros_like();
        net.backward_batch(&mut tape, &weights, Some(&mut together), None).unwrap();

        let mut summed = net.zeros_like();
        for b in 0..batch {
            let (g, _) = net.backward(&inputs[b * ind..(b + 1) * ind], &weights[b * outd..(b + 1) * outd]).unwrap();
            summed.add_scaled(&g, 1.0).unwrap();
        }
        for (a, b) in together.values().zip(summed.values()) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }
}
