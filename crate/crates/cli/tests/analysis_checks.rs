//! Statistical sanity of the analysis routines: near-Gaussian kurtosis of
//! an untrained network's pre-activations on Gaussian inputs, and
//! histogram degeneracy on constant inputs.

use vcl_core::data::{make_gaussian_matrix, Dataset};
use vcl_core::nn::{Activation, Mlp, MlpSpec, Normalizer};
use vcl_core::stats::seeded_rng;
use vcl_lab::analysis::{activation_histograms, collect_layer_activations, histogram};

fn untrained_net(seed: u64) -> Mlp {
    let mut rng = seeded_rng(seed);
    let spec = MlpSpec {
        input_dim: 8,
        hidden: vec![32, 32],
        classes: 2,
        activation: Activation::Elu,
        normalizer: Normalizer::None,
        dropout: None,
    };
    Mlp::new(&spec, &mut rng).unwrap()
}

#[test]
fn untrained_network_on_gaussian_inputs_has_kurtosis_near_three() {
    let ds = make_gaussian_matrix(20_000, 8, 99).unwrap();
    let model = untrained_net(42);
    let layers = collect_layer_activations(&model, &ds).unwrap();

    // First-layer pre-activations are exact Gaussians (linear images of
    // Gaussian inputs), so every unit sits near κ = 3.
    for (unit, column) in layers[0].pre.iter().enumerate() {
        let k = vcl_core::stats::compute_moments(column)
            .unwrap()
            .kurtosis
            .unwrap();
        assert!((k - 3.0).abs() < 0.3, "layer 0 unit {unit}: kurtosis {k}");
    }
    // Deeper pre-activations are sums of many weakly non-Gaussian terms;
    // the mean stays inside the same band.
    let deeper: Vec<f64> = layers[1]
        .pre
        .iter()
        .map(|c| {
            vcl_core::stats::compute_moments(c)
                .unwrap()
                .kurtosis
                .unwrap()
        })
        .collect();
    let mean = deeper.iter().sum::<f64>() / deeper.len() as f64;
    assert!((mean - 3.0).abs() < 0.3, "layer 1 mean kurtosis {mean}");
}

#[test]
fn constant_inputs_collapse_histograms_to_one_bin() {
    let rows = 50;
    let features = vec![1.5; rows * 3];
    let labels: Vec<usize> = (0..rows).map(|i| i % 2).collect();
    let ds = Dataset::new(features, 3, labels, 2).unwrap();
    let model = {
        let mut rng = seeded_rng(7);
        let spec = MlpSpec {
            input_dim: 3,
            hidden: vec![5],
            classes: 2,
            activation: Activation::Relu,
            normalizer: Normalizer::None,
            dropout: None,
        };
        Mlp::new(&spec, &mut rng).unwrap()
    };
    let histograms = activation_histograms(&model, &ds, 30, None, None).unwrap();
    assert!(!histograms.is_empty());
    for h in &histograms {
        assert_eq!(h.counts.len(), 1, "unit {} stage {}", h.unit, h.stage);
        assert_eq!(h.counts[0] as usize, rows);
        assert_eq!(h.kurtosis, None);
    }
}

#[test]
fn histogram_covers_every_sample_once() {
    let values: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin() * 4.0).collect();
    let (lo, hi, counts) = histogram(&values, 25);
    assert!(lo < hi);
    assert_eq!(counts.iter().sum::<u64>() as usize, values.len());
}
