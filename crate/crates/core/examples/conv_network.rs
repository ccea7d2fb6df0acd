//! Forward and backward pass through a small convolutional network, and a
//! few training steps on synthetic stripe images (vertical vs horizontal).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ttfs_snn::data::{encode_image, EncodeOptions, EncodedSample};
use ttfs_snn::network::{Network, NetworkSpec, Shape3, WeightInit};
use ttfs_snn::neuron::NeuronModel;
use ttfs_snn::objectives::CostConfig;
use ttfs_snn::training::{TrainConfig, Trainer};

fn stripes(rng: &mut ChaCha8Rng, vertical: bool) -> Vec<u8> {
    let offset = rng.gen_range(0..2);
    (0..100)
        .map(|i| {
            let (y, x) = (i / 10, i % 10);
            let on = if vertical { x % 2 == offset } else { y % 2 == offset };
            if on { 220 + rng.gen_range(0..35) } else { rng.gen_range(0..40) }
        })
        .collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let shape = Shape3::new(1, 10, 10);
    let opts = EncodeOptions::default();
    let samples: Vec<EncodedSample> = (0..64)
        .map(|i| {
            let label = i % 2;
            let (input, _) = encode_image(&stripes(&mut rng, label == 1), shape, &opts);
            EncodedSample { input, label }
        })
        .collect();

    let spec = NetworkSpec::from_architecture("Conv(3,4)-Pool-16-2", shape, 0, NeuronModel::non_leaky(1.0))?;
    for (l, layer) in spec.layers.iter().enumerate() {
        println!("layer {l}: {layer:?}");
    }
    let init = WeightInit { mean_gain: 4.0, std_gain: 0.25 };
    let net = Network::init_with(spec, 16.0, init, &mut rng);
    let cost = CostConfig { t_ref: 16.0, ..CostConfig::default() };
    let config = TrainConfig { batch_size: 8, eta: 3e-4, cost, ..TrainConfig::default() };
    let trace = net.forward(&samples[0].input, 32.0)?;
    let fired: Vec<usize> = trace.layers.iter().map(|l| l.output().fired_count()).collect();
    println!("spikes per layer on the first image: {fired:?}");
    let mut trainer = Trainer::new(net, config)?;
    for _ in 0..8 {
        let row = trainer.step(&samples, &samples)?;
        println!("epoch {:>2}: cost {:.4} accuracy {:.3}", row.epoch, row.train_cost, row.test_accuracy);
    }
    Ok(())
}
