//! Saves a network to the binary checkpoint format and loads it back.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ttfs_snn::checkpoint::{checkpoint_load, checkpoint_load_for, checkpoint_save};
use ttfs_snn::network::{Network, NetworkSpec, Shape3};
use ttfs_snn::neuron::NeuronModel;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = NetworkSpec::from_architecture(
        "Conv(3,4)-Pool-32-10",
        Shape3::new(1, 12, 12),
        1,
        NeuronModel::alpha_synapse(2.0, 1.0),
    )?;
    let net = Network::init(spec.clone(), 8.0, &mut ChaCha8Rng::seed_from_u64(0));
    let path = std::env::temp_dir().join("ttfs-example.ttfs");
    checkpoint_save(&path, &net)?;
    println!("wrote {} ({} bytes, {} weights)", path.display(), std::fs::metadata(&path)?.len(), net.spec.param_count());

    let back = checkpoint_load(&path)?;
    let identical = back.weights.iter().flatten().zip(net.weights.iter().flatten()).all(|(a, b)| a.to_bits() == b.to_bits());
    println!("round trip bitwise identical: {identical}");

    // Loading against a different architecture is refused.
    let other = NetworkSpec::from_architecture("144-10", Shape3::flat(144), 0, NeuronModel::non_leaky(1.0))?;
    match checkpoint_load_for(&path, &other) {
        Ok(_) => println!("unexpectedly accepted"),
        Err(e) => println!("mismatched architecture rejected: {e}"),
    }
    checkpoint_load_for(&path, &spec)?;
    Ok(())
}
