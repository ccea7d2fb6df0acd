//! Spike-time encodings: images (bright pixels spike early), the doubled
//! channel variant, and Iris features with the bias spike.

use ttfs_snn::data::{encode_image, encode_ttfs, load_iris, EncodeOptions, IrisSource};
use ttfs_snn::network::Shape3;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pixels = [0u8, 64, 128, 255];
    let shape = Shape3::new(1, 2, 2);
    let opts = EncodeOptions::default();
    let (x, s) = encode_image(&pixels, shape, &opts);
    println!("pixels {pixels:?} -> times {:?} ({s:?})", x.as_slice());
    let doubled = EncodeOptions { double_channels: true, ..opts };
    let (x, s) = encode_image(&pixels, shape, &doubled);
    println!("doubled -> {:?} ({s:?})", x.as_slice());

    let iris = load_iris(&IrisSource::Embedded)?;
    let enc = encode_ttfs(&iris, &opts)?;
    println!("Iris: {} samples, input shape {:?}", enc.samples.len(), enc.shape);
    for s in enc.samples.iter().step_by(50) {
        println!("  label {} -> {:?}", s.label, s.input.as_slice());
    }
    Ok(())
}
