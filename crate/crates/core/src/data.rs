//! Dataset readers (IDX, CIFAR-10 binary, Iris CSV), spike-time encoding and
//! image augmentation.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Shape3;
use crate::neuron::SpikeVector;

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
const CIFAR_RECORD: usize = 1 + 3 * 32 * 32;
const IRIS_CSV: &str = include_str!("../data/iris.csv");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Samples {
    /// Channel-major 8-bit intensities, `shape.len()` bytes per sample.
    Images { shape: Shape3, pixels: Vec<u8> },
    /// Real features in `[0, 1]`, `dim` values per sample.
    Features { dim: usize, values: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawDataset {
    pub samples: Samples,
    pub labels: Vec<usize>,
    pub classes: usize,
    pub split: Split,
}

impl RawDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Keeps the first `n` samples.
    pub fn truncate(&mut self, n: usize) {
        let n = n.min(self.len());
        self.labels.truncate(n);
        match &mut self.samples {
            Samples::Images { shape, pixels } => pixels.truncate(n * shape.len()),
            Samples::Features { dim, values } => values.truncate(n * *dim),
        }
    }

    /// Intensities of image `i`; `None` for feature datasets.
    pub fn image(&self, i: usize) -> Option<&[u8]> {
        match &self.samples {
            Samples::Images { shape, pixels } => Some(&pixels[i * shape.len()..(i + 1) * shape.len()]),
            Samples::Features { .. } => None,
        }
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(bytes[at..at + 4].try_into().expect("four bytes"))
}

fn need(what: &str, bytes: &[u8], expected: usize) -> Result<()> {
    if bytes.len() < expected {
        return Err(Error::Truncated {
            what: what.to_string(),
            expected: expected as u64,
            actual: bytes.len() as u64,
        });
    }
    Ok(())
}

/// Parses an IDX image file and its label file from memory.
pub fn parse_idx(images: &[u8], labels: &[u8], split: Split) -> Result<RawDataset> {
    need("IDX image header", images, 16)?;
    let magic = be_u32(images, 0);
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::WrongMagic {
            what: "IDX image file",
            expected: IDX_IMAGES_MAGIC,
            found: magic,
        });
    }
    need("IDX label header", labels, 8)?;
    let magic = be_u32(labels, 0);
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::WrongMagic {
            what: "IDX label file",
            expected: IDX_LABELS_MAGIC,
            found: magic,
        });
    }
    let count = be_u32(images, 4) as usize;
    let (rows, cols) = (be_u32(images, 8) as usize, be_u32(images, 12) as usize);
    let label_count = be_u32(labels, 4) as usize;
    if count != label_count {
        return Err(Error::CountMismatch {
            images: count,
            labels: label_count,
        });
    }
    let shape = Shape3::new(1, rows, cols);
    need("IDX image file", images, 16 + count * shape.len())?;
    need("IDX label file", labels, 8 + count)?;
    let labels: Vec<usize> = labels[8..8 + count].iter().map(|&b| b as usize).collect();
    if let Some(bad) = labels.iter().find(|&&l| l >= 10) {
        return Err(Error::Dataset(format!("label {bad} is not a digit class")));
    }
    Ok(RawDataset {
        samples: Samples::Images {
            shape,
            pixels: images[16..16 + count * shape.len()].to_vec(),
        },
        labels,
        classes: 10,
        split,
    })
}

pub fn load_idx(images: &Path, labels: &Path, split: Split) -> Result<RawDataset> {
    parse_idx(&read_file(images)?, &read_file(labels)?, split)
}

/// Parses concatenated CIFAR-10 binary batches (label byte + 3x32x32 planar).
pub fn parse_cifar10(batches: &[Vec<u8>], split: Split) -> Result<RawDataset> {
    let shape = Shape3::new(3, 32, 32);
    let mut pixels = Vec::new();
    let mut labels = Vec::new();
    for (b, bytes) in batches.iter().enumerate() {
        if bytes.len() % CIFAR_RECORD != 0 {
            return Err(Error::Dataset(format!(
                "batch {b}: {} bytes is not a multiple of the {CIFAR_RECORD}-byte record",
                bytes.len()
            )));
        }
        for record in bytes.chunks_exact(CIFAR_RECORD) {
            if record[0] > 9 {
                return Err(Error::Dataset(format!("batch {b}: label byte {}", record[0])));
            }
            labels.push(record[0] as usize);
            pixels.extend_from_slice(&record[1..]);
        }
    }
    Ok(RawDataset {
        samples: Samples::Images { shape, pixels },
        labels,
        classes: 10,
        split,
    })
}

pub fn load_cifar10(paths: &[PathBuf], split: Split) -> Result<RawDataset> {
    let batches = paths.iter().map(|p| read_file(p)).collect::<Result<Vec<_>>>()?;
    parse_cifar10(&batches, split)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum IrisSource {
    Embedded,
    File(PathBuf),
}

/// Four numeric features and a class column (name or index), optional
/// header. Each feature is min-max scaled over all rows.
pub fn parse_iris(text: &str) -> Result<RawDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<([f64; 4], String)> = Vec::new();
    for (n, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != 5 {
            return Err(Error::Dataset(format!("iris row {n}: {} columns, expected 5", record.len())));
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            (0..4).map(|i| record[i].parse::<f64>()).collect();
        match parsed {
            Ok(v) => rows.push(([v[0], v[1], v[2], v[3]], record[4].to_string())),
            Err(_) if n == 0 => continue,
            Err(e) => return Err(Error::Dataset(format!("iris row {n}: {e}"))),
        }
    }
    if rows.is_empty() {
        return Err(Error::Dataset("iris file has no rows".into()));
    }
    let mut names: Vec<&str> = rows.iter().map(|(_, c)| c.as_str()).collect();
    names.sort_unstable();
    names.dedup();
    let numeric = names.iter().all(|n| n.parse::<usize>().is_ok());
    let labels: Vec<usize> = rows
        .iter()
        .map(|(_, c)| {
            if numeric {
                c.parse().expect("checked numeric")
            } else {
                names.binary_search(&c.as_str()).expect("name present")
            }
        })
        .collect();
    let classes = labels.iter().max().map_or(0, |m| m + 1);

    let mut values = Vec::with_capacity(rows.len() * 4);
    let lo: Vec<f64> = (0..4).map(|i| rows.iter().map(|r| r.0[i]).fold(f64::INFINITY, f64::min)).collect();
    let hi: Vec<f64> = (0..4).map(|i| rows.iter().map(|r| r.0[i]).fold(f64::NEG_INFINITY, f64::max)).collect();
    for (features, _) in &rows {
        for i in 0..4 {
            let span = hi[i] - lo[i];
            values.push(if span > 0.0 { (features[i] - lo[i]) / span } else { 0.0 });
        }
    }
    Ok(RawDataset {
        samples: Samples::Features { dim: 4, values },
        labels,
        classes,
        split: Split::Train,
    })
}

pub fn load_iris(source: &IrisSource) -> Result<RawDataset> {
    match source {
        IrisSource::Embedded => parse_iris(IRIS_CSV),
        IrisSource::File(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_iris(&text)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodeOptions {
    pub tau_in: f64,
    /// Append `1 - x` copies of every channel.
    pub double_channels: bool,
    /// Append an always-at-zero bias spike to feature vectors.
    pub iris_bias: bool,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        EncodeOptions {
            tau_in: 5.0,
            double_channels: false,
            iris_bias: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncodedSample {
    pub input: SpikeVector,
    pub label: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncodedDataset {
    pub shape: Shape3,
    pub classes: usize,
    pub samples: Vec<EncodedSample>,
}

/// `t = tau_in (1 - x)` with `x = pixel / 255`; the doubled channels carry
/// `1 - x` and therefore spike at `tau_in x`.
pub fn encode_image(pixels: &[u8], shape: Shape3, opts: &EncodeOptions) -> (SpikeVector, Shape3) {
    let x: Vec<f64> = pixels.iter().map(|&p| p as f64 / 255.0).collect();
    let mut times: Vec<Option<f64>> = x.iter().map(|x| Some(opts.tau_in * (1.0 - x))).collect();
    let mut out = shape;
    if opts.double_channels {
        times.extend(x.iter().map(|x| Some(opts.tau_in * x)));
        out.channels *= 2;
    }
    (SpikeVector::from_vec_unchecked(times), out)
}

/// `t = tau_in x` per feature, plus the bias spike at `t = 0`.
pub fn encode_features(values: &[f64], opts: &EncodeOptions) -> SpikeVector {
    let mut times: Vec<Option<f64>> = values.iter().map(|x| Some(opts.tau_in * x)).collect();
    if opts.iris_bias {
        times.push(Some(0.0));
    }
    SpikeVector::from_vec_unchecked(times)
}

pub fn encode_ttfs(raw: &RawDataset, opts: &EncodeOptions) -> Result<EncodedDataset> {
    encode_with(raw, opts, |_, pixels| pixels.to_vec())
}

/// Encoding with a fresh augmentation of every training image. Test splits
/// are encoded unchanged.
pub fn encode_augmented(raw: &RawDataset, opts: &EncodeOptions, seed: u64) -> Result<EncodedDataset> {
    if raw.split == Split::Test {
        return encode_ttfs(raw, opts);
    }
    let Samples::Images { shape, .. } = raw.samples else {
        return encode_ttfs(raw, opts);
    };
    encode_with(raw, opts, |i, pixels| {
        augment(pixels, shape, seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ i as u64)
    })
}

fn encode_with(
    raw: &RawDataset,
    opts: &EncodeOptions,
    transform: impl Fn(usize, &[u8]) -> Vec<u8>,
) -> Result<EncodedDataset> {
    if !(opts.tau_in > 0.0 && opts.tau_in.is_finite()) {
        return Err(Error::Config(format!("tau_in must be positive, got {}", opts.tau_in)));
    }
    match &raw.samples {
        Samples::Images { shape, pixels } => {
            let samples = pixels
                .chunks_exact(shape.len())
                .zip(&raw.labels)
                .enumerate()
                .map(|(i, (img, &label))| EncodedSample {
                    input: encode_image(&transform(i, img), *shape, opts).0,
                    label,
                })
                .collect();
            let channels = shape.channels * if opts.double_channels { 2 } else { 1 };
            Ok(EncodedDataset {
                shape: Shape3::new(channels, shape.height, shape.width),
                classes: raw.classes,
                samples,
            })
        }
        Samples::Features { dim, values } => {
            let samples = values
                .chunks_exact(*dim)
                .zip(&raw.labels)
                .map(|(v, &label)| EncodedSample {
                    input: encode_features(v, opts),
                    label,
                })
                .collect();
            Ok(EncodedDataset {
                shape: Shape3::flat(dim + opts.iris_bias as usize),
                classes: raw.classes,
                samples,
            })
        }
    }
}

/// Mirror every channel left to right.
pub fn hflip(pixels: &[u8], shape: Shape3) -> Vec<u8> {
    let mut out = pixels.to_vec();
    for row in out.chunks_exact_mut(shape.width) {
        row.reverse();
    }
    out
}

/// Random horizontal flip (p = 0.5), rotation uniform in +-15 degrees with
/// nearest-neighbour sampling, then a random crop after 4-pixel zero padding.
pub fn augment(pixels: &[u8], shape: Shape3, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, w) = (shape.height, shape.width);
    let img = if rng.gen_bool(0.5) {
        hflip(pixels, shape)
    } else {
        pixels.to_vec()
    };

    let angle = rng.gen_range(-15.0f64..=15.0).to_radians();
    let (sin, cos) = angle.sin_cos();
    let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
    let mut rotated = vec![0u8; img.len()];
    for c in 0..shape.channels {
        for y in 0..h {
            for x in 0..w {
                let (dy, dx) = (y as f64 - cy, x as f64 - cx);
                let sy = (cos * dy - sin * dx + cy).round();
                let sx = (sin * dy + cos * dx + cx).round();
                if sy >= 0.0 && sx >= 0.0 && (sy as usize) < h && (sx as usize) < w {
                    rotated[shape.index(c, y, x)] = img[shape.index(c, sy as usize, sx as usize)];
                }
            }
        }
    }

    const PAD: usize = 4;
    let oy = rng.gen_range(0..=2 * PAD);
    let ox = rng.gen_range(0..=2 * PAD);
    let mut out = vec![0u8; img.len()];
    for c in 0..shape.channels {
        for y in 0..h {
            for x in 0..w {
                let (py, px) = (y + oy, x + ox);
                if (PAD..PAD + h).contains(&py) && (PAD..PAD + w).contains(&px) {
                    out[shape.index(c, y, x)] = rotated[shape.index(c, py - PAD, px - PAD)];
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx_images(n: u32, rows: u32, cols: u32, payload: usize) -> Vec<u8> {
        let mut v = Vec::new();
        for x in [IDX_IMAGES_MAGIC, n, rows, cols] {
            v.extend_from_slice(&x.to_be_bytes());
        }
        v.extend((0..payload).map(|i| (i % 256) as u8));
        v
    }

    fn idx_labels(n: u32) -> Vec<u8> {
        let mut v = Vec::new();
        for x in [IDX_LABELS_MAGIC, n] {
            v.extend_from_slice(&x.to_be_bytes());
        }
        v.extend((0..n).map(|i| (i % 10) as u8));
        v
    }

    #[test]
    fn idx_roundtrip_and_errors() {
        let d = parse_idx(&idx_images(3, 2, 2, 12), &idx_labels(3), Split::Train).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.image(1).unwrap(), &[4, 5, 6, 7]);
        assert_eq!(d.labels, vec![0, 1, 2]);

        let wrong = parse_idx(&idx_images(3, 2, 2, 12), &idx_images(3, 2, 2, 12), Split::Train);
        assert!(matches!(wrong, Err(Error::WrongMagic { found: 0x803, .. })));

        let short = parse_idx(&idx_images(3, 2, 2, 10), &idx_labels(3), Split::Train);
        match short {
            Err(Error::Truncated { expected, actual, .. }) => assert_eq!((expected, actual), (28, 26)),
            other => panic!("{other:?}"),
        }
        let msg = parse_idx(&idx_images(3, 2, 2, 10), &idx_labels(3), Split::Train)
            .unwrap_err()
            .to_string();
        assert!(msg.contains("28") && msg.contains("26"), "{msg}");

        let mismatch = parse_idx(&idx_images(3, 2, 2, 12), &idx_labels(4), Split::Train);
        assert!(matches!(mismatch, Err(Error::CountMismatch { images: 3, labels: 4 })));
    }

    #[test]
    fn cifar_records() {
        let mut batch = vec![0u8; 2 * CIFAR_RECORD];
        batch[0] = 3;
        batch[CIFAR_RECORD] = 9;
        batch[1] = 200;
        let d = parse_cifar10(&[batch.clone()], Split::Train).unwrap();
        assert_eq!(d.labels, vec![3, 9]);
        assert_eq!(d.image(0).unwrap()[0], 200);
        assert_eq!(d.image(0).unwrap().len(), 3072);

        assert!(parse_cifar10(&[batch[..CIFAR_RECORD + 5].to_vec()], Split::Train).is_err());
        let mut bad = batch;
        bad[0] = 10;
        assert!(parse_cifar10(&[bad], Split::Train).is_err());
    }

    #[test]
    fn embedded_iris() {
        let d = load_iris(&IrisSource::Embedded).unwrap();
        assert_eq!((d.len(), d.classes), (150, 3));
        let Samples::Features { dim, values } = &d.samples else { panic!() };
        assert_eq!(*dim, 4);
        for f in 0..4 {
            let col: Vec<f64> = values.iter().skip(f).step_by(4).copied().collect();
            assert_eq!(col.iter().copied().fold(f64::INFINITY, f64::min), 0.0);
            assert_eq!(col.iter().copied().fold(f64::NEG_INFINITY, f64::max), 1.0);
        }
        let numeric = parse_iris("1,2,3,4,0\n2,3,4,5,2\n").unwrap();
        assert_eq!(numeric.labels, vec![0, 2]);
        assert_eq!(numeric.classes, 3);
    }

    #[test]
    fn encoding_examples() {
        let opts = EncodeOptions::default();
        let (t, _) = encode_image(&[255, 0], Shape3::flat(2), &opts);
        assert_eq!(t.as_slice(), &[Some(0.0), Some(5.0)]);
        let half = encode_features(&[0.5], &EncodeOptions { iris_bias: false, ..opts });
        assert_eq!(half.get(0), Some(2.5));

        let doubled = EncodeOptions {
            double_channels: true,
            ..opts
        };
        let (t, s) = encode_image(&[51, 0, 0], Shape3::new(3, 1, 1), &doubled);
        assert_eq!(s, Shape3::new(6, 1, 1));
        // x = 0.2 in channel 0, so channel 3 carries 0.8.
        assert!((1.0 - t.get(3).unwrap() / 5.0 - 0.8).abs() < 1e-12);

        let iris = encode_features(&[0.4, 0.0, 1.0, 0.2], &opts);
        assert_eq!(iris.len(), 5);
        assert_eq!(iris.get(0), Some(2.0));
        assert_eq!(iris.get(4), Some(0.0));
    }

    #[test]
    fn augmentation_properties() {
        let shape = Shape3::new(3, 32, 32);
        let img: Vec<u8> = (0..shape.len()).map(|i| (i * 7 % 251) as u8).collect();
        assert_eq!(augment(&img, shape, 9), augment(&img, shape, 9));
        assert_eq!(hflip(&hflip(&img, shape), shape), img);
        let raw = RawDataset {
            samples: Samples::Images {
                shape,
                pixels: img.clone(),
            },
            labels: vec![1],
            classes: 10,
            split: Split::Test,
        };
        assert_eq!(
            encode_augmented(&raw, &EncodeOptions::default(), 4).unwrap(),
            encode_ttfs(&raw, &EncodeOptions::default()).unwrap()
        );
    }
}
