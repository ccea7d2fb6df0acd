//! Experiment drivers behind the command-line subcommands. Every CSV written
//! here starts with the effective configuration as `#` comment lines.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::backprop::GradientSet;
use crate::checkpoint::{checkpoint_load_for, checkpoint_save};
use crate::config::RunConfig;
use crate::data::{encode_augmented, EncodedDataset, EncodedSample, Split};
use crate::error::{Error, Result};
use crate::network::Network;
use crate::objectives::{membrane_term_gradient, CostConfig, MembraneForm};
use crate::training::{Evaluation, MetricsRow, Trainer};

/// Creates `path` and writes the configuration echo.
pub fn csv_with_echo(path: &Path, cfg: &RunConfig) -> Result<csv::Writer<BufWriter<File>>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for line in cfg.to_toml().lines() {
        writeln!(w, "# {line}").map_err(|e| Error::io(path, e))?;
    }
    Ok(csv::WriterBuilder::new().flexible(true).from_writer(w))
}

fn flush(mut w: csv::Writer<BufWriter<File>>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn out_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("runs"))
}

fn metrics_header(hidden: usize) -> Vec<String> {
    let mut h = vec!["epoch".to_string(), "cost".into(), "accuracy".into()];
    h.extend((1..=hidden).map(|l| format!("sparsity_l{l}")));
    h.push("sparsity_mean".into());
    h
}

fn metrics_record(row: &MetricsRow) -> Vec<String> {
    let mut r = vec![row.epoch.to_string(), row.train_cost.to_string(), row.test_accuracy.to_string()];
    r.extend(row.layer_sparsity.iter().map(f64::to_string));
    r.push(row.mean_sparsity.to_string());
    r
}

/// Data for a training run: the raw training split (kept for augmentation)
/// and the encoded splits.
pub struct RunData {
    pub raw_train: crate::data::RawDataset,
    pub train: EncodedDataset,
    pub test: EncodedDataset,
}

impl RunData {
    pub fn load(cfg: &RunConfig) -> Result<Self> {
        let raw_train = cfg.load_raw(Split::Train)?;
        let train = crate::data::encode_ttfs(&raw_train, &cfg.encode_options())?;
        let test = cfg.load_encoded(Split::Test)?;
        Ok(RunData { raw_train, train, test })
    }
}

/// Trains one network as configured, streaming a metrics row per epoch.
pub fn run_training(
    cfg: &RunConfig,
    data: &RunData,
    mut on_epoch: impl FnMut(&MetricsRow, &Network) -> Result<()>,
) -> Result<(Network, Vec<MetricsRow>)> {
    let spec = cfg.network.spec(data.train.shape)?;
    let tc = cfg.train_config();
    let net = cfg.init_network(spec);
    let mut trainer = Trainer::new(net, tc)?;
    let mut rows = Vec::with_capacity(tc.epochs);
    for epoch in 0..tc.epochs {
        let row = if cfg.data.augment {
            let seed = tc.seed.wrapping_mul(1_000_003).wrapping_add(epoch as u64);
            let augmented = encode_augmented(&data.raw_train, &cfg.encode_options(), seed)?;
            trainer.step(&augmented.samples, &data.test.samples)?
        } else {
            trainer.step(&data.train.samples, &data.test.samples)?
        };
        on_epoch(&row, &trainer.net)?;
        rows.push(row);
    }
    Ok((trainer.net, rows))
}

/// `train`: metrics CSV plus a checkpoint after every epoch.
pub fn cmd_train(cfg: &RunConfig) -> Result<Vec<MetricsRow>> {
    let data = RunData::load(cfg)?;
    let dir = out_dir(cfg);
    let metrics_path = dir.join("metrics.csv");
    let ckpt_path = dir.join("model.ttfs");
    let hidden = cfg.network.spec(data.train.shape)?.hidden_spiking_layers().len();
    let mut w = csv_with_echo(&metrics_path, cfg)?;
    w.write_record(metrics_header(hidden))?;
    let (_, rows) = run_training(cfg, &data, |row, net| {
        w.write_record(metrics_record(row))?;
        w.flush().map_err(|e| Error::io(&metrics_path, e))?;
        checkpoint_save(&ckpt_path, net)?;
        eprintln!(
            "epoch {}: cost {:.5} accuracy {:.4} mean sparsity {:.4}",
            row.epoch, row.train_cost, row.test_accuracy, row.mean_sparsity
        );
        Ok(())
    })?;
    flush(w, &metrics_path)?;
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub value: f64,
    pub seed: u64,
    pub accuracy: f64,
    pub layer_sparsity: Vec<f64>,
    pub mean_sparsity: f64,
}

/// `sweep`: one training job per (value, seed), up to `workers` at a time.
/// Writes `sweep.csv` with a row per hidden layer plus a `mean` row per job.
pub fn cmd_sweep(cfg: &RunConfig, workers: usize) -> Result<Vec<SweepPoint>> {
    let sweep = cfg
        .sweep
        .clone()
        .ok_or_else(|| Error::Config("the sweep command needs a [sweep] section".into()))?;
    let data = RunData::load(cfg)?;
    let dir = out_dir(cfg);
    let jobs: Vec<(f64, u64)> = sweep
        .values
        .iter()
        .flat_map(|&v| sweep.seeds.iter().map(move |&s| (v, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let points: Vec<SweepPoint> = pool.install(|| {
        jobs.par_iter()
            .map(|&(value, seed)| -> Result<SweepPoint> {
                let mut job = cfg.clone();
                sweep.parameter.apply(&mut job.cost, value);
                job.train.seed = seed;
                job.sweep = None;
                let path = dir
                    .join("jobs")
                    .join(format!("{}_{value:e}_seed{seed}.csv", sweep.parameter.name()));
                let hidden = job.network.spec(data.train.shape)?.hidden_spiking_layers().len();
                let mut w = csv_with_echo(&path, &job)?;
                w.write_record(metrics_header(hidden))?;
                let (_, rows) = run_training(&job, &data, |row, _| {
                    w.write_record(metrics_record(row))?;
                    Ok(())
                })?;
                flush(w, &path)?;
                let last = rows
                    .last()
                    .ok_or_else(|| Error::Config("train.epochs must be at least 1".into()))?;
                Ok(SweepPoint {
                    value,
                    seed,
                    accuracy: last.test_accuracy,
                    layer_sparsity: last.layer_sparsity.clone(),
                    mean_sparsity: last.mean_sparsity,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let path = dir.join("sweep.csv");
    let mut w = csv_with_echo(&path, cfg)?;
    w.write_record(["parameter", "value", "seed", "layer", "sparsity", "accuracy"])?;
    for p in &points {
        let mut emit = |layer: String, s: f64| {
            w.write_record([
                sweep.parameter.name().to_string(),
                p.value.to_string(),
                p.seed.to_string(),
                layer,
                s.to_string(),
                p.accuracy.to_string(),
            ])
        };
        for (l, &s) in p.layer_sparsity.iter().enumerate() {
            emit((l + 1).to_string(), s)?;
        }
        emit("mean".into(), p.mean_sparsity)?;
    }
    flush(w, &path)?;
    Ok(points)
}

/// One cell of the gradient comparison table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradErrorRow {
    pub n_steps: u64,
    pub v_hat: f64,
    /// 1-based index over spiking layers.
    pub layer: usize,
    /// Mean over weights of `|g_int - g_lim| / |g_int|`, averaged over samples.
    pub error: f64,
    pub included: u64,
    /// Weights skipped because `|g_int| < 1e-300`.
    pub excluded: u64,
}

/// Compares the membrane-term gradient of the integral form against the
/// limit form with `gamma2 = 1` and every other term off. The window and the
/// step are `T / n_steps` with `T = base.window()`.
pub fn gradient_error(
    net: &Network,
    samples: &[EncodedSample],
    v_hats: &[f64],
    n_steps: &[u64],
    base: &CostConfig,
) -> Result<Vec<GradErrorRow>> {
    let limit = CostConfig {
        gamma1: 0.0,
        gamma2: 1.0,
        gamma3: 0.0,
        membrane: MembraneForm::Limit,
        promotion: false,
        ..*base
    };
    let spiking: Vec<usize> = (0..net.spec.layers.len())
        .filter(|&l| net.spec.layers[l].is_spiking())
        .collect();
    let cells: Vec<(u64, f64)> = n_steps
        .iter()
        .flat_map(|&n| v_hats.iter().map(move |&v| (n, v)))
        .collect();

    // Per sample and cell: (sum of per-sample layer means, samples counted,
    // included, excluded) for every spiking layer.
    type Acc = Vec<Vec<(f64, u64, u64, u64)>>;
    let empty: Acc = vec![vec![(0.0, 0, 0, 0); spiking.len()]; cells.len()];
    let acc = samples
        .par_iter()
        .map(|s| -> Result<Acc> {
            let trace = net.forward(&s.input, limit.horizon())?;
            let mut g_lim = GradientSet::zeros_like(net);
            membrane_term_gradient(net, &trace, &limit, &mut g_lim)?;
            let mut out = empty.clone();
            let mut g_int = GradientSet::zeros_like(net);
            for (c, &(n, v_hat)) in cells.iter().enumerate() {
                let cfg = CostConfig {
                    membrane: MembraneForm::Integral,
                    v_hat,
                    dt_integral: Some(limit.window() / n as f64),
                    ..limit
                };
                g_int.fill_zero();
                membrane_term_gradient(net, &trace, &cfg, &mut g_int)?;
                for (k, &l) in spiking.iter().enumerate() {
                    let (mut sum, mut inc, mut exc) = (0.0, 0u64, 0u64);
                    for (gi, gl) in g_int.layers[l].iter().zip(&g_lim.layers[l]) {
                        if gi.abs() < 1e-300 {
                            exc += 1;
                        } else {
                            sum += (gi - gl).abs() / gi.abs();
                            inc += 1;
                        }
                    }
                    let cell = &mut out[c][k];
                    if inc > 0 {
                        cell.0 += sum / inc as f64;
                        cell.1 += 1;
                    }
                    cell.2 += inc;
                    cell.3 += exc;
                }
            }
            Ok(out)
        })
        .try_reduce(
            || empty.clone(),
            |mut a, b| {
                for (ra, rb) in a.iter_mut().zip(b) {
                    for (x, y) in ra.iter_mut().zip(rb) {
                        x.0 += y.0;
                        x.1 += y.1;
                        x.2 += y.2;
                        x.3 += y.3;
                    }
                }
                Ok(a)
            },
        )?;

    let mut rows = Vec::new();
    for (c, &(n, v_hat)) in cells.iter().enumerate() {
        for (k, _) in spiking.iter().enumerate() {
            let (sum, counted, inc, exc) = acc[c][k];
            if counted == 0 {
                continue;
            }
            rows.push(GradErrorRow {
                n_steps: n,
                v_hat,
                layer: k + 1,
                error: sum / counted as f64,
                included: inc,
                excluded: exc,
            });
        }
    }
    Ok(rows)
}

/// `gradcheck`: randomly initialised network on the configured data.
pub fn cmd_gradcheck(cfg: &RunConfig) -> Result<Vec<GradErrorRow>> {
    let data = cfg.load_encoded(Split::Train)?;
    let spec = cfg.network.spec(data.shape)?;
    let net = cfg.init_network(spec);
    let n = cfg.gradcheck.samples.unwrap_or(data.samples.len()).min(data.samples.len());
    let rows = gradient_error(
        &net,
        &data.samples[..n],
        &cfg.gradcheck.v_hats,
        &cfg.gradcheck.n_steps,
        &cfg.cost,
    )?;
    let path = out_dir(cfg).join("gradcheck.csv");
    let mut w = csv_with_echo(&path, cfg)?;
    for r in &rows {
        w.serialize(r)?;
    }
    flush(w, &path)?;
    Ok(rows)
}

fn network_for(cfg: &RunConfig, shape: crate::network::Shape3, checkpoint: Option<&Path>) -> Result<Network> {
    let spec = cfg.network.spec(shape)?;
    match checkpoint {
        Some(p) => checkpoint_load_for(p, &spec),
        None => Ok(cfg.init_network(spec)),
    }
}

/// `raster`: every spike of every layer for the first `samples` test inputs.
pub fn cmd_raster(cfg: &RunConfig, checkpoint: Option<&Path>, samples: usize) -> Result<PathBuf> {
    let data = cfg.load_encoded(Split::Test)?;
    let net = network_for(cfg, data.shape, checkpoint)?;
    let path = out_dir(cfg).join("raster.csv");
    let mut w = csv_with_echo(&path, cfg)?;
    w.write_record(["sample", "label", "layer", "neuron", "time"])?;
    for (i, s) in data.samples.iter().take(samples).enumerate() {
        let trace = net.forward(&s.input, cfg.cost.horizon())?;
        let layers = std::iter::once(&trace.input).chain(trace.layers.iter().map(|l| l.output()));
        for (layer, spikes) in layers.enumerate() {
            for (neuron, t) in spikes.iter().enumerate() {
                if let Some(t) = t {
                    w.write_record([
                        i.to_string(),
                        s.label.to_string(),
                        layer.to_string(),
                        neuron.to_string(),
                        t.to_string(),
                    ])?;
                }
            }
        }
    }
    flush(w, &path)?;
    Ok(path)
}

/// `eval`: accuracy and sparsity of a checkpoint on the test split.
pub fn cmd_eval(cfg: &RunConfig, checkpoint: &Path) -> Result<Evaluation> {
    let data = cfg.load_encoded(Split::Test)?;
    let net = network_for(cfg, data.shape, Some(checkpoint))?;
    let eval = crate::training::evaluate(&net, &data.samples, &cfg.cost)?;
    let path = out_dir(cfg).join("eval.csv");
    let mut w = csv_with_echo(&path, cfg)?;
    let mut header = vec!["accuracy".to_string()];
    header.extend((1..=eval.layer_sparsity.len()).map(|l| format!("sparsity_l{l}")));
    header.push("sparsity_mean".into());
    w.write_record(&header)?;
    let mut rec = vec![eval.accuracy.to_string()];
    rec.extend(eval.layer_sparsity.iter().map(f64::to_string));
    rec.push(eval.mean_sparsity.to_string());
    w.write_record(&rec)?;
    flush(w, &path)?;
    Ok(eval)
}
