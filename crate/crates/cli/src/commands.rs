use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use polyloom::rnn::{lstm_forward_seq, lstm_forward_wavefront, LstmParams};
use polyloom::schedule::nest::{tagged_text, nest_variants};
use polyloom::sparse::io::{read_csr, read_tensor, write_csr, write_tensor};
use polyloom::sparse::{
    crossover, dense_conv, density_sweep, fused_conv_relu_maxpool, random_input, random_weights, sparse_conv,
    ConvShape, CsrWeights, DenseTensor4, Weights,
};
use polyloom::timing::{median_ns, median_pair_ns};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::BenchConfig;
use crate::report::{
    checksum_f32, checksum_f64, sweep_rows, sweep_svg, write_csv, ResultRow, SweepCsvRow, RESULTS_SCHEMA,
    SWEEP_SCHEMA,
};

/// The eight schedule variants of the two-statement nest, each built live
/// from its command sequence.
pub fn schedules_text() -> Result<String> {
    let mut out = String::new();
    for (label, script, p) in nest_variants()? {
        let script = if script.is_empty() { "(sequential)" } else { script };
        out.push_str(&format!("({label}) {script}\n{}\n\n", tagged_text(&p)));
    }
    Ok(out)
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new().num_threads(workers).build().context("building thread pool")
}

fn out_dir(cfg: &BenchConfig) -> Result<&Path> {
    std::fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    Ok(&cfg.out_dir)
}

pub struct SweepOutput {
    pub rows: Vec<SweepCsvRow>,
    pub crossover: Option<f64>,
    pub csv: PathBuf,
    pub svg: PathBuf,
}

pub fn sweep(cfg: &BenchConfig) -> Result<SweepOutput> {
    let shape = cfg.conv.shape()?;
    let rows = pool(cfg.workers)?.install(|| density_sweep(&shape, &cfg.densities, cfg.trials, cfg.seed))?;
    let cross = crossover(&rows);
    let rows = sweep_rows(&rows);
    let dir = out_dir(cfg)?;
    let (csv, svg) = (dir.join("sweep.csv"), dir.join("sweep.svg"));
    write_csv(&csv, SWEEP_SCHEMA, &rows)?;
    let title = format!("sparse vs dense conv, {}", cfg.conv.describe());
    std::fs::write(&svg, sweep_svg(&rows, cross, &title)).with_context(|| format!("writing {}", svg.display()))?;
    Ok(SweepOutput { rows, crossover: cross, csv, svg })
}

pub struct LstmOutput {
    pub rows: Vec<ResultRow>,
    pub csv: PathBuf,
}

/// Time the layer-by-layer order against the wavefront order.
pub fn lstm(cfg: &BenchConfig) -> Result<LstmOutput> {
    let s = cfg.lstm;
    let params = LstmParams::random(s.layers, s.input_dim, s.hidden, s.density, cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5EC);
    let x: Vec<Vec<f64>> = (0..s.steps).map(|_| (0..s.input_dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let seq = lstm_forward_seq(&params, &x)?;
    let wave = lstm_forward_wavefront(&params, &x, cfg.workers)?;
    let (seq_ns, wave_ns) = median_pair_ns(
        cfg.trials,
        || {
            std::hint::black_box(lstm_forward_seq(&params, &x).expect("checked"));
        },
        || {
            std::hint::black_box(lstm_forward_wavefront(&params, &x, cfg.workers).expect("checked"));
        },
    );
    let desc = format!(
        "L={} T={} H={} D={} density={}",
        s.layers,
        s.steps,
        s.hidden,
        s.input_dim,
        s.density.map_or("dense".to_string(), |d| d.to_string())
    );
    let rows = vec![
        ResultRow {
            experiment: "lstm-sequential".into(),
            params: desc.clone(),
            median_ns: seq_ns,
            checksum: checksum_f64(seq.values()),
            speedup: 1.0,
        },
        ResultRow {
            experiment: "lstm-wavefront".into(),
            params: format!("{desc} workers={}", cfg.workers),
            median_ns: wave_ns,
            checksum: checksum_f64(wave.values()),
            speedup: seq_ns as f64 / wave_ns.max(1) as f64,
        },
    ];
    let csv = out_dir(cfg)?.join("lstm.csv");
    write_csv(&csv, RESULTS_SCHEMA, &rows)?;
    Ok(LstmOutput { rows, csv })
}

/// Where `conv` takes its operands from; missing ones are generated from
/// the seed and saved next to the results.
#[derive(Clone, Debug, Default)]
pub struct ConvInputs {
    pub input: Option<PathBuf>,
    pub weights: Option<PathBuf>,
}

pub struct ConvOutput {
    pub rows: Vec<ResultRow>,
    pub csv: PathBuf,
    pub output: PathBuf,
}

fn read_file<T>(path: &Path, f: impl FnOnce(&mut BufReader<File>) -> polyloom::Result<T>) -> Result<T> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    f(&mut BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> polyloom::Result<()>) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    f(&mut w).with_context(|| format!("writing {}", path.display()))?;
    std::io::Write::flush(&mut w).with_context(|| format!("writing {}", path.display()))
}

/// Dense, sparse and (for even outputs) fused sparse conv on one layer.
pub fn conv(cfg: &BenchConfig, inputs: &ConvInputs) -> Result<ConvOutput> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let csr = match &inputs.weights {
        Some(p) => read_file(p, |r| read_csr(r))?,
        None => {
            let shape = cfg.conv.shape()?;
            CsrWeights::from_dense(&random_weights(&shape, cfg.conv_density, &mut rng)?, &shape, 0.0)?
        }
    };
    let input = match &inputs.input {
        Some(p) => read_file(p, |r| read_tensor(r))?,
        None => {
            let s = ConvShape::new(cfg.conv.batch, csr.in_features, csr.out_features, csr.h_in, csr.w_in, csr.k)?;
            random_input(&s, &mut rng)
        }
    };
    let shape = ConvShape::new(input.dims()[0], csr.in_features, csr.out_features, csr.h_in, csr.w_in, csr.k)?;
    let dense_w = csr.to_dense();
    let dir = out_dir(cfg)?;
    if inputs.weights.is_none() {
        write_file(&dir.join("conv_weights.plcs"), |w| write_csr(w, &csr))?;
    }
    if inputs.input.is_none() {
        write_file(&dir.join("conv_input.pltn"), |w| write_tensor(w, &input))?;
    }
    let pool = pool(cfg.workers)?;
    let desc = format!(
        "b={} fin={} fout={} in={}x{} k={} nnz={} density={:.4}",
        shape.batch,
        shape.in_features,
        shape.out_features,
        shape.h_in,
        shape.w_in,
        shape.k,
        csr.nnz(),
        csr.density()
    );
    let mut rows = Vec::new();
    let mut timed = |name: &str, f: &(dyn Fn() -> polyloom::Result<DenseTensor4> + Sync)| -> Result<DenseTensor4> {
        let out = pool.install(f)?;
        let ns = pool.install(|| median_ns(cfg.trials, || drop(std::hint::black_box(f()))));
        let base = rows.first().map_or(ns, |r: &ResultRow| r.median_ns);
        rows.push(ResultRow {
            experiment: name.into(),
            params: desc.clone(),
            median_ns: ns,
            checksum: checksum_f32(out.data()),
            speedup: base as f64 / ns.max(1) as f64,
        });
        Ok(out)
    };
    timed("conv-dense", &|| dense_conv(&input, &dense_w, &shape))?;
    let sparse_out = timed("conv-sparse", &|| sparse_conv(&input, &csr, &shape))?;
    if shape.h_out() % 2 == 0 && shape.w_out() % 2 == 0 {
        timed("conv-relu-maxpool-fused", &|| fused_conv_relu_maxpool(&input, Weights::Sparse(&csr), &shape))?;
    }
    let output = dir.join("conv_output.pltn");
    write_file(&output, |w| write_tensor(w, &sparse_out))?;
    let csv = dir.join("conv.csv");
    write_csv(&csv, RESULTS_SCHEMA, &rows)?;
    Ok(ConvOutput { rows, csv, output })
}
