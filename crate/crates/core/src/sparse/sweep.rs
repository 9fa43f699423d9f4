use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::conv::{dense_conv, sparse_conv};
use super::csr::CsrWeights;
use super::tensor::{ConvShape, DenseTensor4};
use crate::error::{Error, Result};
use crate::timing::median_rounds_ns;

/// Weight densities of pruned conv layers: (layer, density).
pub const LAYER_DENSITIES: [(&str, f64); 4] = [
    ("VGG-16 block 1", 0.495),
    ("ResNet-20 block 5", 0.213),
    ("ResNet-20 block 10", 0.161),
    ("VGG-16 block 10", 0.010),
];

/// Sweep densities 1%, 5%, 10%, ..., 100%.
pub fn default_densities() -> Vec<f64> {
    std::iter::once(0.01).chain((1..=20).map(|i| i as f64 * 0.05)).collect()
}

fn nonzero_uniform(rng: &mut impl Rng) -> f32 {
    loop {
        let v: f32 = rng.gen_range(-1.0..1.0);
        if v != 0.0 {
            return v;
        }
    }
}

/// Weights with exactly `floor(density * size)` nonzeros, placed uniformly.
pub fn random_weights(shape: &ConvShape, density: f64, rng: &mut impl Rng) -> Result<DenseTensor4> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::Invalid(format!("density {density} outside (0, 1]")));
    }
    let size = shape.weight_len();
    let nnz = ((density * size as f64) + 1e-9).floor() as usize;
    let mut w = DenseTensor4::zeros(shape.weight_dims());
    for i in sample(rng, size, nnz.min(size)) {
        w.data_mut()[i] = nonzero_uniform(rng);
    }
    Ok(w)
}

pub fn random_input(shape: &ConvShape, rng: &mut impl Rng) -> DenseTensor4 {
    DenseTensor4::from_fn(shape.input_dims(), |_| rng.gen_range(-1.0..1.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub density: f64,
    pub nnz: usize,
    pub dense_ns: u64,
    pub sparse_ns: u64,
    /// Sparse over dense time.
    pub ratio: f64,
    /// Largest relative difference between the two outputs.
    pub rel_err: f64,
    pub sparse_out: DenseTensor4,
}

/// Median dense and sparse conv times per density on random weights.
/// Every trial round times all densities, so slow drift in machine speed
/// does not masquerade as a density effect.
pub fn density_sweep(shape: &ConvShape, densities: &[f64], trials: usize, seed: u64) -> Result<Vec<SweepRow>> {
    shape.validate()?;
    if trials == 0 {
        return Err(Error::Invalid("trials must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let input = random_input(shape, &mut rng);
    let mut cases = Vec::with_capacity(densities.len());
    for &d in densities {
        let w = random_weights(shape, d, &mut rng)?;
        let csr = CsrWeights::from_dense(&w, shape, 0.0)?;
        cases.push((d, w, csr));
    }
    let mut jobs: Vec<Box<dyn FnMut() + '_>> = Vec::new();
    for (_, w, csr) in &cases {
        let input = &input;
        jobs.push(Box::new(move || {
            std::hint::black_box(dense_conv(input, w, shape).expect("checked"));
        }));
        jobs.push(Box::new(move || {
            std::hint::black_box(sparse_conv(input, csr, shape).expect("checked"));
        }));
    }
    let mut refs: Vec<&mut dyn FnMut()> = jobs.iter_mut().map(|j| j.as_mut() as &mut dyn FnMut()).collect();
    let times = median_rounds_ns(trials, &mut refs);
    drop(refs);
    drop(jobs);
    let mut rows = Vec::with_capacity(cases.len());
    for ((d, w, csr), t) in cases.iter().zip(times.chunks(2)) {
        let dense_out = dense_conv(&input, w, shape)?;
        let sparse_out = sparse_conv(&input, csr, shape)?;
        let (dense_ns, sparse_ns) = (t[0], t[1]);
        rows.push(SweepRow {
            density: *d,
            nnz: csr.nnz(),
            dense_ns,
            sparse_ns,
            ratio: sparse_ns as f64 / dense_ns.max(1) as f64,
            rel_err: sparse_out.rel_diff(&dense_out)?,
            sparse_out,
        });
    }
    Ok(rows)
}

/// Lowest density (in ascending order) at which sparse is no faster than dense.
pub fn crossover(rows: &[SweepRow]) -> Option<f64> {
    let mut sorted: Vec<&SweepRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.density.total_cmp(&b.density));
    sorted.iter().find(|r| r.ratio >= 1.0).map(|r| r.density)
}

/// Places where sparse time drops although density rises.
pub fn sparse_time_inversions(rows: &[SweepRow]) -> usize {
    let mut sorted: Vec<&SweepRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.density.total_cmp(&b.density));
    sorted.windows(2).filter(|w| w[1].sparse_ns < w[0].sparse_ns).count()
}
