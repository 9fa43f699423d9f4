use rayon::prelude::*;

use super::cell::{lstm_cell, LstmParams};
use crate::error::{Error, Result};

/// Hidden and cell states of every (layer, step). The number of steps is
/// whatever the input sequence holds at call time.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmGrid {
    pub layers: usize,
    pub steps: usize,
    pub hidden: usize,
    h: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
}

impl LstmGrid {
    fn new(layers: usize, steps: usize, hidden: usize) -> Self {
        let n = layers * steps;
        LstmGrid { layers, steps, hidden, h: vec![Vec::new(); n], c: vec![Vec::new(); n] }
    }

    pub fn h(&self, l: usize, t: usize) -> &[f64] {
        &self.h[l * self.steps + t]
    }

    pub fn c(&self, l: usize, t: usize) -> &[f64] {
        &self.c[l * self.steps + t]
    }

    /// Top-layer outputs for every step.
    pub fn outputs(&self) -> Vec<&[f64]> {
        (0..self.steps).map(|t| self.h(self.layers - 1, t)).collect()
    }

    /// `max|a-b| / max|b|` over all hidden and cell states.
    pub fn rel_diff(&self, other: &LstmGrid) -> Result<f64> {
        if (self.layers, self.steps, self.hidden) != (other.layers, other.steps, other.hidden) {
            return Err(Error::Shape("grids differ in size".into()));
        }
        let (mut diff, mut norm) = (0.0f64, 0.0f64);
        for (a, b) in self.h.iter().chain(&self.c).zip(other.h.iter().chain(&other.c)) {
            for (x, y) in a.iter().zip(b) {
                diff = diff.max((x - y).abs());
                norm = norm.max(y.abs());
            }
        }
        Ok(if norm > 0.0 { diff / norm } else { diff })
    }

    /// Every state value, for checksums.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.h.iter().chain(&self.c).flatten().copied()
    }

    fn set(&mut self, l: usize, t: usize, (h, c): (Vec<f64>, Vec<f64>)) {
        let i = l * self.steps + t;
        self.h[i] = h;
        self.c[i] = c;
    }
}

fn check(params: &LstmParams, inputs: &[Vec<f64>]) -> Result<()> {
    params.validate()?;
    if inputs.is_empty() {
        return Err(Error::Invalid("sequence length must be at least 1".into()));
    }
    if let Some(t) = inputs.iter().position(|x| x.len() != params.input_dim) {
        return Err(Error::Shape(format!("input {t} has {} values, expected {}", inputs[t].len(), params.input_dim)));
    }
    if params.layers.is_empty() {
        return Err(Error::Invalid("no layers".into()));
    }
    Ok(())
}

/// Cell `(l, t)` from its finished neighbours in `g`.
fn step(params: &LstmParams, inputs: &[Vec<f64>], g: &LstmGrid, l: usize, t: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let zero = vec![0.0; params.hidden];
    let x = if l == 0 { &inputs[t][..] } else { g.h(l - 1, t) };
    let (hp, cp) = if t == 0 { (&zero[..], &zero[..]) } else { (g.h(l, t - 1), g.c(l, t - 1)) };
    lstm_cell(&params.layers[l], x, hp, cp)
}

/// Layer by layer, step by step.
pub fn lstm_forward_seq(params: &LstmParams, inputs: &[Vec<f64>]) -> Result<LstmGrid> {
    check(params, inputs)?;
    let mut g = LstmGrid::new(params.layers.len(), inputs.len(), params.hidden);
    for l in 0..g.layers {
        for t in 0..g.steps {
            let s = step(params, inputs, &g, l, t)?;
            g.set(l, t, s);
        }
    }
    Ok(g)
}

/// Cells of anti-diagonal `w = l + t`, in increasing `l`.
pub fn diagonal(layers: usize, steps: usize, w: usize) -> Vec<(usize, usize)> {
    let lo = (w + 1).saturating_sub(steps);
    let hi = w.min(layers - 1);
    (lo..=hi).map(|l| (l, w - l)).collect()
}

/// All anti-diagonals `w` in `0..layers + steps - 1`.
pub fn diagonals(layers: usize, steps: usize) -> Vec<Vec<(usize, usize)>> {
    if layers == 0 || steps == 0 {
        return Vec::new();
    }
    (0..layers + steps - 1).map(|w| diagonal(layers, steps, w)).collect()
}

/// Diagonal by diagonal; the cells of one diagonal run concurrently on
/// `workers` threads and each diagonal finishes before the next starts.
pub fn lstm_forward_wavefront(params: &LstmParams, inputs: &[Vec<f64>], workers: usize) -> Result<LstmGrid> {
    check(params, inputs)?;
    let mut g = LstmGrid::new(params.layers.len(), inputs.len(), params.hidden);
    let pool = if workers > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?,
        )
    } else {
        None
    };
    for cells in diagonals(g.layers, g.steps) {
        let run = |&(l, t): &(usize, usize)| step(params, inputs, &g, l, t).map(|s| (l, t, s));
        let done: Vec<_> = match &pool {
            Some(p) if cells.len() > 1 => p.install(|| cells.par_iter().map(run).collect::<Result<_>>())?,
            _ => cells.iter().map(run).collect::<Result<_>>()?,
        };
        for (l, t, s) in done {
            g.set(l, t, s);
        }
    }
    Ok(g)
}
