//! Multilayer LSTM forward passes: sequential and anti-diagonal wavefront.

mod cell;
mod grid;
mod model;

pub use cell::{lstm_cell, LstmLayer, LstmParams, Matrix, GATES};
pub use grid::{diagonal, diagonals, lstm_forward_seq, lstm_forward_wavefront, LstmGrid};
pub use model::{lstm_dependence_model, WAVEFRONT_SCRIPT};
