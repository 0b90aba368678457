//! Signal preprocessing: per-receiver 2D FFT, per-cell phase
//! normalization, input-tensor assembly and target-map construction.

mod fft;
mod input;
mod normalize;
mod targets;

pub use fft::{range_doppler, RangeDopplerCube, Window};
pub use input::{assemble_input, InputTensor, SCALE_FLOOR};
pub use normalize::{normalize_cell, normalize_cells, phase_normalize};
pub use targets::{disk_cells, make_targets, CellAnnotation, TargetMaps};
