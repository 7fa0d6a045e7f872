//! Discrete harmonic analysis for the Laplacian on ℤ, on finite windows.
//!
//! Sequences are finitely supported; operators act through the Fourier
//! multiplier of `√Δ`, evaluated by FFT on a periodic grid large enough for
//! the window in use.

pub mod error;
pub mod family;
pub mod heat;
pub mod lpaley;
pub mod maximal;
pub mod molec;
pub mod multop;
pub mod quad;
pub mod seq;
pub mod spaces;
pub mod spectral;
pub mod sum;
pub mod symbols;

pub use error::{Error, Result};
pub use lpaley::{make_partition, Partition, DEFAULT_JMIN};
pub use seq::{Sequence, SequenceJson};
pub use spaces::{NormReport, SpaceSpec};
pub use spectral::{apply_symbol, synthesize_kernel, Applied, SpectralGrid, Symbol};
