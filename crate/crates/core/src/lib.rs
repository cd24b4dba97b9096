//! Integer tiles and spectra of Cantor-Moran measures with equidifferent
//! digit sets `D_k = {0, 1, ..., N-1} t_k`.

mod bigser;
pub mod certificate;
pub mod config;
pub mod error;
pub mod existence;
pub mod fourier;
pub mod numthy;
pub mod sequence;
pub mod spectra;
pub mod system;
pub mod tiling;

pub use error::{MoranError, Result};
pub use numthy::{ExactRational, Valuation};
pub use sequence::SequenceSpec;
pub use system::MoranSystem;
