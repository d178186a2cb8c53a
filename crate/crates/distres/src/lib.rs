//! File formats, the interior-point backend and the `distres` command line
//! around `distres-core`.

pub mod backend;
pub mod cli;
pub mod io;
pub mod manifest;
pub mod soundness;

pub use backend::ClarabelBackend;
pub use cli::WallClock;
