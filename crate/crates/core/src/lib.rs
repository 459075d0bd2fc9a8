pub mod error;
pub mod filterbank;
pub mod harness;
pub mod irdatagen;
pub mod nccnet;
pub mod patch;
pub mod patchmath;

pub use error::{Error, Result};
pub use patch::Patch;
