pub mod channel;
pub mod coding;
pub mod compliance;
pub mod config;
pub mod error;
pub mod linksim;
pub mod mimo;
pub mod modem;
pub mod montecarlo;
pub mod sps;
pub mod techprofiles;

pub use error::{Error, Result};
