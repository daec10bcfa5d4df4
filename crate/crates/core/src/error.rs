use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Tensor extents do not fit the operation.
    #[error("dimension error: {0}")]
    Dimension(String),
    /// A configuration value is outside its allowed range.
    #[error("configuration error: {0}")]
    Config(String),
    /// The caller broke an API contract (e.g. backward from a non-scalar).
    #[error("contract error: {0}")]
    Contract(String),
    /// A NaN or infinity showed up where a finite value is required.
    #[error("non-finite value: {0}")]
    NonFinite(String),
}

macro_rules! dim_err {
    ($($arg:tt)*) => { $crate::Error::Dimension(alloc::format!($($arg)*)) };
}

macro_rules! config_err {
    ($($arg:tt)*) => { $crate::Error::Config(alloc::format!($($arg)*)) };
}

pub(crate) use config_err;
pub(crate) use dim_err;
