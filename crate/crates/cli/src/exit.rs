use rnls_core::Error;

/// Machine-readable exit classes.
pub const CONFIG: i32 = 2;
pub const TRUNCATION: i32 = 3;
pub const IO: i32 = 4;
pub const VERIFY_FAILED: i32 = 5;
pub const INTEGRITY: i32 = 6;

pub fn code_for(err: &Error) -> i32 {
    match err {
        Error::Config(_) => CONFIG,
        Error::Truncation { .. } => TRUNCATION,
        Error::Io(_) => IO,
        Error::Serde(_) => CONFIG,
        Error::Integrity(_) => INTEGRITY,
        Error::KernelResolution { .. }
        | Error::DyadicRange { .. }
        | Error::UndefinedRatio(_)
        | Error::Resolution(_)
        | Error::AnnulusSearch { .. }
        | Error::Window(_) => VERIFY_FAILED,
    }
}
