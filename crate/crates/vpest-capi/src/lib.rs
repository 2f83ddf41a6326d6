//! C ABI bindings for the vpest estimation library.
//!
//! The public surface follows the usual opaque-handle pattern: scenes are
//! built incrementally, estimation returns an opaque result handle, and all
//! functions report a status code. `include/vpest.h` is generated by
//! cbindgen at build time.

pub mod ffi;
pub use ffi::*;
