//! Polynomial codes for straggler-tolerant distributed matrix multiplication.
//!
//! `M0` is cut into `p0 x p1` blocks and `M1` into `p1 x p2`. A [`schemes::Scheme`]
//! encodes both as polynomials over a prime field, workers multiply
//! evaluations, and the master recovers `M0 * M1` from any complete
//! evaluation grid. Around that core sit exact overhead accounting
//! ([`overheads`]), a latency simulator ([`straggler`]), a partition search
//! ([`optimizer`]), a threaded executor ([`runtime`]) and the CLI ([`cli`]).
//!
//! ```
//! use polycodes::blockmat::{Matrix, PartitionScheme};
//! use polycodes::ffield::PrimeModulus;
//! use polycodes::schemes::{Scheme, SchemeKind};
//!
//! let q = PrimeModulus::default_field();
//! let a = Matrix::from_rows(&[&[1, 2], &[3, 4]], q).unwrap();
//! let b = Matrix::from_rows(&[&[5, 6], &[7, 8]], q).unwrap();
//! let p = PartitionScheme::new(2, 2, 2).unwrap();
//! let c = Scheme::new(SchemeKind::Bi2, p).multiply(&a, &b).unwrap();
//! assert_eq!(c, a.multiply(&b).unwrap());
//! ```

pub mod blockmat;
pub mod cli;
pub mod ffield;
pub mod optimizer;
pub mod overheads;
pub mod runtime;
pub mod schemes;
pub mod straggler;

// The guide's snippets run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/field.md")]
    mod field {}
    #[doc = include_str!("../../../book/src/partitioning.md")]
    mod partitioning {}
    #[doc = include_str!("../../../book/src/schemes.md")]
    mod schemes {}
    #[doc = include_str!("../../../book/src/overheads.md")]
    mod overheads {}
    #[doc = include_str!("../../../book/src/latency.md")]
    mod latency {}
    #[doc = include_str!("../../../book/src/optimizer.md")]
    mod optimizer {}
    #[doc = include_str!("../../../book/src/runtime.md")]
    mod runtime {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
