#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod clock;
pub mod error;
pub mod fit;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod nbody;
pub mod resolvent;
pub mod scattering;
pub mod spectral;

pub use error::{Error, Result};

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
pub struct BookIntroduction;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/grids.md")]
pub struct BookGrids;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/few_body.md")]
pub struct BookFewBody;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/clocks.md")]
pub struct BookClocks;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/spectral.md")]
pub struct BookSpectral;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/resolvent.md")]
pub struct BookResolvent;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/scattering.md")]
pub struct BookScattering;
