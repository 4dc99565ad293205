//! Finite truncations of positive-energy SL(2,ℝ) representations, local
//! states in them, and the modular coordinate `T = ½ log(2C̃)`.
//!
//! The guide lives in `book/`; its chapters are compiled below so that the
//! code in them runs as doctests.

pub mod artifact;
pub mod grid_oracle;
pub mod laguerre;
pub mod linalg;
pub mod localization;
pub mod mobius_geometry;
pub mod spectral_rep;
pub mod verification;

/// Chapters of the guide.
pub mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
    #[doc = include_str!("../../../book/src/config.md")]
    pub mod config {}
    #[doc = include_str!("../../../book/src/representation.md")]
    pub mod representation {}
    #[doc = include_str!("../../../book/src/localization.md")]
    pub mod localization {}
    #[doc = include_str!("../../../book/src/reports.md")]
    pub mod reports {}
    #[doc = include_str!("../../../book/src/artifacts.md")]
    pub mod artifacts {}
    #[doc = include_str!("../../../book/src/conventions.md")]
    pub mod conventions {}
}
