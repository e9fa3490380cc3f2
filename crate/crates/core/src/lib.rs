//! Joint half-array mode selection, time allocation and beamforming for a
//! full-duplex multi-user MISO cell.
//!
//! The BS has two half-arrays of `N` antennas. Over a block split into two
//! phases, each half-array either receives uplink users or transmits to
//! downlink users. For each of the eight non-redundant mode matrices the
//! continuous design (beamformers, uplink powers, phase split) is found by
//! successive convex approximation, each step a second-order cone program.
//!
//! Modules, bottom up:
//! - [`channel`]: topologies, path loss, channel draws and CSI error splits.
//! - [`mode`]: mode matrices and their masks.
//! - [`rate`]: exact SINRs, rates and the MMSE-SIC receiver.
//! - [`sca`]: minorant construction, subproblem assembly and the SCA loop.
//! - [`algorithms`]: sum-rate, max-min and robust sweeps, half-duplex
//!   baseline, brute-force oracle.

pub mod algorithms;
pub mod channel;
pub mod config;
pub mod error;
pub mod mode;
pub mod rate;
pub mod sca;

pub use config::SystemConfig;

// The book's code listings run as doctests of this crate.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/modes.md")]
    mod modes {}
    #[doc = include_str!("../../../book/src/rates.md")]
    mod rates {}
    #[doc = include_str!("../../../book/src/design.md")]
    mod design {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
