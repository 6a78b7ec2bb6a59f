//! Behavioral models of an RF-powered sensor node: the harvesting chain
//! (antenna interface, rectifier, DC-DC converter, MPPT), the sub-GHz UWB
//! transmitter and its link, the LNA noise budget and the level-crossing
//! ADC with backscatter encoding.
//!
//! Each module is usable on its own. [`config`] ties them into a single
//! scenario file and [`acceptance`] bundles the end-to-end checks.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod config;
pub mod dcdc;
pub mod error;
pub mod interface;
pub mod lcadc;
pub mod link;
pub mod lna;
pub mod mppt;
pub mod output;
pub mod quantities;
pub mod rectifier;
pub mod uwb;

pub use error::{Error, Result};
pub use quantities::{
    dbm_to_watts, psd_estimate, watts_to_dbm, ComplexImpedance, PowerDbm, PowerWatts, RationalTf,
    Spectrum, Waveform,
};
