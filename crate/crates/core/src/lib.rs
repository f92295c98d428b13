//! Dirichlet-based evidential classification with uncertainty
//! decomposition and two-round active selection for active domain
//! adaptation.
//!
//! A network's logits are mapped to Dirichlet concentrations α. The
//! predictive entropy of the mean opinion splits exactly into
//! *distribution uncertainty* (mutual information, high when evidence is
//! scarce) and *data uncertainty* (expected entropy, high when evidence
//! conflicts). Active selection shortlists the κ·b target samples with the
//! highest distribution uncertainty and labels the b among them with the
//! highest data uncertainty.

pub mod active;
pub mod data;
pub mod dirichlet;
mod error;
pub mod evidential;
pub mod losses;
pub mod metrics;
pub mod network;
pub mod oracle;
pub mod verify;

pub use error::{Error, Result};
