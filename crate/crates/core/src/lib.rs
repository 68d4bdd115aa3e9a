//! Misguided learning under misspecified ability beliefs.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] – output technology, agents, optimal effort and the surprise function.
//! * [`equilibrium`] – Berk–Nash equilibrium beliefs and their verification.
//! * [`dynamics`] – grid posteriors, Bayes updating and round-by-round simulation.
//! * [`protocol`] – the marked-test experiment (marker, confidence screen, BDM bids)
//!   run on simulated subjects, producing CSV panels.
//! * [`econometrics`] – OLS, panel FE/RE, Hausman, difference GMM, t-tests, KDE and
//!   the distribution functions behind every p-value.
//! * [`clustering`] – EM Gaussian mixtures with BIC/AIC model selection.
//! * [`analysis`] – the table and figure pipelines that tie the above together.
//!
//! Batch work (Monte Carlo, panel generation, per-k mixture fits) goes through
//! [`par`], which uses rayon when the `parallel` feature is on and plain
//! iterators otherwise.

pub mod analysis;
pub mod clustering;
pub mod dynamics;
pub mod econometrics;
pub mod equilibrium;
mod error;
pub mod model;
pub mod par;
pub mod protocol;
pub mod seeds;
pub mod svg;

pub use error::{Error, Result};
