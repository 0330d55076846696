//! Simulation lab for arbitrated quantum signature (AQS) schemes.
//!
//! Two schemes are modelled: one where the signer and receiver share Bell
//! pairs and the message reaches the receiver by teleportation
//! ([`scheme_entangled`]), and one that uses only pre-shared pads
//! ([`scheme_plain`]). [`adversary`] drives the receiver-swap and
//! signature-transfer attacks and settles disputes; [`hardened`] holds
//! the three countermeasures that can be switched on per [`harness::Lab`].
//!
//! ```
//! use aqs_core::{hardened::CountermeasureSet, harness::{Lab, ParticipantId, Scheme}};
//! use aqs_core::qcore::QubitString;
//! use aqs_core::scheme_entangled::EntangledProtocol;
//!
//! let mut lab = Lab::new(Scheme::Entangled, 7, CountermeasureSet::BASELINE);
//! let message = QubitString::random(3, &mut lab.rng).unwrap();
//! let (_, outcome) = EntangledProtocol::run_honest(&mut lab, ParticipantId::Bob, &message).unwrap();
//! assert!(outcome.accepted());
//! ```

pub mod adversary;
pub mod cli;
pub mod error;
pub mod hardened;
pub mod harness;
pub mod qcore;
pub mod scheme_entangled;
pub mod scheme_plain;
pub mod verdict;

pub use error::{Error, Result};
