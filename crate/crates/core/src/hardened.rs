//! Receiver-binding countermeasures, each independently toggleable:
//!
//! 1. `bind_receiver_id`: the receiver's identity, as two computational-basis
//!    qubits, is appended to `|P'>` before the signer's pad, so the
//!    arbitrator can check it against whoever asks for verification.
//! 2. `announce_metadata`: board announcements carry announcer and logical
//!    time. Attribution only; nothing is blocked in flight.
//! 3. `preregister_receiver`: the signer names the receiver to the
//!    arbitrator before signing; requests from anyone else are refused.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{Announcement, Board, ParticipantId, ReceiverRegistry, SessionId, Topic};
use crate::qcore::{
    qotp_decrypt, qotp_encrypt, state_equal, PadKey, QubitString, DEFAULT_TOLERANCE,
};

/// Width of the receiver identity register.
pub const ID_QUBITS: usize = 2;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CountermeasureSet {
    pub bind_receiver_id: bool,
    pub announce_metadata: bool,
    pub preregister_receiver: bool,
}

impl CountermeasureSet {
    pub const BASELINE: CountermeasureSet = CountermeasureSet {
        bind_receiver_id: false,
        announce_metadata: false,
        preregister_receiver: false,
    };

    pub const ALL: CountermeasureSet = CountermeasureSet {
        bind_receiver_id: true,
        announce_metadata: true,
        preregister_receiver: true,
    };

    pub const NAMES: [&'static str; 3] = [
        "bind_receiver_id",
        "announce_metadata",
        "preregister_receiver",
    ];

    pub fn is_baseline(&self) -> bool {
        *self == CountermeasureSet::BASELINE
    }

    /// All eight subsets, baseline first.
    pub fn subsets() -> impl Iterator<Item = CountermeasureSet> {
        (0u8..8).map(|m| CountermeasureSet {
            bind_receiver_id: m & 1 != 0,
            announce_metadata: m & 2 != 0,
            preregister_receiver: m & 4 != 0,
        })
    }

    /// Whether the set stops a swap or transfer before it completes.
    pub fn prevents_in_flight(&self) -> bool {
        self.bind_receiver_id || self.preregister_receiver
    }

    /// Extra qubits appended to the signed payload.
    pub fn id_qubits(&self) -> usize {
        if self.bind_receiver_id {
            ID_QUBITS
        } else {
            0
        }
    }

    pub fn set(&mut self, name: &str, on: bool) -> Result<()> {
        let slot = match name.trim().trim_start_matches("harden.") {
            "bind_receiver_id" | "1" => &mut self.bind_receiver_id,
            "announce_metadata" | "2" => &mut self.announce_metadata,
            "preregister_receiver" | "3" => &mut self.preregister_receiver,
            other => return Err(Error::Config(format!("unknown countermeasure {other:?}"))),
        };
        *slot = on;
        Ok(())
    }

    /// Parses a comma-separated list of countermeasure names; `none` and
    /// `all` are accepted, as are the numbers 1-3.
    pub fn parse_list(text: &str) -> Result<Self> {
        let mut set = CountermeasureSet::BASELINE;
        for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item {
                "none" | "baseline" => {}
                "all" => set = CountermeasureSet::ALL,
                name => set.set(name, true)?,
            }
        }
        Ok(set)
    }

    pub fn names(&self) -> Vec<&'static str> {
        let flags = [
            self.bind_receiver_id,
            self.announce_metadata,
            self.preregister_receiver,
        ];
        Self::NAMES
            .iter()
            .zip(flags)
            .filter(|(_, on)| *on)
            .map(|(n, _)| *n)
            .collect()
    }
}

impl fmt::Display for CountermeasureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = self.names();
        if names.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&names.join(","))
        }
    }
}

fn id_code(id: ParticipantId) -> [bool; ID_QUBITS] {
    match id {
        ParticipantId::Alice => [false, false],
        ParticipantId::Bob => [false, true],
        ParticipantId::Charlie => [true, false],
        ParticipantId::Arbitrator => [true, true],
    }
}

/// Basis-qubit encoding of a participant identity.
pub fn encode_receiver_id(id: ParticipantId) -> QubitString {
    QubitString::from_bits(&id_code(id)).expect("identity code is non-empty")
}

/// Measures the identity register in the computational basis. Fails if any
/// qubit is not a basis state, since the outcome would then be random.
pub fn decode_receiver_id(register: &QubitString) -> Result<ParticipantId> {
    if register.len() != ID_QUBITS {
        return Err(Error::Length {
            left: register.len(),
            right: ID_QUBITS,
        });
    }
    let bits = register
        .iter()
        .map(|q| {
            q.basis_value()
                .ok_or_else(|| Error::InvalidState("identity qubit not in a basis state".into()))
        })
        .collect::<Result<Vec<_>>>()?;
    ParticipantId::ALL
        .into_iter()
        .find(|&p| id_code(p)[..] == bits[..])
        .ok_or_else(|| Error::InvalidState("unreadable identity register".into()))
}

fn check_receiver(receiver: ParticipantId) -> Result<()> {
    match receiver {
        ParticipantId::Bob | ParticipantId::Charlie => Ok(()),
        other => Err(Error::Config(format!("{other} cannot be a signature receiver"))),
    }
}

/// The string the signer's pad covers: `|P'>`, optionally followed by the
/// receiver's identity register.
pub fn signed_payload(p_prime: &QubitString, receiver: Option<ParticipantId>) -> Result<QubitString> {
    match receiver {
        None => Ok(p_prime.clone()),
        Some(r) => {
            check_receiver(r)?;
            Ok(p_prime.concat(&encode_receiver_id(r)))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReceiverBoundSignature {
    pub p_prime: QubitString,
    pub s_a: QubitString,
    pub r: PadKey,
}

/// Pads the message with a fresh `r` and signs `|P'> || id(receiver)` with
/// `k_a`. `k_a` must cover `N + 2` qubits.
pub fn sign_with_receiver_id<R: Rng + ?Sized>(
    message: &QubitString,
    receiver: ParticipantId,
    k_a: &PadKey,
    rng: &mut R,
) -> Result<ReceiverBoundSignature> {
    check_receiver(receiver)?;
    let r = PadKey::random(message.len(), rng);
    let p_prime = qotp_encrypt(&r, message)?;
    let s_a = qotp_encrypt(k_a, &signed_payload(&p_prime, Some(receiver))?)?;
    Ok(ReceiverBoundSignature { p_prime, s_a, r })
}

/// Arbitrator-side result of opening a receiver-bound signature.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BindingCheck {
    pub message_matches: bool,
    pub embedded: Option<ParticipantId>,
    pub requester: ParticipantId,
}

impl BindingCheck {
    pub fn identity_matches(&self) -> bool {
        self.embedded == Some(self.requester)
    }

    pub fn pass(&self) -> bool {
        self.message_matches && self.identity_matches()
    }
}

/// Decrypts `s_a` with `k_a`, compares the message part with `p_prime`, and
/// reads the embedded identity.
pub fn check_receiver_binding(
    s_a: &QubitString,
    p_prime: &QubitString,
    k_a: &PadKey,
    requester: ParticipantId,
) -> Result<BindingCheck> {
    if s_a.len() != p_prime.len() + ID_QUBITS {
        return Err(Error::Protocol(format!(
            "bound signature has {} qubits, expected {}",
            s_a.len(),
            p_prime.len() + ID_QUBITS
        )));
    }
    let opened = qotp_decrypt(k_a, s_a)?;
    let parts = opened.split(&[p_prime.len(), ID_QUBITS])?;
    Ok(BindingCheck {
        message_matches: state_equal(&parts[0], p_prime, DEFAULT_TOLERANCE)?,
        embedded: decode_receiver_id(&parts[1]).ok(),
        requester,
    })
}

/// Posts an announcement that carries its announcer and logical time.
pub fn announce_with_metadata(
    board: &mut Board,
    session: SessionId,
    topic: Topic,
    value: Vec<bool>,
    announcer: ParticipantId,
) -> Result<&Announcement> {
    if !board.with_metadata() {
        return Err(Error::Config(
            "board was opened without announcement metadata".into(),
        ));
    }
    Ok(board.announce(session, topic, value, announcer))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Access {
    Allow,
    Deny,
}

/// Arbitrator gate for verification requests. With pre-registration off
/// every request is allowed.
pub fn enforce_preregistration(
    registry: &ReceiverRegistry,
    countermeasures: &CountermeasureSet,
    session: SessionId,
    requester: ParticipantId,
) -> Result<Access> {
    if !countermeasures.preregister_receiver {
        return Ok(Access::Allow);
    }
    match registry.receiver(session) {
        None => Err(Error::DeniedUnregistered(session.0)),
        Some(r) if r == requester => Ok(Access::Allow),
        Some(_) => Ok(Access::Deny),
    }
}
