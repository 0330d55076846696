//! Outcome types shared by both schemes' verification phases.

use crate::harness::{ParticipantId, SessionId};
use crate::qcore::{PadKey, QubitString};

/// `(|S_A>, r)` kept by the receiver after acceptance.
#[derive(Clone, Debug, PartialEq)]
pub struct FinalSignature {
    pub s_a: QubitString,
    pub r: PadKey,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rejection {
    /// The arbitrator set its verification parameter to 0 or refused the
    /// request.
    Arbitrator,
    /// Teleported copy does not match `|P'>`.
    Teleport,
    /// The receiver's own check of `|P'>` failed (`V_B = 0`).
    Receiver,
}

#[derive(Clone, Debug, PartialEq)]
pub enum BobVerdict {
    Accepted {
        message: QubitString,
        signature: FinalSignature,
    },
    Rejected(Rejection),
}

/// Result of one verification request driven through the lab.
#[derive(Clone, Debug, PartialEq)]
pub struct VerifyOutcome {
    pub verifier: ParticipantId,
    pub session: SessionId,
    pub verdict: BobVerdict,
    /// The arbitrator set its parameter to 0 or refused the request.
    pub arbitrator_flagged: bool,
    pub denied: bool,
}

impl VerifyOutcome {
    pub fn accepted(&self) -> bool {
        matches!(self.verdict, BobVerdict::Accepted { .. })
    }

    pub fn recovered(&self) -> Option<&QubitString> {
        match &self.verdict {
            BobVerdict::Accepted { message, .. } => Some(message),
            BobVerdict::Rejected(_) => None,
        }
    }

    pub fn final_signature(&self) -> Option<&FinalSignature> {
        match &self.verdict {
            BobVerdict::Accepted { signature, .. } => Some(signature),
            BobVerdict::Rejected(_) => None,
        }
    }
}
