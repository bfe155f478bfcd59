//! Idealized signatures.
//!
//! The simulator does not need real cryptography: it needs the *consequences*
//! of unforgeable signatures. A [`Signature`] is a capability token over a
//! `(signer, message)` pair. Producing one is free, comparing one is O(1),
//! and the fields are private so the only way to obtain a valid tag is to
//! call [`sign`] — which attack drivers, by construction, only do for
//! processes under adversary control. Correct processes sign only what their
//! protocol logic tells them to.

use serde::{Deserialize, Serialize};

use crate::config::{Message, ProcessId};

/// Capability token proving that `signer` vouched for `message`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signature {
    signer: ProcessId,
    message: Message,
}

/// A message together with its claimed sender and the sender's signature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignedPayload {
    pub sender: ProcessId,
    pub message: Message,
    pub tag: Signature,
}

pub fn sign(signer: ProcessId, message: Message) -> Signature {
    Signature { signer, message }
}

/// Signs `message` as `sender` and wraps the result.
pub fn signed(sender: ProcessId, message: Message) -> SignedPayload {
    SignedPayload {
        sender,
        message,
        tag: sign(sender, message),
    }
}

/// Checks that the payload's tag was produced over exactly this
/// `(sender, message)` pair.
pub fn verify(payload: &SignedPayload) -> bool {
    payload.tag == sign(payload.sender, payload.message)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_verifies() {
        assert!(verify(&signed(3, 17)));
    }

    #[test]
    fn rejects_mismatches() {
        let mut p = signed(3, 17);
        p.sender = 4;
        assert!(!verify(&p));

        let mut p = signed(3, 17);
        p.message = 18;
        assert!(!verify(&p));

        let mut p = signed(3, 17);
        p.tag = sign(3, 18);
        assert!(!verify(&p));
    }
}
