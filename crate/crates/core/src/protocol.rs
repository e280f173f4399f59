//! The 7-step two-party exchange over commutative PUFs.
//!
//! 1. Bob encrypts `m` with his PUF. 2. Bob sends `M'`.
//! 3. Alice encrypts `M'` with hers. 4. Alice sends `M''`.
//! 5. Bob decrypts with his inverse. 6. Bob sends `M'''`.
//! 7. Alice decrypts with her inverse and should recover `m`.
//!
//! Three variants are modeled. `NoPermutation` applies each keyed PUF and its
//! reverse-direction inverse; delay terms land on the wrong bits and the
//! exchange fails. `WithPermutation` follows every PUF with a delay-free
//! permutator that restores bit order; it round-trips but `M' ^ M'' ^ M'''`
//! leaks the plaintext. `SharedKey` has both parties use one key: Bob
//! rotates by `s`, Alice by `w - s`, and every round runs forward so each
//! party's second pass cancels its first.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::block::Block;
use crate::error::{check_width, PufError, Result};
use crate::puf_model::{DelayMatrix, Direction, ResponseConfig, ShiftKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    NoPermutation,
    WithPermutation,
    SharedKey,
}

impl Variant {
    pub const ALL: [Variant; 3] = [
        Variant::NoPermutation,
        Variant::WithPermutation,
        Variant::SharedKey,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::NoPermutation => "no-permutation",
            Variant::WithPermutation => "with-permutation",
            Variant::SharedKey => "shared-key",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = PufError;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| PufError::Param(format!("unknown protocol variant {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Bob,
    Alice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Encrypt,
    Decrypt,
}

/// A protocol participant. The chip is private: the only way to use it is
/// [`Party::apply_round`].
#[derive(Debug, Clone)]
pub struct Party {
    role: Role,
    chip: DelayMatrix,
    key: ShiftKey,
}

impl Party {
    pub fn new(role: Role, chip: DelayMatrix, key: ShiftKey) -> Result<Self> {
        check_width(chip.stages(), key.stages())?;
        Ok(Self { role, chip, key })
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn key(&self) -> &ShiftKey {
        &self.key
    }

    pub fn width(&self) -> usize {
        self.chip.width()
    }

    pub fn apply_round(
        &self,
        message: &Block,
        phase: Phase,
        variant: Variant,
        cfg: ResponseConfig,
    ) -> Result<Block> {
        check_width(self.width(), message.width())?;
        let forward = cfg.with_direction(Direction::Forward);
        match variant {
            Variant::SharedKey => {
                let key = match self.role {
                    Role::Bob => self.key.clone(),
                    Role::Alice => self.key.complement(),
                };
                self.chip.respond(message, &key, forward)
            }
            Variant::WithPermutation => {
                let s = self.key.amount();
                let w = self.width();
                match phase {
                    Phase::Encrypt => Ok(self
                        .chip
                        .respond(message, &self.key, forward)?
                        .rotate(w - s)),
                    Phase::Decrypt => self.chip.respond(
                        &message.rotate(s),
                        &self.key,
                        cfg.with_direction(Direction::Reverse),
                    ),
                }
            }
            Variant::NoPermutation => {
                let direction = match phase {
                    Phase::Encrypt => Direction::Forward,
                    Phase::Decrypt => Direction::Reverse,
                };
                self.chip
                    .respond(message, &self.key, cfg.with_direction(direction))
            }
        }
    }
}

/// A public message on the wire. `step` is 2, 4 or 6.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WireMessage {
    pub step: u8,
    pub payload: Block,
}

impl WireMessage {
    pub fn label(&self) -> &'static str {
        match self.step {
            2 => "M'",
            4 => "M''",
            6 => "M'''",
            _ => "?",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transcript {
    pub variant: Variant,
    pub plaintext: Block,
    pub m_prime: Block,
    pub m_double: Block,
    pub m_triple: Block,
    /// Alice's step-7 output.
    pub final_block: Block,
}

impl Transcript {
    pub fn width(&self) -> usize {
        self.plaintext.width()
    }

    pub fn succeeded(&self) -> bool {
        self.final_block == self.plaintext
    }

    pub fn messages(&self) -> [WireMessage; 3] {
        [
            WireMessage {
                step: 2,
                payload: self.m_prime.clone(),
            },
            WireMessage {
                step: 4,
                payload: self.m_double.clone(),
            },
            WireMessage {
                step: 6,
                payload: self.m_triple.clone(),
            },
        ]
    }

    pub fn to_json(&self) -> Result<String> {
        let file = TranscriptFile {
            variant: self.variant,
            width: self.width(),
            plaintext: self.plaintext.to_hex(),
            messages: self
                .messages()
                .iter()
                .map(|m| StepRecord {
                    step: m.step,
                    label: m.label().to_string(),
                    payload: m.payload.to_hex(),
                })
                .collect(),
            final_block: self.final_block.to_hex(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: TranscriptFile = serde_json::from_str(s)?;
        let w = file.width;
        let payload = |step: u8| -> Result<Block> {
            let rec = file
                .messages
                .iter()
                .find(|m| m.step == step)
                .ok_or_else(|| PufError::Format(format!("transcript missing step {step}")))?;
            Block::from_hex(&rec.payload, w)
        };
        Ok(Self {
            variant: file.variant,
            plaintext: Block::from_hex(&file.plaintext, w)?,
            m_prime: payload(2)?,
            m_double: payload(4)?,
            m_triple: payload(6)?,
            final_block: Block::from_hex(&file.final_block, w)?,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct TranscriptFile {
    variant: Variant,
    width: usize,
    plaintext: String,
    messages: Vec<StepRecord>,
    #[serde(rename = "final")]
    final_block: String,
}

#[derive(Serialize, Deserialize)]
struct StepRecord {
    step: u8,
    label: String,
    payload: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Start,
    SentPrime,
    SentDouble,
    SentTriple,
    Done,
}

/// Step-by-step driver for one exchange.
pub struct Session<'a> {
    bob: &'a Party,
    alice: &'a Party,
    variant: Variant,
    cfg: ResponseConfig,
    state: State,
    wire: Vec<WireMessage>,
    received: Option<Block>,
}

impl<'a> Session<'a> {
    pub fn new(
        bob: &'a Party,
        alice: &'a Party,
        variant: Variant,
        cfg: ResponseConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if bob.role != Role::Bob || alice.role != Role::Alice {
            return Err(PufError::Param("parties must be (Bob, Alice)".into()));
        }
        check_width(bob.width(), alice.width())?;
        if variant == Variant::SharedKey && bob.key != alice.key {
            return Err(PufError::KeyMismatch);
        }
        Ok(Self {
            bob,
            alice,
            variant,
            cfg,
            state: State::Start,
            wire: Vec::with_capacity(3),
            received: None,
        })
    }

    /// Runs the next compute step and returns the message it puts on the
    /// wire, or `None` once Alice has produced her final output.
    pub fn advance(&mut self, plaintext: &Block) -> Result<Option<WireMessage>> {
        let (party, phase, input, step, next) = match self.state {
            State::Start => (self.bob, Phase::Encrypt, plaintext, 2, State::SentPrime),
            State::SentPrime => (
                self.alice,
                Phase::Encrypt,
                self.last()?,
                4,
                State::SentDouble,
            ),
            State::SentDouble => (self.bob, Phase::Decrypt, self.last()?, 6, State::SentTriple),
            State::SentTriple => {
                let out =
                    self.alice
                        .apply_round(self.last()?, Phase::Decrypt, self.variant, self.cfg)?;
                self.received = Some(out);
                self.state = State::Done;
                return Ok(None);
            }
            State::Done => return Ok(None),
        };
        let payload = party.apply_round(input, phase, self.variant, self.cfg)?;
        let msg = WireMessage { step, payload };
        self.wire.push(msg.clone());
        self.state = next;
        Ok(Some(msg))
    }

    fn last(&self) -> Result<&Block> {
        self.wire
            .last()
            .map(|m| &m.payload)
            .ok_or(PufError::Empty("no message on the wire"))
    }

    pub fn is_done(&self) -> bool {
        self.state == State::Done
    }

    pub fn into_transcript(self, plaintext: Block) -> Result<Transcript> {
        let final_block = self
            .received
            .ok_or(PufError::Empty("session not finished"))?;
        let mut wire = self.wire.into_iter().map(|m| m.payload);
        let (Some(m_prime), Some(m_double), Some(m_triple)) =
            (wire.next(), wire.next(), wire.next())
        else {
            return Err(PufError::Empty("session not finished"));
        };
        Ok(Transcript {
            variant: self.variant,
            plaintext,
            m_prime,
            m_double,
            m_triple,
            final_block,
        })
    }
}

pub fn run_session(
    bob: &Party,
    alice: &Party,
    plaintext: &Block,
    variant: Variant,
    cfg: ResponseConfig,
) -> Result<Transcript> {
    check_width(bob.width(), plaintext.width())?;
    let mut session = Session::new(bob, alice, variant, cfg)?;
    while !session.is_done() {
        session.advance(plaintext)?;
    }
    session.into_transcript(plaintext.clone())
}
