//! Simulated environment shared by both schemes: participants, keyed
//! channels, the public board, key pre-sharing, the arbitrator's receiver
//! registry, and the transcript with its line-delimited file format.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hardened::CountermeasureSet;
use crate::qcore::{BellPair, PadKey, QubitString};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ParticipantId {
    Alice,
    Bob,
    Charlie,
    Arbitrator,
}

impl ParticipantId {
    pub const ALL: [ParticipantId; 4] = [
        ParticipantId::Alice,
        ParticipantId::Bob,
        ParticipantId::Charlie,
        ParticipantId::Arbitrator,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParticipantId::Alice => "Alice",
            ParticipantId::Bob => "Bob",
            ParticipantId::Charlie => "Charlie",
            ParticipantId::Arbitrator => "Arbitrator",
        }
    }
}

impl fmt::Display for ParticipantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ParticipantId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ParticipantId::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown participant {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SessionId(pub u64);

impl fmt::Display for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Entangled,
    Plain,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Entangled => "entangled",
            Scheme::Plain => "plain",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "entangled" => Ok(Scheme::Entangled),
            "plain" => Ok(Scheme::Plain),
            other => Err(Error::Config(format!("unknown scheme {other:?}"))),
        }
    }
}

// ---------------------------------------------------------------------------
// Digests

const DIGEST_SCALE: f64 = 1e12;

fn hex_prefix(bytes: &[u8]) -> String {
    bytes[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Stable digest of a qubit string: amplitudes quantized to 12 decimal
/// digits, hashed with SHA-256, first 16 hex characters.
pub fn digest_qubits(s: &QubitString) -> String {
    let mut hasher = Sha256::new();
    hasher.update(b"q");
    for q in s.iter() {
        for part in [q.amp0().re, q.amp0().im, q.amp1().re, q.amp1().im] {
            let quantized = (part * DIGEST_SCALE).round() as i64;
            hasher.update(quantized.to_le_bytes());
        }
    }
    hex_prefix(&hasher.finalize())
}

pub fn digest_bits(bits: &[bool]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(b"b");
    hasher.update(bits.iter().map(|&b| b as u8).collect::<Vec<_>>());
    hex_prefix(&hasher.finalize())
}

pub fn digest_text(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(b"t");
    hasher.update(text.as_bytes());
    hex_prefix(&hasher.finalize())
}

// ---------------------------------------------------------------------------
// Transcript

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    KeyShare,
    Register,
    BellDistribute,
    Encrypt,
    Compose,
    BellMeasure,
    Send,
    Decrypt,
    Compare,
    RegistryCheck,
    IdentityCheck,
    FlagCheck,
    Announce,
    Recover,
    SwapHalves,
    Forward,
    Tamper,
}

/// One transcript record. `actor` is absent only for board announcements
/// made without identity metadata; `subject` names the party an event
/// concerns (channel recipient, registered receiver, checked requester).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Event {
    pub time: u64,
    pub actor: Option<ParticipantId>,
    pub kind: EventKind,
    pub step: String,
    pub digest: String,
    pub session: SessionId,
    pub subject: Option<ParticipantId>,
    pub pass: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Transcript {
    pub scheme: Option<Scheme>,
    events: Vec<Event>,
    verdicts: BTreeMap<String, bool>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderRecord {
    scheme: Scheme,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VerdictRecord {
    check: String,
    pass: bool,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Record {
    Event(Event),
    Verdict(VerdictRecord),
    Header(HeaderRecord),
}

/// Builder-style description of an event before it is timestamped.
#[derive(Clone, Debug)]
pub struct EventSpec {
    pub actor: Option<ParticipantId>,
    pub kind: EventKind,
    pub step: &'static str,
    pub digest: String,
    pub session: SessionId,
    pub subject: Option<ParticipantId>,
    pub pass: Option<bool>,
}

impl EventSpec {
    pub fn new(
        actor: ParticipantId,
        kind: EventKind,
        step: &'static str,
        session: SessionId,
        digest: String,
    ) -> Self {
        EventSpec {
            actor: Some(actor),
            kind,
            step,
            digest,
            session,
            subject: None,
            pass: None,
        }
    }

    pub fn subject(mut self, who: ParticipantId) -> Self {
        self.subject = Some(who);
        self
    }

    pub fn pass(mut self, ok: bool) -> Self {
        self.pass = Some(ok);
        self
    }
}

impl Transcript {
    pub fn new(scheme: Scheme) -> Self {
        Transcript {
            scheme: Some(scheme),
            ..Default::default()
        }
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn verdicts(&self) -> &BTreeMap<String, bool> {
        &self.verdicts
    }

    fn next_time(&self) -> u64 {
        self.events.last().map_or(1, |e| e.time + 1)
    }

    pub fn record(&mut self, spec: EventSpec) -> &Event {
        let event = Event {
            time: self.next_time(),
            actor: spec.actor,
            kind: spec.kind,
            step: spec.step.to_string(),
            digest: spec.digest,
            session: spec.session,
            subject: spec.subject,
            pass: spec.pass,
        };
        self.events.push(event);
        self.events.last().unwrap()
    }

    pub fn set_verdict(&mut self, check: impl Into<String>, pass: bool) {
        self.verdicts.insert(check.into(), pass);
    }

    /// Appends another transcript's events, re-based to follow this one's
    /// clock, and merges its verdicts under `prefix`.
    pub fn absorb(&mut self, other: Transcript, prefix: &str) {
        let offset = self.next_time() - 1;
        self.events.extend(other.events.into_iter().map(|mut e| {
            e.time += offset;
            e
        }));
        for (check, pass) in other.verdicts {
            self.verdicts.insert(format!("{prefix}{check}"), pass);
        }
    }

    pub fn events_in(&self, session: SessionId) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.session == session)
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        if let Some(scheme) = self.scheme {
            serde_json::to_writer(&mut out, &HeaderRecord { scheme }).map_err(io_err)?;
            out.write_all(b"\n")?;
        }
        for event in &self.events {
            serde_json::to_writer(&mut out, event).map_err(io_err)?;
            out.write_all(b"\n")?;
        }
        for (check, &pass) in &self.verdicts {
            let record = VerdictRecord {
                check: check.clone(),
                pass,
            };
            serde_json::to_writer(&mut out, &record).map_err(io_err)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(input: R) -> Result<Self> {
        let mut transcript = Transcript::default();
        for (index, line) in BufReader::new(input).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: Record = serde_json::from_str(&line).map_err(|source| Error::Parse {
                line: index + 1,
                source,
            })?;
            match record {
                Record::Header(h) => transcript.scheme = Some(h.scheme),
                Record::Event(e) => transcript.events.push(e),
                Record::Verdict(v) => {
                    transcript.verdicts.insert(v.check, v.pass);
                }
            }
        }
        Ok(transcript)
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }
}

fn io_err(e: serde_json::Error) -> Error {
    Error::Io(e.into())
}

pub fn transcript_write(t: &Transcript, sink: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(sink)?);
    t.write_to(&mut out)?;
    out.flush()?;
    Ok(())
}

pub fn transcript_read(source: &Path) -> Result<Transcript> {
    Transcript::read_from(File::open(source)?)
}

// ---------------------------------------------------------------------------
// Keys

fn pair_key(a: ParticipantId, b: ParticipantId) -> (ParticipantId, ParticipantId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Pre-shared pad keys, one per unordered pair of participants. Both holders
/// read the same entry.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KeyTable {
    keys: BTreeMap<(ParticipantId, ParticipantId), PadKey>,
}

impl KeyTable {
    /// Draws a fresh uniform key of `bits` bits for the pair.
    pub fn share<R: Rng + ?Sized>(
        &mut self,
        a: ParticipantId,
        b: ParticipantId,
        bits: usize,
        rng: &mut R,
    ) -> Result<&PadKey> {
        if a == b {
            return Err(Error::Config(format!("{a} cannot share a key with itself")));
        }
        if bits < 2 || !bits.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "key length must be an even number of at least 2 bits, got {bits}"
            )));
        }
        let slot = pair_key(a, b);
        if self.keys.contains_key(&slot) {
            return Err(Error::Config(format!("duplicate key pair ({a}, {b})")));
        }
        Ok(self
            .keys
            .entry(slot)
            .or_insert_with(|| PadKey::random(bits / 2, rng)))
    }

    /// The key as seen by `holder` for its link to `peer`.
    pub fn key(&self, holder: ParticipantId, peer: ParticipantId) -> Result<&PadKey> {
        self.keys
            .get(&pair_key(holder, peer))
            .ok_or_else(|| Error::Protocol(format!("{holder} shares no key with {peer}")))
    }

    pub fn pairs(&self) -> impl Iterator<Item = (ParticipantId, ParticipantId)> + '_ {
        self.keys.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn digest(&self) -> String {
        let text: String = self
            .keys
            .iter()
            .map(|((a, b), k)| format!("{a}-{b}:{k};"))
            .collect();
        digest_text(&text)
    }
}

/// Stand-in for key distribution: every listed pair ends up holding an
/// identical uniformly random key of `length` bits.
pub fn preshare_keys<R: Rng + ?Sized>(
    parties: &[(ParticipantId, ParticipantId)],
    length: usize,
    rng: &mut R,
) -> Result<KeyTable> {
    let mut table = KeyTable::default();
    for &(a, b) in parties {
        table.share(a, b, length, rng)?;
    }
    Ok(table)
}

// ---------------------------------------------------------------------------
// Channels

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Channel {
    pub from: ParticipantId,
    pub to: ParticipantId,
    pub authenticated: bool,
}

impl Channel {
    pub fn new(from: ParticipantId, to: ParticipantId, authenticated: bool) -> Result<Self> {
        if from == to {
            return Err(Error::Config(format!("channel from {from} to itself")));
        }
        Ok(Channel {
            from,
            to,
            authenticated,
        })
    }

    pub fn authenticated(from: ParticipantId, to: ParticipantId) -> Result<Self> {
        Channel::new(from, to, true)
    }

    /// Logs a transmission over this channel.
    pub fn send(
        &self,
        transcript: &mut Transcript,
        step: &'static str,
        session: SessionId,
        digest: String,
    ) {
        transcript.record(
            EventSpec::new(self.from, EventKind::Send, step, session, digest).subject(self.to),
        );
    }
}

/// Step I2: `n` fresh pairs, first halves with Alice, second halves with `to`.
pub fn distribute_bell_pairs(
    transcript: &mut Transcript,
    session: SessionId,
    n: usize,
    to: ParticipantId,
) -> Result<Vec<BellPair>> {
    if n == 0 {
        return Err(Error::Config("need at least one Bell pair".into()));
    }
    let pairs: Vec<_> = (0..n)
        .map(|_| BellPair::fresh(ParticipantId::Alice, to))
        .collect();
    for i in 0..n {
        transcript.record(
            EventSpec::new(
                ParticipantId::Alice,
                EventKind::BellDistribute,
                "I2",
                session,
                digest_text(&format!("pair{i}")),
            )
            .subject(to),
        );
    }
    Ok(pairs)
}

// ---------------------------------------------------------------------------
// Public board

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topic {
    /// Arbitrator's verification parameter (V_T).
    ArbitratorVerdict,
    /// Receiver's verification parameter (V_B).
    ReceiverVerdict,
    /// A receiver asking the signer to open her pad.
    RevealRequest,
    /// The signer's pad `r`.
    PadReveal,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Announcement {
    pub value: Vec<bool>,
    pub topic: Topic,
    pub announcer: Option<ParticipantId>,
    pub time: Option<u64>,
    pub session: SessionId,
}

/// Append-only broadcast board, global across sessions. Identity and
/// logical time are attached only when the board runs with metadata.
#[derive(Clone, Debug, Default)]
pub struct Board {
    with_metadata: bool,
    clock: u64,
    entries: Vec<Announcement>,
}

impl Board {
    pub fn new(with_metadata: bool) -> Self {
        Board {
            with_metadata,
            ..Default::default()
        }
    }

    pub fn with_metadata(&self) -> bool {
        self.with_metadata
    }

    pub fn announce(
        &mut self,
        session: SessionId,
        topic: Topic,
        value: Vec<bool>,
        announcer: ParticipantId,
    ) -> &Announcement {
        self.clock += 1;
        let (announcer, time) = if self.with_metadata {
            (Some(announcer), Some(self.clock))
        } else {
            (None, None)
        };
        self.entries.push(Announcement {
            value,
            topic,
            announcer,
            time,
            session,
        });
        self.entries.last().unwrap()
    }

    pub fn entries(&self) -> &[Announcement] {
        &self.entries
    }

    /// Most recent announcement on `topic` for `session`.
    pub fn latest(&self, session: SessionId, topic: Topic) -> Option<&Announcement> {
        self.entries
            .iter()
            .rev()
            .find(|a| a.session == session && a.topic == topic)
    }

    /// Reads a one-bit verification parameter.
    pub fn read_flag(&self, session: SessionId, topic: Topic) -> Option<bool> {
        self.latest(session, topic)
            .map(|a| a.value.first().copied().unwrap_or(false))
    }
}

// ---------------------------------------------------------------------------
// Arbitrator registry

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReceiverRegistry {
    entries: BTreeMap<SessionId, (ParticipantId, ParticipantId)>,
}

impl ReceiverRegistry {
    /// Records that `signer` will sign for `receiver` in `session`.
    pub fn register_receiver(
        &mut self,
        signer: ParticipantId,
        receiver: ParticipantId,
        session: SessionId,
    ) -> Result<()> {
        if self.entries.contains_key(&session) {
            return Err(Error::Config(format!(
                "session {session} already has a registered receiver"
            )));
        }
        self.entries.insert(session, (signer, receiver));
        Ok(())
    }

    pub fn receiver(&self, session: SessionId) -> Option<ParticipantId> {
        self.entries.get(&session).map(|&(_, r)| r)
    }

    pub fn signer(&self, session: SessionId) -> Option<ParticipantId> {
        self.entries.get(&session).map(|&(s, _)| s)
    }
}

// ---------------------------------------------------------------------------
// Lab

/// What the arbitrator learns from one verification request. Carries no
/// session label: in the quantum request nothing ties the state to a
/// particular signing session.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ViewRecord {
    pub requester: ParticipantId,
    pub key_digest: String,
    pub p_prime_digest: String,
    pub s_a_digest: String,
    pub verdict: bool,
}

/// Everything one simulated run owns: the seeded randomness source, keys,
/// board, registry, and the transcript.
pub struct Lab {
    pub rng: ChaCha8Rng,
    pub transcript: Transcript,
    pub board: Board,
    pub keys: KeyTable,
    pub registry: ReceiverRegistry,
    pub countermeasures: CountermeasureSet,
    /// Pads the signer keeps secret until she is asked to open them.
    pub signer_pads: BTreeMap<SessionId, PadKey>,
    pub arbiter_view: Vec<ViewRecord>,
    next_session: u64,
}

impl Lab {
    pub fn new(scheme: Scheme, seed: u64, countermeasures: CountermeasureSet) -> Self {
        Lab::with_session_base(scheme, seed, countermeasures, 0)
    }

    /// Sessions are numbered from `base + 1`; used to keep session ids
    /// unique when several runs share one transcript file.
    pub fn with_session_base(
        scheme: Scheme,
        seed: u64,
        countermeasures: CountermeasureSet,
        base: u64,
    ) -> Self {
        Lab {
            rng: ChaCha8Rng::seed_from_u64(seed),
            transcript: Transcript::new(scheme),
            board: Board::new(countermeasures.announce_metadata),
            keys: KeyTable::default(),
            registry: ReceiverRegistry::default(),
            countermeasures,
            signer_pads: BTreeMap::new(),
            arbiter_view: Vec::new(),
            next_session: base + 1,
        }
    }

    pub fn scheme(&self) -> Scheme {
        self.transcript.scheme.expect("lab transcripts always carry a scheme")
    }

    pub fn open_session(&mut self) -> SessionId {
        let id = SessionId(self.next_session);
        self.next_session += 1;
        id
    }

    /// Posts to the board and logs the announcement exactly as the public
    /// sees it.
    pub fn announce(
        &mut self,
        step: &'static str,
        session: SessionId,
        topic: Topic,
        value: Vec<bool>,
        announcer: ParticipantId,
    ) {
        let digest = digest_text(&format!("{topic:?}:{}", digest_bits(&value)));
        let posted = self.board.announce(session, topic, value, announcer);
        let actor = posted.announcer;
        self.transcript.record(EventSpec {
            actor,
            kind: EventKind::Announce,
            step,
            digest,
            session,
            subject: None,
            pass: None,
        });
    }

    /// Step I1 stand-in: shares keys of the given qubit lengths.
    pub fn share_keys(
        &mut self,
        session: SessionId,
        links: &[(ParticipantId, ParticipantId, usize)],
    ) -> Result<()> {
        for &(a, b, qubits) in links {
            self.keys.share(a, b, 2 * qubits, &mut self.rng)?;
        }
        let digest = self.keys.digest();
        self.transcript.record(EventSpec::new(
            ParticipantId::Arbitrator,
            EventKind::KeyShare,
            "I1",
            session,
            digest,
        ));
        Ok(())
    }
}

/// Parses flat `key = value` lines; blank lines and `#` comments are
/// skipped.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (index, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected key=value, got {raw:?}", index + 1))
        })?;
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}
