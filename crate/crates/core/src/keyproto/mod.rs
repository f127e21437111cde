//! Pairwise key establishment along the data-gathering tree.
//!
//! Every node pre-shares a 128-bit key with the sink (the base station).
//! After a tree is (re)built, each intermediate node refreshes the pairwise
//! key with every child it already shares one with, and runs the
//! sink-mediated establishment exchange for the rest: it notifies the sink,
//! the sink answers with per-participant seed components carrying 64-bit
//! random numbers, and child and aggregator derive a temporary key (the
//! 128-bit product of their two random numbers) under which the child ships
//! a fresh pairwise key. Sink traffic rides the tree path itself; the
//! simulated channel is reliable and in-order.

mod cipher;
mod exchange;
mod wire;

pub use cipher::{CipherSuite, DecryptError, Key, KeyedStreamCipher, TAG_LEN};
pub use exchange::{
    agg_handle_new_key, agg_handle_refresh_response, agg_handle_seed, bs_handle_notification,
    build_da_notification, build_refresh_request, child_handle_ack, child_handle_refresh_ack,
    child_handle_refresh_request, child_handle_seed, PendingChildKey, PendingNotification,
    PendingRefresh, SeedSecrets,
};
pub use wire::{temp_key, MessageKind, ProtocolMessage, BS_TAG};

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use rand_core::RngCore;

use crate::topology::DGTree;

/// Protocol-level failure. Every variant leaves the receiving party's key
/// state untouched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtoError {
    /// Authenticated decryption failed (wrong key or tampering).
    BadCiphertext,
    /// Plaintext or framing did not parse.
    Malformed,
    /// Unexpected message kind or receiver.
    WrongKind,
    /// No base-station key on file for the peer.
    UnknownPeer,
    /// A nonce echo did not carry the expected incremented value.
    NonceMismatch,
    /// A seed component named a different aggregator than its forwarder.
    AggregatorIdMismatch,
    /// Node ids must fit 16 bits below the reserved BS tag.
    IdTooLarge,
}

impl fmt::Display for ProtoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ProtoError::BadCiphertext => "authenticated decryption failed",
            ProtoError::Malformed => "malformed message",
            ProtoError::WrongKind => "unexpected message kind or receiver",
            ProtoError::UnknownPeer => "unknown peer",
            ProtoError::NonceMismatch => "nonce mismatch",
            ProtoError::AggregatorIdMismatch => "aggregator id mismatch",
            ProtoError::IdTooLarge => "node id exceeds 16-bit wire format",
        };
        write!(f, "{s}")
    }
}

impl core::error::Error for ProtoError {}

/// A node's key material: its base-station key plus every pairwise key it
/// has established so far.
#[derive(Debug, Clone)]
pub struct KeyCache {
    pub bs_key: Key,
    pairwise: BTreeMap<usize, Key>,
}

impl KeyCache {
    pub fn new(bs_key: Key) -> Self {
        KeyCache {
            bs_key,
            pairwise: BTreeMap::new(),
        }
    }

    pub fn pairwise_key(&self, peer: usize) -> Option<&Key> {
        self.pairwise.get(&peer)
    }

    pub fn store(&mut self, peer: usize, key: Key) {
        self.pairwise.insert(peer, key);
    }

    pub fn peers(&self) -> impl Iterator<Item = usize> + '_ {
        self.pairwise.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.pairwise.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairwise.is_empty()
    }
}

/// The sink's directory of per-node base-station keys.
#[derive(Debug, Clone)]
pub struct BsDirectory {
    pub sink: usize,
    keys: Vec<Key>,
}

impl BsDirectory {
    pub fn new(sink: usize, keys: Vec<Key>) -> Self {
        BsDirectory { sink, keys }
    }

    pub fn key_of(&self, node: usize) -> Option<&Key> {
        self.keys.get(node)
    }
}

/// One recorded protocol message, for the optional trace dump.
#[derive(Debug, Clone)]
pub struct MessageLogEntry {
    pub round: u32,
    pub kind: MessageKind,
    pub sender: usize,
    pub receiver: usize,
    pub payload: Vec<u8>,
}

/// Reliable in-order delivery stand-in that can record traffic.
#[derive(Debug, Default)]
pub struct Channel {
    round: u32,
    trace: Option<Vec<MessageLogEntry>>,
}

impl Channel {
    pub fn new(record_trace: bool) -> Self {
        Channel {
            round: 0,
            trace: record_trace.then(Vec::new),
        }
    }

    pub fn set_round(&mut self, round: u32) {
        self.round = round;
    }

    pub fn send(&mut self, msg: &ProtocolMessage) {
        if let Some(trace) = &mut self.trace {
            trace.push(MessageLogEntry {
                round: self.round,
                kind: msg.kind,
                sender: msg.sender,
                receiver: msg.receiver,
                payload: msg.payload.clone(),
            });
        }
    }

    pub fn trace(&self) -> Option<&[MessageLogEntry]> {
        self.trace.as_deref()
    }
}

/// Outcome counts for one tree's worth of key management.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct KeyEstablishmentReport {
    pub established: u32,
    pub refreshed: u32,
    pub failures: u32,
}

/// Refresh an existing pairwise key between `agg` and `child` (three
/// messages). On success both caches hold the same new key; on any failure
/// both keep the old one.
pub fn refresh_exchange(
    cipher: &impl CipherSuite,
    caches: &mut [KeyCache],
    agg: usize,
    child: usize,
    rng: &mut impl RngCore,
    channel: &mut Channel,
) -> Result<(), ProtoError> {
    let key_cur = *caches[agg]
        .pairwise_key(child)
        .ok_or(ProtoError::UnknownPeer)?;
    let (request, nonce_a) = build_refresh_request(cipher, agg, child, &key_cur, rng);
    channel.send(&request);

    let child_key_cur = *caches[child]
        .pairwise_key(agg)
        .ok_or(ProtoError::UnknownPeer)?;
    let (response, pending) =
        child_handle_refresh_request(cipher, &request, child, agg, &child_key_cur, rng)?;
    channel.send(&response);

    let (ack, key_new) =
        agg_handle_refresh_response(cipher, &response, agg, child, &key_cur, nonce_a)?;
    caches[agg].store(child, key_new);
    channel.send(&ack);

    let confirmed = child_handle_refresh_ack(cipher, &ack, child, agg, &pending)?;
    caches[child].store(agg, confirmed);
    Ok(())
}

/// Establish brand-new pairwise keys between `agg` and each of `missing`
/// via the sink (steps 3 through 5). Children failing mid-exchange are
/// counted and skipped; the others still complete.
pub fn establish_exchange(
    cipher: &impl CipherSuite,
    caches: &mut [KeyCache],
    bs: &BsDirectory,
    agg: usize,
    missing: &[usize],
    rng: &mut impl RngCore,
    channel: &mut Channel,
    report: &mut KeyEstablishmentReport,
) {
    let bs_key = caches[agg].bs_key;
    let built = match build_da_notification(cipher, agg, bs.sink, missing, &bs_key, rng) {
        Ok(v) => v,
        Err(_) => {
            report.failures += 1;
            return;
        }
    };
    let Some((notification, pending)) = built else {
        return;
    };
    channel.send(&notification);

    let seed_msg = match bs_handle_notification(cipher, &notification, bs, rng) {
        Ok(m) => m,
        Err(_) => {
            report.failures += 1;
            return;
        }
    };
    channel.send(&seed_msg);

    let (forwards, secrets) =
        match agg_handle_seed(cipher, &seed_msg, agg, bs.sink, &pending, &bs_key) {
            Ok(v) => v,
            Err(_) => {
                report.failures += 1;
                return;
            }
        };

    for (forward, &(child, rn_child)) in forwards.iter().zip(&secrets.rn_children) {
        channel.send(forward);
        let child_bs_key = caches[child].bs_key;
        let (offer, pending_child) =
            match child_handle_seed(cipher, forward, child, &child_bs_key, rng) {
                Ok(v) => v,
                Err(_) => {
                    report.failures += 1;
                    continue;
                }
            };
        channel.send(&offer);

        let (ack, key_new) =
            match agg_handle_new_key(cipher, &offer, agg, child, secrets.rn_agg, rn_child) {
                Ok(v) => v,
                Err(_) => {
                    report.failures += 1;
                    continue;
                }
            };
        caches[agg].store(child, key_new);
        channel.send(&ack);

        match child_handle_ack(cipher, &ack, child, &pending_child) {
            Ok(confirmed) => {
                caches[child].store(agg, confirmed);
                report.established += 1;
            }
            Err(_) => report.failures += 1,
        }
    }
}

/// Run key management for a freshly built tree: every intermediate node
/// refreshes the keys it already shares with children and establishes the
/// missing ones through the sink. Parents are processed top-down (by level,
/// then id) so the message order is deterministic.
pub fn run_key_establishment_for_tree(
    tree: &DGTree,
    caches: &mut [KeyCache],
    bs: &BsDirectory,
    cipher: &impl CipherSuite,
    rng: &mut impl RngCore,
    channel: &mut Channel,
) -> KeyEstablishmentReport {
    let mut report = KeyEstablishmentReport::default();
    let mut parents: Vec<usize> = (0..tree.num_nodes())
        .filter(|&p| !tree.children[p].is_empty())
        .collect();
    parents.sort_by_key(|&p| (tree.level[p], p));

    for parent in parents {
        let (missing, shared): (Vec<usize>, Vec<usize>) = tree.children[parent]
            .iter()
            .copied()
            .partition(|&c| caches[parent].pairwise_key(c).is_none());

        if !missing.is_empty() {
            establish_exchange(cipher, caches, bs, parent, &missing, rng, channel, &mut report);
        }
        for child in shared {
            match refresh_exchange(cipher, caches, parent, child, rng, channel) {
                Ok(()) => report.refreshed += 1,
                Err(_) => report.failures += 1,
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{root_tree, SpanningTree};
    use rand_core::SeedableRng;

    fn setup(n: usize) -> (Vec<KeyCache>, BsDirectory, rand_chacha::ChaCha8Rng) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let mut bs_keys = Vec::with_capacity(n);
        for _ in 0..n {
            let mut k = [0u8; 16];
            rng.fill_bytes(&mut k);
            bs_keys.push(Key(k));
        }
        let caches: Vec<KeyCache> = bs_keys.iter().map(|&k| KeyCache::new(k)).collect();
        (caches, BsDirectory::new(0, bs_keys), rng)
    }

    fn star_tree(n: usize) -> DGTree {
        let tree = SpanningTree {
            num_nodes: n,
            edges: (1..n).map(|v| (0, v)).collect(),
        };
        root_tree(&tree, 0, 0)
    }

    #[test]
    fn fresh_star_establishes_all_keys() {
        let n = 6;
        let (mut caches, bs, mut rng) = setup(n);
        let cipher = KeyedStreamCipher;
        let mut channel = Channel::new(true);
        let tree = star_tree(n);

        let report =
            run_key_establishment_for_tree(&tree, &mut caches, &bs, &cipher, &mut rng, &mut channel);
        assert_eq!(report.established, (n - 1) as u32);
        assert_eq!(report.refreshed, 0);
        assert_eq!(report.failures, 0);
        for child in 1..n {
            assert_eq!(
                caches[0].pairwise_key(child),
                caches[child].pairwise_key(0),
                "key symmetry for child {child}"
            );
        }
        // One notification, one seed, and per child: forward, offer, ack.
        assert_eq!(channel.trace().unwrap().len(), 2 + 3 * (n - 1));
    }

    #[test]
    fn rebuild_refreshes_instead_of_establishing() {
        let n = 5;
        let (mut caches, bs, mut rng) = setup(n);
        let cipher = KeyedStreamCipher;
        let mut channel = Channel::new(false);
        let tree = star_tree(n);

        run_key_establishment_for_tree(&tree, &mut caches, &bs, &cipher, &mut rng, &mut channel);
        let before: Vec<Key> = (1..n)
            .map(|c| *caches[0].pairwise_key(c).unwrap())
            .collect();

        let report =
            run_key_establishment_for_tree(&tree, &mut caches, &bs, &cipher, &mut rng, &mut channel);
        assert_eq!(report.established, 0);
        assert_eq!(report.refreshed, (n - 1) as u32);
        assert_eq!(report.failures, 0);
        for (i, child) in (1..n).enumerate() {
            let now = caches[0].pairwise_key(child).unwrap();
            assert_eq!(Some(now), caches[child].pairwise_key(0));
            assert_ne!(*now, before[i], "refresh must change the key");
        }
    }

    #[test]
    fn consecutive_trees_cover_edge_union() {
        let n = 6;
        let (mut caches, bs, mut rng) = setup(n);
        let cipher = KeyedStreamCipher;
        let mut channel = Channel::new(false);

        let t1 = root_tree(
            &SpanningTree {
                num_nodes: n,
                edges: vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)],
            },
            0,
            0,
        );
        let t2 = root_tree(
            &SpanningTree {
                num_nodes: n,
                edges: vec![(0, 2), (0, 3), (1, 2), (3, 5), (2, 4)],
            },
            0,
            1,
        );
        run_key_establishment_for_tree(&t1, &mut caches, &bs, &cipher, &mut rng, &mut channel);
        run_key_establishment_for_tree(&t2, &mut caches, &bs, &cipher, &mut rng, &mut channel);

        let mut expected: Vec<(usize, usize)> = Vec::new();
        for (a, b) in t1.edges().chain(t2.edges()) {
            let pair = (a.min(b), a.max(b));
            if !expected.contains(&pair) {
                expected.push(pair);
            }
        }
        let mut actual: Vec<(usize, usize)> = Vec::new();
        for node in 0..n {
            for peer in caches[node].peers() {
                let pair = (node.min(peer), node.max(peer));
                if !actual.contains(&pair) {
                    actual.push(pair);
                }
            }
        }
        expected.sort_unstable();
        actual.sort_unstable();
        assert_eq!(expected, actual);
    }

    #[test]
    fn replayed_notification_caught_by_nonce_mismatch() {
        let (caches, bs, mut rng) = setup(3);
        let cipher = KeyedStreamCipher;
        let bs_key = caches[1].bs_key;

        // Session 1 completes normally.
        let (msg1, pending1) =
            build_da_notification(&cipher, 1, 0, &[2], &bs_key, &mut rng)
                .unwrap()
                .unwrap();
        let seed1 = bs_handle_notification(&cipher, &msg1, &bs, &mut rng).unwrap();
        assert!(agg_handle_seed(&cipher, &seed1, 1, 0, &pending1, &bs_key).is_ok());

        // The attacker replays msg1; the sink statelessly issues fresh RNs,
        // but the aggregator is now in a new session with a new nonce.
        let (_msg2, pending2) =
            build_da_notification(&cipher, 1, 0, &[2], &bs_key, &mut rng)
                .unwrap()
                .unwrap();
        let replayed_seed = bs_handle_notification(&cipher, &msg1, &bs, &mut rng).unwrap();
        assert_eq!(
            agg_handle_seed(&cipher, &replayed_seed, 1, 0, &pending2, &bs_key).unwrap_err(),
            ProtoError::NonceMismatch
        );
    }

    #[test]
    fn child_rejects_component_from_wrong_forwarder() {
        let (caches, bs, mut rng) = setup(10);
        let cipher = KeyedStreamCipher;
        let bs_key = caches[5].bs_key;

        let (msg, pending) = build_da_notification(&cipher, 5, 0, &[2], &bs_key, &mut rng)
            .unwrap()
            .unwrap();
        let seed = bs_handle_notification(&cipher, &msg, &bs, &mut rng).unwrap();
        let (forwards, _) = agg_handle_seed(&cipher, &seed, 5, 0, &pending, &bs_key).unwrap();

        // Node 8 relays the component meant to come from aggregator 5.
        let mut hijacked = forwards[0].clone();
        hijacked.sender = 8;
        let err = child_handle_seed(&cipher, &hijacked, 2, &caches[2].bs_key, &mut rng)
            .unwrap_err();
        assert_eq!(err, ProtoError::AggregatorIdMismatch);
    }

    #[test]
    fn refresh_rejects_stale_response_and_bad_ack() {
        let (mut caches, _bs, mut rng) = setup(2);
        let cipher = KeyedStreamCipher;
        let shared = Key([0x42; 16]);
        caches[0].store(1, shared);
        caches[1].store(0, shared);

        // Record a response from an earlier session.
        let (req1, _nonce1) = build_refresh_request(&cipher, 0, 1, &shared, &mut rng);
        let (stale_response, _) =
            child_handle_refresh_request(&cipher, &req1, 1, 0, &shared, &mut rng).unwrap();

        // New session: the stale response fails the nonce echo.
        let (req2, nonce2) = build_refresh_request(&cipher, 0, 1, &shared, &mut rng);
        let _ = req2;
        assert_eq!(
            agg_handle_refresh_response(&cipher, &stale_response, 0, 1, &shared, nonce2).unwrap_err(),
            ProtoError::NonceMismatch
        );

        // An ack that carries N_b instead of N_b + 1 is rejected.
        let (req3, nonce3) = build_refresh_request(&cipher, 0, 1, &shared, &mut rng);
        let (response, pending) =
            child_handle_refresh_request(&cipher, &req3, 1, 0, &shared, &mut rng).unwrap();
        let (_good_ack, key_new) =
            agg_handle_refresh_response(&cipher, &response, 0, 1, &shared, nonce3).unwrap();
        let bad_ack = ProtocolMessage {
            kind: MessageKind::RefreshAck,
            sender: 0,
            receiver: 1,
            payload: cipher.encrypt(&key_new, &wire::encode_nonce_only(pending.nonce_b)),
        };
        assert_eq!(
            child_handle_refresh_ack(&cipher, &bad_ack, 1, 0, &pending).unwrap_err(),
            ProtoError::NonceMismatch
        );
    }

    #[test]
    fn tampered_ciphertext_yields_no_ack() {
        let (caches, bs, mut rng) = setup(3);
        let cipher = KeyedStreamCipher;
        let bs_key = caches[1].bs_key;
        let (msg, pending) = build_da_notification(&cipher, 1, 0, &[2], &bs_key, &mut rng)
            .unwrap()
            .unwrap();
        let seed = bs_handle_notification(&cipher, &msg, &bs, &mut rng).unwrap();
        let (forwards, secrets) =
            agg_handle_seed(&cipher, &seed, 1, 0, &pending, &bs_key).unwrap();
        let (offer, _) =
            child_handle_seed(&cipher, &forwards[0], 2, &caches[2].bs_key, &mut rng).unwrap();

        let mut tampered = offer.clone();
        tampered.payload[3] ^= 0x01;
        assert_eq!(
            agg_handle_new_key(&cipher, &tampered, 1, 2, secrets.rn_agg, secrets.rn_children[0].1)
                .unwrap_err(),
            ProtoError::BadCiphertext
        );
    }
}
