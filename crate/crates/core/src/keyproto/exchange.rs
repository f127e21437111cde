//! Message handlers for key establishment (sink-seeded) and key refresh.
//!
//! Each handler validates one inbound message and produces the next outbound
//! one plus whatever state its party must retain. Handlers never mutate key
//! caches; the driver in the parent module commits keys only on success, so
//! a failed step leaves the old state intact.

use alloc::vec::Vec;

use rand_core::RngCore;

use super::cipher::{CipherSuite, Key};
use super::wire::{self, MessageKind, ProtocolMessage};
use super::{BsDirectory, ProtoError};

/// Aggregator-side state while a seed request is in flight.
#[derive(Debug, Clone)]
pub struct PendingNotification {
    pub nonce: u64,
    /// Children ids in the order they were listed in the notification; the
    /// sink's seed components come back in the same order.
    pub children: Vec<usize>,
}

/// Random numbers extracted from a validated seed message.
#[derive(Debug, Clone)]
pub struct SeedSecrets {
    pub rn_agg: u64,
    /// `(child id, RN(child))` in notification order.
    pub rn_children: Vec<(usize, u64)>,
}

/// Child-side state while its freshly offered key awaits acknowledgment.
#[derive(Debug, Clone)]
pub struct PendingChildKey {
    pub agg: usize,
    pub key: Key,
    pub nonce: u64,
}

/// Child-side state while a refresh awaits acknowledgment.
#[derive(Debug, Clone)]
pub struct PendingRefresh {
    pub key_new: Key,
    pub nonce_b: u64,
}

fn draw_key(rng: &mut impl RngCore) -> Key {
    let mut bytes = [0u8; 16];
    rng.fill_bytes(&mut bytes);
    Key(bytes)
}

/// Step 3: the aggregator asks the sink for seed secrets covering the
/// children it shares no key with. Returns `None` for an empty child list.
pub fn build_da_notification(
    cipher: &impl CipherSuite,
    agg: usize,
    sink: usize,
    children_missing: &[usize],
    bs_key: &Key,
    rng: &mut impl RngCore,
) -> Result<Option<(ProtocolMessage, PendingNotification)>, ProtoError> {
    if children_missing.is_empty() {
        return Ok(None);
    }
    let nonce = rng.next_u64();
    let plain = wire::encode_notification(agg, nonce, children_missing)?;
    let msg = ProtocolMessage {
        kind: MessageKind::DaNotification,
        sender: agg,
        receiver: sink,
        payload: cipher.encrypt(bs_key, &plain),
    };
    Ok(Some((
        msg,
        PendingNotification {
            nonce,
            children: children_missing.to_vec(),
        },
    )))
}

/// Step 4: the sink answers a notification with one seed component for the
/// aggregator and one per requested child, each encrypted under the
/// recipient's own BS key. The sink keeps no per-session state.
pub fn bs_handle_notification(
    cipher: &impl CipherSuite,
    msg: &ProtocolMessage,
    bs: &BsDirectory,
    rng: &mut impl RngCore,
) -> Result<ProtocolMessage, ProtoError> {
    if msg.kind != MessageKind::DaNotification || msg.receiver != bs.sink {
        return Err(ProtoError::WrongKind);
    }
    let agg_bs_key = bs.key_of(msg.sender).ok_or(ProtoError::UnknownPeer)?;
    let plain = cipher
        .decrypt(agg_bs_key, &msg.payload)
        .map_err(|_| ProtoError::BadCiphertext)?;
    let notification = wire::parse_notification(&plain)?;
    if notification.agg != msg.sender {
        return Err(ProtoError::Malformed);
    }

    let rn_agg = rng.next_u64();
    let rn_children: Vec<u64> = notification.children.iter().map(|_| rng.next_u64()).collect();

    let mut components = Vec::with_capacity(1 + notification.children.len());
    let agg_plain = wire::encode_seed_for_agg(
        notification.nonce.wrapping_add(1),
        rn_agg,
        &rn_children,
    );
    components.push(cipher.encrypt(agg_bs_key, &agg_plain));
    for (&child, &rn) in notification.children.iter().zip(&rn_children) {
        let child_key = bs.key_of(child).ok_or(ProtoError::UnknownPeer)?;
        let child_plain = wire::encode_seed_for_child(notification.agg, rn_agg, rn)?;
        components.push(cipher.encrypt(child_key, &child_plain));
    }

    Ok(ProtocolMessage {
        kind: MessageKind::SeedSecretKey,
        sender: bs.sink,
        receiver: msg.sender,
        payload: wire::frame_components(&components)?,
    })
}

/// The aggregator validates the seed message against its pending nonce and
/// forwards each child component verbatim.
pub fn agg_handle_seed(
    cipher: &impl CipherSuite,
    msg: &ProtocolMessage,
    agg: usize,
    sink: usize,
    pending: &PendingNotification,
    bs_key: &Key,
) -> Result<(Vec<ProtocolMessage>, SeedSecrets), ProtoError> {
    if msg.kind != MessageKind::SeedSecretKey || msg.receiver != agg || msg.sender != sink {
        return Err(ProtoError::WrongKind);
    }
    let components = wire::split_components(&msg.payload, 1 + pending.children.len())?;
    let plain = cipher
        .decrypt(bs_key, components[0])
        .map_err(|_| ProtoError::BadCiphertext)?;
    let seed = wire::parse_seed_for_agg(&plain, pending.children.len())?;
    if seed.nonce_plus_one != pending.nonce.wrapping_add(1) {
        return Err(ProtoError::NonceMismatch);
    }

    let forwards = pending
        .children
        .iter()
        .zip(components[1..].iter())
        .map(|(&child, component)| ProtocolMessage {
            kind: MessageKind::SeedSecretKey,
            sender: agg,
            receiver: child,
            payload: component.to_vec(),
        })
        .collect();
    let rn_children = pending
        .children
        .iter()
        .copied()
        .zip(seed.rn_children.iter().copied())
        .collect();
    Ok((
        forwards,
        SeedSecrets {
            rn_agg: seed.rn_agg,
            rn_children,
        },
    ))
}

/// Step 5 (child side): decrypt the forwarded component, make sure the
/// embedded aggregator id matches the node that actually forwarded it, then
/// offer a fresh pairwise key under the temporary product key.
pub fn child_handle_seed(
    cipher: &impl CipherSuite,
    msg: &ProtocolMessage,
    child: usize,
    bs_key: &Key,
    rng: &mut impl RngCore,
) -> Result<(ProtocolMessage, PendingChildKey), ProtoError> {
    if msg.kind != MessageKind::SeedSecretKey || msg.receiver != child {
        return Err(ProtoError::WrongKind);
    }
    let plain = cipher
        .decrypt(bs_key, &msg.payload)
        .map_err(|_| ProtoError::BadCiphertext)?;
    let seed = wire::parse_seed_for_child(&plain)?;
    if seed.agg != msg.sender {
        // Impersonation signal: the forwarder is not the aggregator the sink
        // issued this component for.
        return Err(ProtoError::AggregatorIdMismatch);
    }

    let key_new = draw_key(rng);
    let nonce = rng.next_u64();
    let temp = wire::temp_key(seed.rn_agg, seed.rn_child);
    let offer = ProtocolMessage {
        kind: MessageKind::NewPairwiseKey,
        sender: child,
        receiver: seed.agg,
        payload: cipher.encrypt(&temp, &wire::encode_key_offer(&key_new, nonce)),
    };
    Ok((
        offer,
        PendingChildKey {
            agg: seed.agg,
            key: key_new,
            nonce,
        },
    ))
}

/// Step 5 (aggregator side): recompute the temporary key, extract the new
/// pairwise key and acknowledge with the incremented child nonce.
pub fn agg_handle_new_key(
    cipher: &impl CipherSuite,
    msg: &ProtocolMessage,
    agg: usize,
    child: usize,
    rn_agg: u64,
    rn_child: u64,
) -> Result<(ProtocolMessage, Key), ProtoError> {
    if msg.kind != MessageKind::NewPairwiseKey || msg.receiver != agg || msg.sender != child {
        return Err(ProtoError::WrongKind);
    }
    let temp = wire::temp_key(rn_agg, rn_child);
    let plain = cipher
        .decrypt(&temp, &msg.payload)
        .map_err(|_| ProtoError::BadCiphertext)?;
    let (key_new, nonce) = wire::parse_key_offer(&plain)?;
    let ack = ProtocolMessage {
        kind: MessageKind::NewPairwiseKeyAck,
        sender: agg,
        receiver: msg.sender,
        payload: cipher.encrypt(&key_new, &wire::encode_nonce_only(nonce.wrapping_add(1))),
    };
    Ok((ack, key_new))
}

/// The child confirms the aggregator received the key by checking the
/// incremented nonce under the new key.
pub fn child_handle_ack(
    cipher: &impl CipherSuite,
    msg: &ProtocolMessage,
    child: usize,
    pending: &PendingChildKey,
) -> Result<Key, ProtoError> {
    if msg.kind != MessageKind::NewPairwiseKeyAck || msg.receiver != child {
        return Err(ProtoError::WrongKind);
    }
    if msg.sender != pending.agg {
        return Err(ProtoError::AggregatorIdMismatch);
    }
    let plain = cipher
        .decrypt(&pending.key, &msg.payload)
        .map_err(|_| ProtoError::BadCiphertext)?;
    if wire::parse_nonce_only(&plain)? != pending.nonce.wrapping_add(1) {
        return Err(ProtoError::NonceMismatch);
    }
    Ok(pending.key)
}

/// Step 6, first message: a refresh challenge under the current shared key.
pub fn build_refresh_request(
    cipher: &impl CipherSuite,
    agg: usize,
    child: usize,
    key_cur: &Key,
    rng: &mut impl RngCore,
) -> (ProtocolMessage, u64) {
    let nonce_a = rng.next_u64();
    let msg = ProtocolMessage {
        kind: MessageKind::RefreshRequest,
        sender: agg,
        receiver: child,
        payload: cipher.encrypt(key_cur, &wire::encode_nonce_only(nonce_a)),
    };
    (msg, nonce_a)
}

/// Step 6, second message: the child answers with the incremented challenge,
/// a fresh key, and its own nonce, all under the current key.
pub fn child_handle_refresh_request(
    cipher: &impl CipherSuite,
    msg: &ProtocolMessage,
    child: usize,
    agg: usize,
    key_cur: &Key,
    rng: &mut impl RngCore,
) -> Result<(ProtocolMessage, PendingRefresh), ProtoError> {
    if msg.kind != MessageKind::RefreshRequest || msg.receiver != child || msg.sender != agg {
        return Err(ProtoError::WrongKind);
    }
    let plain = cipher
        .decrypt(key_cur, &msg.payload)
        .map_err(|_| ProtoError::BadCiphertext)?;
    let nonce_a = wire::parse_nonce_only(&plain)?;

    let key_new = draw_key(rng);
    let nonce_b = rng.next_u64();
    let response = ProtocolMessage {
        kind: MessageKind::RefreshResponse,
        sender: child,
        receiver: msg.sender,
        payload: cipher.encrypt(
            key_cur,
            &wire::encode_refresh_response(nonce_a.wrapping_add(1), &key_new, nonce_b),
        ),
    };
    Ok((response, PendingRefresh { key_new, nonce_b }))
}

/// Step 6, third message: the aggregator validates the incremented challenge
/// and acknowledges under the new key.
pub fn agg_handle_refresh_response(
    cipher: &impl CipherSuite,
    msg: &ProtocolMessage,
    agg: usize,
    child: usize,
    key_cur: &Key,
    nonce_a: u64,
) -> Result<(ProtocolMessage, Key), ProtoError> {
    if msg.kind != MessageKind::RefreshResponse || msg.receiver != agg || msg.sender != child {
        return Err(ProtoError::WrongKind);
    }
    let plain = cipher
        .decrypt(key_cur, &msg.payload)
        .map_err(|_| ProtoError::BadCiphertext)?;
    let (echo, key_new, nonce_b) = wire::parse_refresh_response(&plain)?;
    if echo != nonce_a.wrapping_add(1) {
        return Err(ProtoError::NonceMismatch);
    }
    let ack = ProtocolMessage {
        kind: MessageKind::RefreshAck,
        sender: agg,
        receiver: msg.sender,
        payload: cipher.encrypt(&key_new, &wire::encode_nonce_only(nonce_b.wrapping_add(1))),
    };
    Ok((ack, key_new))
}

/// The child commits the refreshed key after validating the incremented
/// nonce under it.
pub fn child_handle_refresh_ack(
    cipher: &impl CipherSuite,
    msg: &ProtocolMessage,
    child: usize,
    agg: usize,
    pending: &PendingRefresh,
) -> Result<Key, ProtoError> {
    if msg.kind != MessageKind::RefreshAck || msg.receiver != child || msg.sender != agg {
        return Err(ProtoError::WrongKind);
    }
    let plain = cipher
        .decrypt(&pending.key_new, &msg.payload)
        .map_err(|_| ProtoError::BadCiphertext)?;
    if wire::parse_nonce_only(&plain)? != pending.nonce_b.wrapping_add(1) {
        return Err(ProtoError::NonceMismatch);
    }
    Ok(pending.key_new)
}
