//! Bottom-up sum aggregation along the DG-tree.
//!
//! Every non-root node contributes its own beacon value and a contributor
//! count of 1; an intermediate node adds the packets of those children it
//! has not locally blacklisted. A parent that rejects a child drops the
//! child's entire subtree. The root only fuses what its accepted children
//! deliver -- it is the observer computing the field average, not a sensor
//! contributing to it -- except in the degenerate case where every child is
//! blacklisted, where it reports its own reading so a packet always exists.

use alloc::vec::Vec;

use crate::topology::DGTree;

/// Aggregated value plus the number of nodes whose data went into it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregatePacket {
    pub value: f64,
    pub num_sda_used_nodes: u32,
}

/// Run one round of aggregation over the tree.
///
/// `values[v]` is node `v`'s beacon this round; `blacklisted(parent, child)`
/// says whether `parent` has locally classified `child` as CF, in which case
/// the child's packet (and so its whole subtree) is discarded by that parent.
pub fn aggregate_tree(
    tree: &DGTree,
    values: &[f64],
    mut blacklisted: impl FnMut(usize, usize) -> bool,
) -> AggregatePacket {
    let n = tree.num_nodes();
    debug_assert_eq!(n, values.len());

    // Children aggregate strictly before parents, so walk nodes in
    // descending level order.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&v| core::cmp::Reverse(tree.level[v]));

    let mut packets: Vec<AggregatePacket> = values
        .iter()
        .map(|&v| AggregatePacket {
            value: v,
            num_sda_used_nodes: 1,
        })
        .collect();

    let mut root_children_accepted = 0u32;
    let mut root_sum = 0.0;
    let mut root_count = 0u32;
    for &node in &order {
        let Some(parent) = tree.parent[node] else {
            continue;
        };
        if blacklisted(parent, node) {
            continue;
        }
        if parent == tree.root {
            root_sum += packets[node].value;
            root_count += packets[node].num_sda_used_nodes;
            root_children_accepted += 1;
        } else {
            let child = packets[node];
            let p = &mut packets[parent];
            p.value += child.value;
            p.num_sda_used_nodes += child.num_sda_used_nodes;
        }
    }

    if root_children_accepted == 0 {
        // Everything below the sink was rejected (or the tree is a single
        // node): fall back to the sink's own reading.
        return AggregatePacket {
            value: values[tree.root],
            num_sda_used_nodes: 1,
        };
    }
    AggregatePacket {
        value: root_sum,
        num_sda_used_nodes: root_count,
    }
}

/// Field average as computed at the sink.
pub fn sink_average(packet: &AggregatePacket) -> f64 {
    debug_assert!(packet.num_sda_used_nodes >= 1);
    packet.value / packet.num_sda_used_nodes as f64
}
