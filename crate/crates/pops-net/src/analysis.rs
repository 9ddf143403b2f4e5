//! Conflict-graph construction, the degree schedule for d > g, the
//! deterministic baseline slot count, and cross-run statistics.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{GroupId, NetworkConfig, PacketId, ProcessorId};

/// A packet that still has to be routed: `(id, current holder, destination)`.
pub type PendingPacket = (PacketId, ProcessorId, ProcessorId);

/// The bipartite multigraph of contention: one edge per pending packet, from
/// its source group to its temporary destination group. Degrees drive both
/// the analysis and the participation schedule.
#[derive(Clone, Debug)]
pub struct ConflictGraph {
    pub g: u32,
    /// `|S_a|`: pending packets residing in group `a`.
    pub left_degrees: Vec<u32>,
    /// `|D_b|`: pending packets whose temporary destination group is `b`.
    pub right_degrees: Vec<u32>,
    /// `(packet, source group, temporary destination group)`.
    pub edges: Vec<(PacketId, GroupId, GroupId)>,
}

impl ConflictGraph {
    pub fn max_left_degree(&self) -> u32 {
        self.left_degrees.iter().copied().max().unwrap_or(0)
    }

    pub fn max_right_degree(&self) -> u32 {
        self.right_degrees.iter().copied().max().unwrap_or(0)
    }

    pub fn max_degree(&self) -> u32 {
        self.max_left_degree().max(self.max_right_degree())
    }
}

/// Build the conflict graph for the given pending set.
pub fn build_conflict_graph(pending: &[PendingPacket], cfg: &NetworkConfig) -> ConflictGraph {
    let g = cfg.g();
    let mut left = vec![0u32; g as usize];
    let mut right = vec![0u32; g as usize];
    let mut edges = Vec::with_capacity(pending.len());
    for &(id, holder, dest) in pending {
        let a = cfg.group_of_unchecked(holder);
        let b = cfg.delta_unchecked(dest);
        left[a as usize] += 1;
        right[b as usize] += 1;
        edges.push((id, a, b));
    }
    ConflictGraph { g, left_degrees: left, right_degrees: right, edges }
}

/// The scheduled degree bound `d_s = d - g(s-1)/c_eps` for step `s >= 1`.
pub fn schedule_degree_bound(s: u32, cfg: &NetworkConfig, c_eps: f64) -> f64 {
    cfg.d() as f64 - cfg.g() as f64 * (s as f64 - 1.0) / c_eps
}

/// Slot count of the deterministic baseline router:
/// `4(d/g)log^2 g + 2(d/g)log g + 21(d/g) + 3 log g + 7`.
///
/// Exact integer evaluation; requires `g` to be a power of two and to
/// divide `d` (both hold for every published configuration).
pub fn baseline_ds_slots(cfg: &NetworkConfig) -> Result<u64> {
    let (d, g) = (cfg.d() as u64, cfg.g() as u64);
    if !g.is_power_of_two() {
        return Err(Error::domain(format!("baseline slot count needs a power-of-two g, got {g}")));
    }
    if d % g != 0 {
        return Err(Error::domain(format!(
            "baseline slot count needs g | d for an exact value, got d={d}, g={g}"
        )));
    }
    let log_g = g.trailing_zeros() as u64;
    let ratio = d / g;
    Ok(ratio * (4 * log_g * log_g + 2 * log_g + 21) + 3 * log_g + 7)
}

/// Per-step observables of one routing step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepMetrics {
    /// Step index, starting at 1.
    pub step: u32,
    /// Packets that tossed 'yes' and sent in slot 1.
    pub participants: u32,
    /// Copies that survived slot 1 (the X_a^1 aggregate).
    pub slot1_survivors: u32,
    /// Packets delivered by this step (the X_a^2 aggregate).
    pub deliveries: u32,
    /// Maximum source-group degree of the conflict graph before the step.
    pub max_left_degree: u32,
    /// Maximum temporary-destination-group degree before the step.
    pub max_right_degree: u32,
    /// `max degree / g`.
    pub lambda: f64,
    pub conflicts_slot1: u32,
    pub conflicts_slot2: u32,
    /// Conflicted couplers across all ack slots of the step.
    pub conflicts_ack: u32,
    /// Conflicted couplers in the final-delivery slot.
    pub conflicts_delivery: u32,
    /// Packets acked-then-destroyed this step (only possible under the
    /// literal five-slot protocol with d > g).
    pub losses: u32,
    /// Largest per-processor buffer occupancy observed during the step.
    pub max_buffer_occupancy: u32,
}

/// Outcome of a whole routing run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunStats {
    /// Steps executed until every packet was delivered.
    pub iterations: u32,
    /// Total slots: `slots per step * iterations`.
    pub slots: u32,
    pub seed: u64,
    pub per_step: Vec<StepMetrics>,
}

impl RunStats {
    pub fn total<F: Fn(&StepMetrics) -> u32>(&self, f: F) -> u64 {
        self.per_step.iter().map(|m| f(m) as u64).sum()
    }

    pub fn conflicts_slot1(&self) -> u64 {
        self.total(|m| m.conflicts_slot1)
    }

    pub fn conflicts_slot2(&self) -> u64 {
        self.total(|m| m.conflicts_slot2)
    }

    pub fn conflicts_ack(&self) -> u64 {
        self.total(|m| m.conflicts_ack)
    }

    pub fn conflicts_delivery(&self) -> u64 {
        self.total(|m| m.conflicts_delivery)
    }

    pub fn losses(&self) -> u64 {
        self.total(|m| m.losses)
    }
}

/// Mean, population standard deviation, and maximum of a sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Aggregate {
    pub mean: f64,
    pub std_dev: f64,
    pub max: f64,
}

/// Aggregate a metric across runs: arithmetic mean, population standard
/// deviation (divide by N), and maximum.
pub fn aggregate_stats(values: &[f64]) -> Result<Aggregate> {
    if values.is_empty() {
        return Err(Error::domain("aggregate_stats over an empty sample"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Aggregate { mean, std_dev: var.sqrt(), max })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(d: u32, g: u32) -> NetworkConfig {
        NetworkConfig::new(d, g).unwrap()
    }

    /// The worked POPS(4,4) example permutation used throughout the tests.
    pub const EXAMPLE_PERM_16: [u32; 16] = [1, 5, 8, 9, 3, 10, 11, 14, 15, 13, 0, 7, 2, 6, 12, 4];

    #[test]
    fn conflict_graph_of_the_example_permutation_is_4_regular() {
        let cfg = cfg(4, 4);
        let pending: Vec<PendingPacket> =
            (0u32..16).map(|i| (i, i, EXAMPLE_PERM_16[i as usize])).collect();
        let gph = build_conflict_graph(&pending, &cfg);
        assert_eq!(gph.left_degrees, vec![4, 4, 4, 4]);
        assert_eq!(gph.right_degrees, vec![4, 4, 4, 4]);
        // Temporary destination groups, in packet order.
        let deltas: Vec<u32> = gph.edges.iter().map(|e| e.2).collect();
        assert_eq!(deltas, vec![1, 1, 0, 1, 3, 2, 3, 2, 3, 1, 0, 3, 2, 2, 0, 0]);
    }

    #[test]
    fn conflict_graph_edge_cases() {
        let cfg = cfg(4, 4);
        let empty = build_conflict_graph(&[], &cfg);
        assert_eq!(empty.max_degree(), 0);
        assert!(empty.edges.is_empty());

        let single = build_conflict_graph(&[(5, 5, 9)], &cfg);
        assert_eq!(single.left_degrees.iter().sum::<u32>(), 1);
        assert_eq!(single.right_degrees.iter().sum::<u32>(), 1);
        assert_eq!(single.left_degrees[1], 1);
        assert_eq!(single.right_degrees[1], 1);
    }

    #[test]
    fn degree_bound_schedule() {
        let c = cfg(64, 16); // d = 4g
        assert_eq!(schedule_degree_bound(1, &c, 4.0), 64.0);
        // End of phase 1: s = 4 (d/g - 1) + 1 = 13 lands exactly on g.
        assert_eq!(schedule_degree_bound(13, &c, 4.0), 16.0);
        let sq = cfg(8, 8);
        assert!(schedule_degree_bound(1, &sq, 4.0) <= 8.0);
    }

    #[test]
    fn baseline_reproduces_published_values() {
        // d = g column.
        let expected = [
            (2u32, 37u64),
            (4, 54),
            (8, 79),
            (16, 112),
            (32, 153),
            (64, 202),
            (128, 259),
            (256, 324),
            (512, 397),
            (1024, 478),
            (2048, 567),
            (4096, 664),
        ];
        for (g, want) in expected {
            assert_eq!(baseline_ds_slots(&cfg(g, g)).unwrap(), want, "g={g}");
        }
        // d = 4g spot checks.
        assert_eq!(baseline_ds_slots(&cfg(8, 2)).unwrap(), 118);
        assert_eq!(baseline_ds_slots(&cfg(16, 4)).unwrap(), 177);
        assert!(baseline_ds_slots(&cfg(3, 3)).is_err());
    }

    #[test]
    fn aggregate_matches_hand_arithmetic() {
        let a = aggregate_stats(&[8.0, 8.0, 8.0]).unwrap();
        assert_eq!((a.mean, a.std_dev, a.max), (8.0, 0.0, 8.0));
        let b = aggregate_stats(&[5.0]).unwrap();
        assert_eq!((b.mean, b.std_dev, b.max), (5.0, 0.0, 5.0));
        let c = aggregate_stats(&[3.0, 5.0]).unwrap();
        assert_eq!((c.mean, c.std_dev, c.max), (4.0, 1.0, 5.0));
        assert!(aggregate_stats(&[]).is_err());
    }
}
