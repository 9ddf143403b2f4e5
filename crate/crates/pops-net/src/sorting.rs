//! Comparator networks on POPS: Batcher's odd-even merge sort, one-stage
//! simulation through the offline router, full sorting, and deterministic
//! online routing by sorting.
//!
//! A comparator stage is a set of disjoint index pairs. Extending the pairs
//! by identity gives an involution, which the offline router moves in
//! `2*ceil(d/g)` slots (one slot when d = 1); each endpoint then keeps the
//! smaller or larger of the two keys. Sorting a full Batcher network this
//! way costs `4 log^2 g + 2 log g` slots on a POPS(g,g).

use crate::analysis::RunStats;
use crate::error::{Error, Result};
use crate::model::{CouplerFabric, NetworkConfig};
use crate::offline::{build_offline_schedule, execute_offline_schedule, validate_permutation};

/// The comparator `[i:j]`: after it fires, position `min(i,j)` holds the
/// smaller key and position `max(i,j)` the larger.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Comparator {
    pub low: u32,
    pub high: u32,
}

impl Comparator {
    pub fn new(i: u32, j: u32) -> Result<Self> {
        if i == j {
            return Err(Error::domain(format!("comparator [{i}:{j}] has equal endpoints")));
        }
        Ok(Comparator { low: i.min(j), high: i.max(j) })
    }
}

/// A set of comparators with pairwise-disjoint endpoints; all of them fire
/// in parallel.
#[derive(Clone, Debug, Default)]
pub struct ComparatorStage {
    comparators: Vec<Comparator>,
}

impl ComparatorStage {
    pub fn new(comparators: Vec<Comparator>) -> Result<Self> {
        let mut endpoints: Vec<u32> =
            comparators.iter().flat_map(|c| [c.low, c.high]).collect();
        endpoints.sort_unstable();
        if endpoints.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::domain("comparator stage endpoints are not disjoint"));
        }
        Ok(ComparatorStage { comparators })
    }

    pub fn comparators(&self) -> &[Comparator] {
        &self.comparators
    }

    pub fn is_empty(&self) -> bool {
        self.comparators.is_empty()
    }

    /// Apply the stage in memory. This is the reference semantics that the
    /// network simulation is checked against.
    pub fn apply(&self, records: &mut [KeyedRecord]) {
        for c in &self.comparators {
            if records[c.high as usize].key < records[c.low as usize].key {
                records.swap(c.low as usize, c.high as usize);
            }
        }
    }
}

/// An ordered sequence of comparator stages over `n` lines.
#[derive(Clone, Debug)]
pub struct ComparatorNetwork {
    pub n: u32,
    stages: Vec<ComparatorStage>,
}

impl ComparatorNetwork {
    pub fn stages(&self) -> &[ComparatorStage] {
        &self.stages
    }

    pub fn stage_count(&self) -> u32 {
        self.stages.len() as u32
    }

    /// Stage lists in plain form, for JSON dumps.
    pub fn stage_pairs(&self) -> Vec<Vec<(u32, u32)>> {
        self.stages
            .iter()
            .map(|s| s.comparators.iter().map(|c| (c.low, c.high)).collect())
            .collect()
    }
}

/// A record moved by comparators: ordered by `key`, carrying an opaque
/// payload (the packet index, in routing use).
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct KeyedRecord {
    pub key: u64,
    pub payload: u64,
}

/// Batcher's odd-even merge sorting network for `n = 2^k` lines.
///
/// Stage count is exactly `log n * (log n + 1) / 2`.
pub fn batcher_network(n: u32) -> Result<ComparatorNetwork> {
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::domain(format!("Batcher network needs a power-of-two n >= 2, got {n}")));
    }
    let mut stages = Vec::new();
    let mut p = 1u32;
    while p < n {
        let mut k = p;
        while k >= 1 {
            let mut comparators = Vec::new();
            let mut j = k % p;
            while j + k < n {
                for i in 0..k.min(n - j - k) {
                    // Only partners within the same 2p block compare.
                    if (i + j) / (2 * p) == (i + j + k) / (2 * p) {
                        comparators.push(Comparator::new(i + j, i + j + k)?);
                    }
                }
                j += 2 * k;
            }
            stages.push(ComparatorStage::new(comparators)?);
            k /= 2;
        }
        p *= 2;
    }
    let log_n = n.trailing_zeros();
    debug_assert_eq!(stages.len() as u32, log_n * (log_n + 1) / 2);
    Ok(ComparatorNetwork { n, stages })
}

/// Simulate one comparator stage on the network: route the involution of
/// its pairs offline so endpoints exchange records, then keep min and max.
/// Returns the slots consumed: 0 for an empty stage, otherwise 1 when d = 1
/// and `2*ceil(d/g)` when d > 1.
pub fn simulate_stage(
    stage: &ComparatorStage,
    records: &mut [KeyedRecord],
    cfg: &NetworkConfig,
) -> Result<u32> {
    let mut fabric = CouplerFabric::new(*cfg);
    simulate_stage_on(stage, records, cfg, &mut fabric)
}

fn simulate_stage_on(
    stage: &ComparatorStage,
    records: &mut [KeyedRecord],
    cfg: &NetworkConfig,
    fabric: &mut CouplerFabric,
) -> Result<u32> {
    let n = cfg.n();
    if records.len() != n as usize {
        return Err(Error::domain(format!("{} records on a network of {n} processors", records.len())));
    }
    if stage.is_empty() {
        return Ok(0);
    }
    for c in stage.comparators() {
        if c.high >= n {
            return Err(Error::domain(format!("comparator endpoint {} outside [0,{n})", c.high)));
        }
    }
    // The stage's pairs, extended by identity, form an involution.
    let mut involution: Vec<u32> = (0..n).collect();
    for c in stage.comparators() {
        involution[c.low as usize] = c.high;
        involution[c.high as usize] = c.low;
    }
    let schedule = build_offline_schedule(&involution, cfg)?;
    execute_offline_schedule(&schedule, &involution, cfg, fabric)?;
    // Each endpoint now holds both records and keeps one.
    stage.apply(records);
    Ok(schedule.total_slots)
}

/// Sort `n = g^2` records on a POPS(g,g) with the Batcher network.
/// Returns the slots consumed: `4 log^2 g + 2 log g`.
pub fn sort_on_pops(records: &mut [KeyedRecord], cfg: &NetworkConfig) -> Result<u32> {
    if cfg.d() != cfg.g() {
        return Err(Error::UnsupportedConfig(format!(
            "sorting is defined for d = g, got POPS({},{})",
            cfg.d(),
            cfg.g()
        )));
    }
    let network = batcher_network(cfg.n())?;
    let mut fabric = CouplerFabric::new(*cfg);
    let mut slots = 0;
    for stage in network.stages() {
        slots += simulate_stage_on(stage, records, cfg, &mut fabric)?;
    }
    if records.windows(2).any(|w| w[0].key > w[1].key) {
        return Err(Error::invariant("network left records unsorted".into()));
    }
    Ok(slots)
}

/// Deterministic online routing by sorting: give each processor a record
/// keyed by its packet's destination and sort. Keys form a permutation, so
/// sorted order is exactly final placement.
pub fn route_by_sorting(perm: &[u32], cfg: &NetworkConfig) -> Result<RunStats> {
    if cfg.d() != cfg.g() {
        return Err(Error::UnsupportedConfig(format!(
            "route-by-sorting is defined for d = g, got POPS({},{})",
            cfg.d(),
            cfg.g()
        )));
    }
    validate_permutation(perm, cfg.n())?;
    let mut records: Vec<KeyedRecord> = perm
        .iter()
        .enumerate()
        .map(|(i, &dest)| KeyedRecord { key: dest as u64, payload: i as u64 })
        .collect();
    let network = batcher_network(cfg.n())?;
    let slots = sort_on_pops(&mut records, cfg)?;
    for (j, rec) in records.iter().enumerate() {
        if rec.key != j as u64 || perm[rec.payload as usize] != j as u32 {
            return Err(Error::invariant(format!(
                "record with key {} sits at processor {j} after sorting",
                rec.key
            )));
        }
    }
    Ok(RunStats {
        iterations: network.stage_count(),
        slots,
        seed: 0,
        per_step: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(d: u32, g: u32) -> NetworkConfig {
        NetworkConfig::new(d, g).unwrap()
    }

    fn keys(records: &[KeyedRecord]) -> Vec<u64> {
        records.iter().map(|r| r.key).collect()
    }

    fn records_from(keys: &[u64]) -> Vec<KeyedRecord> {
        keys.iter().enumerate().map(|(i, &k)| KeyedRecord { key: k, payload: i as u64 }).collect()
    }

    #[test]
    fn batcher_stage_counts_match_the_closed_form() {
        assert_eq!(batcher_network(2).unwrap().stage_count(), 1);
        assert_eq!(batcher_network(4).unwrap().stage_count(), 3);
        assert_eq!(batcher_network(16).unwrap().stage_count(), 10);
        assert_eq!(batcher_network(64).unwrap().stage_count(), 21);
        assert!(batcher_network(12).is_err());
        assert!(batcher_network(1).is_err());
        assert!(batcher_network(0).is_err());
    }

    #[test]
    fn two_line_network_is_a_single_comparator() {
        let net = batcher_network(2).unwrap();
        assert_eq!(net.stage_pairs(), vec![vec![(0, 1)]]);
    }

    #[test]
    fn batcher_sorts_every_zero_one_input_exhaustively() {
        // The zero-one principle: a network sorting all 0-1 inputs sorts
        // everything. Exhaustive up to n = 16.
        for n in [2u32, 4, 8, 16] {
            let net = batcher_network(n).unwrap();
            for mask in 0u32..(1 << n) {
                let mut v: Vec<KeyedRecord> = (0..n)
                    .map(|i| KeyedRecord { key: ((mask >> i) & 1) as u64, payload: i as u64 })
                    .collect();
                for stage in net.stages() {
                    stage.apply(&mut v);
                }
                assert!(
                    v.windows(2).all(|w| w[0].key <= w[1].key),
                    "n={n} mask={mask:#b} -> {:?}",
                    keys(&v)
                );
            }
        }
    }

    #[test]
    fn single_comparator_stage_swaps_out_of_order_keys() {
        let stage = ComparatorStage::new(vec![Comparator::new(0, 1).unwrap()]).unwrap();
        let mut recs = records_from(&[5, 3]);
        // In-memory semantics.
        stage.apply(&mut recs);
        assert_eq!(keys(&recs), vec![3, 5]);
        // On-network semantics on a POPS(1,2).
        let mut recs = records_from(&[5, 3]);
        let slots = simulate_stage(&stage, &mut recs, &cfg(1, 2)).unwrap();
        assert_eq!(slots, 1);
        assert_eq!(keys(&recs), vec![3, 5]);
    }

    #[test]
    fn empty_stage_costs_no_slots() {
        let stage = ComparatorStage::default();
        let mut recs = records_from(&[2, 1, 0, 3]);
        let before = recs.clone();
        let slots = simulate_stage(&stage, &mut recs, &cfg(2, 2)).unwrap();
        assert_eq!(slots, 0);
        assert_eq!(recs, before);
    }

    #[test]
    fn overlapping_comparators_are_rejected() {
        let cs = vec![Comparator::new(0, 1).unwrap(), Comparator::new(1, 2).unwrap()];
        assert!(ComparatorStage::new(cs).is_err());
        assert!(Comparator::new(3, 3).is_err());
    }

    #[test]
    fn simulated_stage_matches_the_in_memory_oracle() {
        // One full stage of the n=16 network on a POPS(4,4), random-ish keys.
        let c = cfg(4, 4);
        let net = batcher_network(16).unwrap();
        let keys_in: Vec<u64> =
            (0..16u64).map(|i| i.wrapping_mul(0x9E3779B97F4A7C15) >> 40).collect();
        for stage in net.stages() {
            let mut on_net = records_from(&keys_in);
            let mut oracle = records_from(&keys_in);
            let slots = simulate_stage(stage, &mut on_net, &c).unwrap();
            assert_eq!(slots, 2);
            stage.apply(&mut oracle);
            assert_eq!(on_net, oracle);
        }
    }

    #[test]
    fn sort_on_pops_slot_count_is_4log2g_plus_2logg() {
        let c = cfg(4, 4);
        let mut recs = records_from(&[15, 3, 9, 0, 12, 7, 1, 14, 2, 8, 11, 5, 13, 4, 10, 6]);
        let slots = sort_on_pops(&mut recs, &c).unwrap();
        assert_eq!(slots, 20);
        assert_eq!(keys(&recs), (0..16).collect::<Vec<u64>>());

        // Already sorted input: same oblivious slot count.
        let mut sorted = records_from(&(0..16).collect::<Vec<u64>>());
        assert_eq!(sort_on_pops(&mut sorted, &c).unwrap(), 20);
    }

    #[test]
    fn sorting_rejects_rectangular_networks() {
        let mut recs = records_from(&[0, 1, 2, 3, 4, 5, 6, 7]);
        assert!(matches!(
            sort_on_pops(&mut recs, &cfg(4, 2)),
            Err(Error::UnsupportedConfig(_))
        ));
        assert!(matches!(
            route_by_sorting(&[0, 1], &cfg(2, 1)),
            Err(Error::UnsupportedConfig(_))
        ));
    }

    #[test]
    fn route_by_sorting_places_every_packet() {
        let c = cfg(4, 4);
        let perm: [u32; 16] = [1, 5, 8, 9, 3, 10, 11, 14, 15, 13, 0, 7, 2, 6, 12, 4];
        let stats = route_by_sorting(&perm, &c).unwrap();
        assert_eq!(stats.slots, 20);

        let id: Vec<u32> = (0..16).collect();
        assert_eq!(route_by_sorting(&id, &c).unwrap().slots, 20);
        let rev: Vec<u32> = (0..16).rev().collect();
        assert_eq!(route_by_sorting(&rev, &c).unwrap().slots, 20);
    }
}
