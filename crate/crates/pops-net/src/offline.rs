//! Deterministic offline permutation routing.
//!
//! With the permutation known globally, route every packet in one slot when
//! d = 1 and in `2 * ceil(d/g)` slots otherwise. The construction colors the
//! bipartite multigraph of group transitions and turns color classes into
//! conflict-free two-hop batches: within a batch, each color is pinned to
//! one intermediate group, so slot A uses every coupler at most once (one
//! edge per color per source group) and so does slot B (one per destination
//! group).

use serde::Serialize;

use crate::analysis::{RunStats, StepMetrics};
use crate::error::{Error, Result};
use crate::model::{
    CouplerFabric, GroupId, Header, ListenPlan, Message, NetworkConfig, PacketId, ProcessorId,
    SendPlan, SlotPlan,
};

/// Bipartite multigraph on source groups x destination groups, one edge per
/// packet.
#[derive(Clone, Debug)]
pub struct GroupMultigraph {
    pub g: u32,
    /// `(packet, source group, destination group)`.
    pub edges: Vec<(PacketId, GroupId, GroupId)>,
    pub max_degree: u32,
}

/// Reject anything that is not a bijection on `[0, n)`.
pub fn validate_permutation(perm: &[u32], n: u32) -> Result<()> {
    if perm.len() != n as usize {
        return Err(Error::validation(format!(
            "permutation has length {}, network has n={n}",
            perm.len()
        )));
    }
    let mut seen = vec![false; n as usize];
    for &dest in perm {
        if dest >= n {
            return Err(Error::validation(format!("destination {dest} outside [0,{n})")));
        }
        if seen[dest as usize] {
            return Err(Error::validation(format!("destination {dest} appears twice")));
        }
        seen[dest as usize] = true;
    }
    Ok(())
}

/// One edge per packet, from `group(i)` to `group(perm(i))`.
pub fn build_group_multigraph(perm: &[u32], cfg: &NetworkConfig) -> Result<GroupMultigraph> {
    validate_permutation(perm, cfg.n())?;
    let g = cfg.g();
    let mut left = vec![0u32; g as usize];
    let mut right = vec![0u32; g as usize];
    let mut edges = Vec::with_capacity(perm.len());
    for (i, &dest) in perm.iter().enumerate() {
        let a = cfg.group_of_unchecked(i as u32);
        let b = cfg.group_of_unchecked(dest);
        left[a as usize] += 1;
        right[b as usize] += 1;
        edges.push((i as PacketId, a, b));
    }
    let max_degree =
        left.iter().chain(right.iter()).copied().max().unwrap_or(0);
    Ok(GroupMultigraph { g, edges, max_degree })
}

/// A proper edge coloring: no two edges sharing a node get the same color.
#[derive(Clone, Debug)]
pub struct EdgeColoring {
    pub palette: u32,
    /// Color of `edges[e]`.
    pub colors: Vec<u32>,
}

impl EdgeColoring {
    pub fn class_sizes(&self) -> Vec<u32> {
        let mut sizes = vec![0u32; self.palette as usize];
        for &c in &self.colors {
            sizes[c as usize] += 1;
        }
        sizes
    }

    /// Check properness against the multigraph it was built for.
    pub fn verify(&self, mg: &GroupMultigraph) -> Result<()> {
        let m = self.palette as usize;
        let mut left_used = vec![false; mg.g as usize * m];
        let mut right_used = vec![false; mg.g as usize * m];
        for (e, &(_, a, b)) in mg.edges.iter().enumerate() {
            let c = self.colors[e] as usize;
            if c >= m {
                return Err(Error::invariant(format!("edge {e} colored {c} outside palette")));
            }
            let la = a as usize * m + c;
            let rb = b as usize * m + c;
            if left_used[la] || right_used[rb] {
                return Err(Error::invariant(format!(
                    "edge coloring not proper: color {c} repeated at group {a}/{b}"
                )));
            }
            left_used[la] = true;
            right_used[rb] = true;
        }
        Ok(())
    }
}

const NO_EDGE: usize = usize::MAX;

/// Proper edge coloring with exactly `max_degree` colors (Koenig). On a
/// d-regular instance every color class is a perfect matching on the groups.
pub fn edge_color_bipartite(mg: &GroupMultigraph) -> EdgeColoring {
    color_with_palette(mg, mg.max_degree.max(1))
}

/// Koenig-style insertion coloring with an arbitrary palette `m >= Delta`.
///
/// Edges are inserted in index order; when no color is free at both
/// endpoints, an alternating two-color chain from the right endpoint is
/// flipped. The chain can never reach the left endpoint, so the flip always
/// frees a common color.
fn color_with_palette(mg: &GroupMultigraph, palette: u32) -> EdgeColoring {
    assert!(palette >= mg.max_degree, "palette smaller than max degree");
    let g = mg.g as usize;
    let m = palette as usize;
    // slot[node * m + c] = edge currently colored c at that node.
    let mut left_slot = vec![NO_EDGE; g * m];
    let mut right_slot = vec![NO_EDGE; g * m];
    let mut colors = vec![u32::MAX; mg.edges.len()];

    for (e, &(_, a, b)) in mg.edges.iter().enumerate() {
        let (a, b) = (a as usize, b as usize);
        let free_at = |slot: &[usize], node: usize| -> Option<usize> {
            (0..m).find(|&c| slot[node * m + c] == NO_EDGE)
        };
        let common = (0..m)
            .find(|&c| left_slot[a * m + c] == NO_EDGE && right_slot[b * m + c] == NO_EDGE);
        let color = match common {
            Some(c) => c,
            None => {
                let alpha = free_at(&left_slot, a).expect("palette covers left degree");
                let beta = free_at(&right_slot, b).expect("palette covers right degree");
                flip_chain(mg, &mut left_slot, &mut right_slot, &mut colors, m, b, alpha, beta);
                debug_assert_eq!(right_slot[b * m + alpha], NO_EDGE);
                alpha
            }
        };
        colors[e] = color as u32;
        left_slot[a * m + color] = e;
        right_slot[b * m + color] = e;
    }
    EdgeColoring { palette, colors }
}

/// Flip the alternating (alpha, beta) chain that starts with the alpha edge
/// at right node `b`, freeing alpha there.
fn flip_chain(
    mg: &GroupMultigraph,
    left_slot: &mut [usize],
    right_slot: &mut [usize],
    colors: &mut [u32],
    m: usize,
    b: usize,
    alpha: usize,
    beta: usize,
) {
    let mut chain = Vec::new();
    let mut node = b;
    let mut on_right = true;
    let mut want = alpha;
    loop {
        let e = if on_right { right_slot[node * m + want] } else { left_slot[node * m + want] };
        if e == NO_EDGE {
            break;
        }
        chain.push(e);
        let (_, ea, eb) = mg.edges[e];
        node = if on_right { ea as usize } else { eb as usize };
        on_right = !on_right;
        want = if want == alpha { beta } else { alpha };
    }
    for &e in &chain {
        let (_, ea, eb) = mg.edges[e];
        let c = colors[e] as usize;
        left_slot[ea as usize * m + c] = NO_EDGE;
        right_slot[eb as usize * m + c] = NO_EDGE;
    }
    for &e in &chain {
        let (_, ea, eb) = mg.edges[e];
        let c = if colors[e] as usize == alpha { beta } else { alpha };
        colors[e] = c as u32;
        left_slot[ea as usize * m + c] = e;
        right_slot[eb as usize * m + c] = e;
    }
}

/// Rebalance class sizes down to `cap` by flipping two-color alternating
/// paths with a surplus edge. Properness is preserved; each flip moves one
/// edge from an overfull class to an underfull one.
fn balance_coloring(mg: &GroupMultigraph, coloring: &mut EdgeColoring, cap: u32) {
    let m = coloring.palette as usize;
    let g = mg.g as usize;
    let mut sizes = coloring.class_sizes();
    loop {
        let Some(big) = (0..m).find(|&c| sizes[c] > cap) else { break };
        let small =
            (0..m).min_by_key(|&c| sizes[c]).expect("palette not empty");
        assert!(
            sizes[small] < cap,
            "cannot balance: every class at capacity while one overflows"
        );
        let moved = flip_surplus_path(mg, coloring, g, big as u32, small as u32);
        assert!(moved, "no surplus path between an overfull and an underfull class");
        sizes[big] -= 1;
        sizes[small] += 1;
    }
}

/// Find a path component of the (c1, c2) subgraph carrying one more c1 edge
/// than c2 edges, and swap the two colors along it. Returns false when no
/// such component exists (only possible when sizes are already equal).
fn flip_surplus_path(
    mg: &GroupMultigraph,
    coloring: &mut EdgeColoring,
    g: usize,
    c1: u32,
    c2: u32,
) -> bool {
    // Incidence of the two colors: at most one edge of each per node side.
    let mut left_edge = vec![[NO_EDGE; 2]; g];
    let mut right_edge = vec![[NO_EDGE; 2]; g];
    for (e, &(_, a, b)) in mg.edges.iter().enumerate() {
        let c = coloring.colors[e];
        let k = if c == c1 {
            0
        } else if c == c2 {
            1
        } else {
            continue;
        };
        left_edge[a as usize][k] = e;
        right_edge[b as usize][k] = e;
    }
    // Path endpoints carry exactly one of the two colors. Walk each path
    // once, from its endpoint, counting the surplus.
    let mut visited = vec![false; mg.edges.len()];
    let endpoints = (0..g)
        .flat_map(|v| [(v, false), (v, true)])
        .filter(|&(v, right)| {
            let inc = if right { &right_edge[v] } else { &left_edge[v] };
            (inc[0] == NO_EDGE) != (inc[1] == NO_EDGE)
        });
    for (start, on_right) in endpoints {
        let inc = if on_right { &right_edge[start] } else { &left_edge[start] };
        let first = if inc[0] != NO_EDGE { inc[0] } else { inc[1] };
        if visited[first] {
            continue;
        }
        let mut path = Vec::new();
        let mut surplus: i32 = 0;
        let (mut node, mut right_side, mut e) = (start, on_right, first);
        loop {
            visited[e] = true;
            path.push(e);
            surplus += if coloring.colors[e] == c1 { 1 } else { -1 };
            let (_, ea, eb) = mg.edges[e];
            node = if right_side { ea as usize } else { eb as usize };
            right_side = !right_side;
            let inc = if right_side { &right_edge[node] } else { &left_edge[node] };
            let other = coloring.colors[e];
            let want = if other == c1 { 1 } else { 0 };
            if inc[want] == NO_EDGE {
                break;
            }
            e = inc[want];
        }
        if surplus == 1 {
            for &pe in &path {
                coloring.colors[pe] = if coloring.colors[pe] == c1 { c2 } else { c1 };
            }
            return true;
        }
    }
    false
}

/// Two-hop itinerary of one packet (absent for the d = 1 direct case).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TwoHop {
    pub batch: u32,
    pub intermediate_group: GroupId,
    pub relay: ProcessorId,
}

#[derive(Clone, Debug, Serialize)]
pub struct PacketItinerary {
    pub packet: PacketId,
    pub source: ProcessorId,
    pub dest: ProcessorId,
    pub hop: Option<TwoHop>,
}

/// The full precomputed routing plan for one permutation.
#[derive(Clone, Debug, Serialize)]
pub struct OfflineSchedule {
    pub d: u32,
    pub g: u32,
    pub batches: u32,
    pub total_slots: u32,
    pub itineraries: Vec<PacketItinerary>,
}

/// Build the schedule: color the group multigraph with `g * ceil(d/g)`
/// colors, cap every class at `ceil(d / ceil(d/g))` edges, then map color
/// `k*g + j` to batch `k` and intermediate group `j`.
pub fn build_offline_schedule(perm: &[u32], cfg: &NetworkConfig) -> Result<OfflineSchedule> {
    validate_permutation(perm, cfg.n())?;
    let (d, g) = (cfg.d(), cfg.g());

    if d == 1 {
        let itineraries = perm
            .iter()
            .enumerate()
            .map(|(i, &dest)| PacketItinerary {
                packet: i as PacketId,
                source: i as ProcessorId,
                dest,
                hop: None,
            })
            .collect();
        return Ok(OfflineSchedule { d, g, batches: 0, total_slots: 1, itineraries });
    }

    let mg = build_group_multigraph(perm, cfg)?;
    let batches = d.div_ceil(g);
    let palette = batches * g;
    let cap = d.div_ceil(batches);
    let mut coloring = color_with_palette(&mg, palette);
    balance_coloring(&mg, &mut coloring, cap);
    coloring.verify(&mg)?;

    // Relay pick inside each class: processor j*d + a for source group a
    // when d >= g (the paper's convention); rank order within the class when
    // d < g, where within-group indices cannot cover all source groups.
    let mut class_members: Vec<Vec<usize>> = vec![Vec::new(); palette as usize];
    for (e, &c) in coloring.colors.iter().enumerate() {
        class_members[c as usize].push(e);
    }
    let mut itineraries: Vec<Option<PacketItinerary>> = vec![None; perm.len()];
    for (c, members) in class_members.iter().enumerate() {
        let batch = c as u32 / g;
        let j = c as u32 % g;
        debug_assert!(members.len() as u32 <= cap && cap <= d);
        for (rank, &e) in members.iter().enumerate() {
            let (packet, a, _) = mg.edges[e];
            let within = if d >= g { a } else { rank as u32 };
            let relay = cfg.member(j, within);
            itineraries[packet as usize] = Some(PacketItinerary {
                packet,
                source: packet,
                dest: perm[packet as usize],
                hop: Some(TwoHop { batch, intermediate_group: j, relay }),
            });
        }
    }
    let itineraries = itineraries.into_iter().map(|it| it.expect("every packet scheduled"));
    Ok(OfflineSchedule {
        d,
        g,
        batches,
        total_slots: 2 * batches,
        itineraries: itineraries.collect(),
    })
}

fn header_for(packet: PacketId, dest: ProcessorId, inter: GroupId, cfg: &NetworkConfig) -> Header {
    Header {
        source: packet,
        dest,
        intermediate_group: inter,
        temp_dest_group: cfg.delta_unchecked(dest),
    }
}

/// Build the schedule and execute it through the coupler fabric.
///
/// Postconditions are enforced, not assumed: every slot must be
/// conflict-free and every packet must end at its destination.
pub fn route_offline(perm: &[u32], cfg: &NetworkConfig) -> Result<(OfflineSchedule, RunStats)> {
    let schedule = build_offline_schedule(perm, cfg)?;
    let mut fabric = CouplerFabric::new(*cfg);
    let stats = execute_offline_schedule(&schedule, perm, cfg, &mut fabric)?;
    Ok((schedule, stats))
}

/// Execute a prebuilt schedule on an existing fabric, checking delivery.
pub fn execute_offline_schedule(
    schedule: &OfflineSchedule,
    perm: &[u32],
    cfg: &NetworkConfig,
    fabric: &mut CouplerFabric,
) -> Result<RunStats> {
    let mut arrived: Vec<Option<PacketId>> = vec![None; cfg.n() as usize];
    let mut per_step = Vec::new();
    let mut slots_run = 0u32;

    if schedule.total_slots == 1 {
        let mut plan = SlotPlan::new();
        for it in &schedule.itineraries {
            let b = cfg.group_of_unchecked(it.dest);
            plan.sends.push(SendPlan::unicast(
                it.source,
                Message::copy(it.packet, header_for(it.packet, it.dest, b, cfg)),
                b,
            ));
            plan.listens.push(ListenPlan {
                who: it.dest,
                from_group: cfg.group_of_unchecked(it.source),
            });
        }
        let out = fabric.execute_slot(&plan)?;
        ensure_conflict_free(&out.conflicts, "direct slot")?;
        slots_run += 1;
        for (who, m) in &out.deliveries {
            arrived[*who as usize] = Some(m.packet_id);
        }
        per_step.push(batch_metrics(1, schedule.itineraries.len() as u32, 0, 0));
    } else {
        for batch in 0..schedule.batches {
            let members: Vec<&PacketItinerary> = schedule
                .itineraries
                .iter()
                .filter(|it| it.hop.map(|h| h.batch) == Some(batch))
                .collect();

            let mut slot_a = SlotPlan::new();
            for it in &members {
                let hop = it.hop.unwrap();
                slot_a.sends.push(SendPlan::unicast(
                    it.source,
                    Message::copy(
                        it.packet,
                        header_for(it.packet, it.dest, hop.intermediate_group, cfg),
                    ),
                    hop.intermediate_group,
                ));
                slot_a.listens.push(ListenPlan {
                    who: hop.relay,
                    from_group: cfg.group_of_unchecked(it.source),
                });
            }
            let out_a = fabric.execute_slot(&slot_a)?;
            ensure_conflict_free(&out_a.conflicts, "slot A")?;
            if out_a.deliveries.len() != members.len() {
                return Err(Error::invariant(format!(
                    "batch {batch} slot A: {} of {} packets reached their relay",
                    out_a.deliveries.len(),
                    members.len()
                )));
            }
            slots_run += 1;

            let mut slot_b = SlotPlan::new();
            for (relay, m) in &out_a.deliveries {
                slot_b.sends.push(SendPlan::unicast(
                    *relay,
                    *m,
                    cfg.group_of_unchecked(m.header.dest),
                ));
            }
            for it in &members {
                slot_b.listens.push(ListenPlan {
                    who: it.dest,
                    from_group: it.hop.unwrap().intermediate_group,
                });
            }
            let out_b = fabric.execute_slot(&slot_b)?;
            ensure_conflict_free(&out_b.conflicts, "slot B")?;
            slots_run += 1;
            let mut delivered = 0;
            for (who, m) in &out_b.deliveries {
                if m.header.dest == *who {
                    arrived[*who as usize] = Some(m.packet_id);
                    delivered += 1;
                }
            }
            if delivered != members.len() {
                return Err(Error::invariant(format!(
                    "batch {batch} slot B delivered {delivered} of {}",
                    members.len()
                )));
            }
            per_step.push(batch_metrics(batch + 1, members.len() as u32, 0, 0));
        }
    }

    if slots_run != schedule.total_slots {
        return Err(Error::invariant(format!(
            "executed {slots_run} slots, schedule promised {}",
            schedule.total_slots
        )));
    }
    for (i, &dest) in perm.iter().enumerate() {
        if arrived[dest as usize] != Some(i as PacketId) {
            return Err(Error::invariant(format!(
                "packet {i} did not end at its destination {dest}"
            )));
        }
    }

    Ok(RunStats {
        iterations: per_step.len() as u32,
        slots: slots_run,
        seed: 0,
        per_step,
    })
}

fn ensure_conflict_free(
    conflicts: &[(crate::model::CouplerId, u32)],
    what: &str,
) -> Result<()> {
    if conflicts.is_empty() {
        Ok(())
    } else {
        Err(Error::invariant(format!("offline {what} had {} coupler conflicts", conflicts.len())))
    }
}

fn batch_metrics(step: u32, size: u32, c1: u32, c2: u32) -> StepMetrics {
    StepMetrics {
        step,
        participants: size,
        slot1_survivors: size,
        deliveries: size,
        max_left_degree: 0,
        max_right_degree: 0,
        lambda: 0.0,
        conflicts_slot1: c1,
        conflicts_slot2: c2,
        conflicts_ack: 0,
        conflicts_delivery: 0,
        losses: 0,
        max_buffer_occupancy: 0,
    }
}
