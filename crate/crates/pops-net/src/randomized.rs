//! The randomized online permutation router.
//!
//! Each step sends every pending packet through a uniformly random
//! intermediate group, then to its temporary destination group
//! `delta(dest) = dest mod g`, then to its destination, with acks flowing
//! back along the reverse couplers. Sources delete their original only on a
//! completed ack chain, so a packet that loses a coupler conflict is simply
//! retried on the next step with a fresh random draw.
//!
//! Two step layouts are provided:
//!
//! * [`StepProtocol::Paper5`] — the literal five-slot step. The ack returns
//!   before final delivery, which is sound when `d <= g` (the delivery slot
//!   is structurally conflict-free) but can lose packets when `d > g`: two
//!   packets may share both temporary and final group, collide in the
//!   delivery slot, and both copies die after their sources already deleted
//!   the originals. The engine detects this and either aborts or repairs,
//!   per [`LossPolicy`].
//! * [`StepProtocol::Reversal6`] — a six-slot variant that delivers first
//!   and then reverses the full forward path with acks. The ack chain
//!   retraces conflict-free couplers, so delivery is exactly-once for every
//!   `d, g`.
//!
//! For `d > g`, a participation coin thins the senders so that about `g`
//! packets per group compete in each step (see
//! [`participation_probability`]).

use crate::analysis::{build_conflict_graph, PendingPacket, RunStats, StepMetrics};
use crate::error::{Error, Result};
use crate::model::{
    CouplerFabric, GroupId, Header, ListenPlan, Message, NetworkConfig, PacketId, ProcessorId,
    SendPlan, SlotOutcome, SlotPlan,
};
use crate::offline::validate_permutation;
use crate::rng::{derive_bernoulli, derive_uniform_group, Purpose, RandomKey};

/// Which step layout to run.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum StepProtocol {
    /// Literal five-slot step; lossless exactly-once only for d <= g.
    Paper5,
    /// Six-slot path-reversal step; lossless exactly-once for all d, g.
    Reversal6,
}

impl StepProtocol {
    pub fn slots_per_step(self) -> u32 {
        match self {
            StepProtocol::Paper5 => 5,
            StepProtocol::Reversal6 => 6,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StepProtocol::Paper5 => "paper5",
            StepProtocol::Reversal6 => "reversal6",
        }
    }
}

impl std::str::FromStr for StepProtocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper5" => Ok(StepProtocol::Paper5),
            "reversal6" => Ok(StepProtocol::Reversal6),
            other => Err(Error::domain(format!("unknown protocol '{other}'"))),
        }
    }
}

/// What to do when the five-slot protocol acks a packet whose copy then
/// dies in the delivery slot (possible only for d > g).
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub enum LossPolicy {
    /// Fail the run with [`Error::LossDetected`].
    #[default]
    Abort,
    /// Requeue the packet at its source (omniscient repair), count the loss
    /// in the step report, and keep routing.
    RepairAndContinue,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub enum ScheduleMode {
    /// The fixed degree schedule `p_s = g / (d - g(s-1)/c_eps)`.
    #[default]
    FixedSchedule,
    /// Each group thins by its own pending count: `p = min(1, g/pending)`.
    Adaptive,
}

/// Participation-probability schedule for the d > g phase.
#[derive(Clone, Copy, Debug)]
pub struct ParticipationSchedule {
    /// The constant `c + eps(g)`; `c = exp(1 + 1/e) ~ 3.927` and the
    /// default rounds it to 4.
    pub c_eps: f64,
    pub mode: ScheduleMode,
}

impl Default for ParticipationSchedule {
    fn default() -> Self {
        ParticipationSchedule { c_eps: 4.0, mode: ScheduleMode::FixedSchedule }
    }
}

impl ParticipationSchedule {
    pub fn fixed() -> Self {
        Self::default()
    }

    pub fn adaptive() -> Self {
        ParticipationSchedule { c_eps: 4.0, mode: ScheduleMode::Adaptive }
    }

    /// Steps in the thinning phase: `ceil(c_eps * (d/g - 1))`; zero when
    /// d <= g.
    pub fn phase1_steps(&self, cfg: &NetworkConfig) -> u32 {
        let ratio = cfg.d() as f64 / cfg.g() as f64;
        if ratio <= 1.0 {
            0
        } else {
            (self.c_eps * (ratio - 1.0)).ceil() as u32
        }
    }
}

/// The coin bias for step `s >= 1`: `min(1, g / (d - g(s-1)/c_eps))` during
/// the thinning phase, then 1.
pub fn participation_probability(
    s: u32,
    cfg: &NetworkConfig,
    sched: &ParticipationSchedule,
) -> f64 {
    if s > sched.phase1_steps(cfg) {
        return 1.0;
    }
    let denom = cfg.d() as f64 - cfg.g() as f64 * (s as f64 - 1.0) / sched.c_eps;
    (cfg.g() as f64 / denom).clamp(0.0, 1.0)
}

/// Result of one executed step.
#[derive(Clone, Debug)]
pub struct StepReport {
    pub metrics: StepMetrics,
    /// Packets delivered to their destination during this step.
    pub delivered: Vec<PacketId>,
    /// Sources that deleted their original during this step.
    pub deleted: Vec<PacketId>,
    /// The delete-iff-delivered biconditional held this step.
    pub delete_iff_delivered: bool,
}

/// Mutable routing state: which packets are pending at their source, which
/// destinations have received, and the step/slot counters. Relay buffers
/// live in the router's per-step scratch.
#[derive(Clone, Debug)]
pub struct RoutingState {
    pub pending: Vec<bool>,
    pub pending_count: u32,
    pub received: Vec<bool>,
    pub delivered_count: u32,
    pub step: u32,
    pub slots_run: u32,
}

/// The routing engine for one permutation instance.
pub struct RandomizedRouter {
    cfg: NetworkConfig,
    perm: Vec<u32>,
    protocol: StepProtocol,
    schedule: ParticipationSchedule,
    seed: u64,
    loss_policy: LossPolicy,
    immediate_exit: bool,
    state: RoutingState,
    fabric: CouplerFabric,
    history: Vec<StepMetrics>,
    // Static listen set for the copy-forwarding slots: in every group x the
    // processor with within-group index w < min(d, g) relays coupler c(x, w).
    relay_listens: Vec<ListenPlan>,
    plan: SlotPlan,
    trace: Option<Vec<SlotOutcome>>,
}

impl RandomizedRouter {
    pub fn new(
        perm: Vec<u32>,
        cfg: NetworkConfig,
        protocol: StepProtocol,
        schedule: ParticipationSchedule,
        seed: u64,
    ) -> Result<Self> {
        validate_permutation(&perm, cfg.n())?;
        let n = cfg.n() as usize;
        let relays = (cfg.d().min(cfg.g())) as usize;
        let mut relay_listens = Vec::with_capacity(cfg.g() as usize * relays);
        for x in 0..cfg.g() {
            for w in 0..relays as u32 {
                relay_listens.push(ListenPlan { who: cfg.member(x, w), from_group: w });
            }
        }
        Ok(RandomizedRouter {
            cfg,
            perm,
            protocol,
            schedule,
            seed,
            loss_policy: LossPolicy::Abort,
            immediate_exit: false,
            state: RoutingState {
                pending: vec![true; n],
                pending_count: cfg.n(),
                received: vec![false; n],
                delivered_count: 0,
                step: 0,
                slots_run: 0,
            },
            fabric: CouplerFabric::new(cfg),
            history: Vec::new(),
            relay_listens,
            plan: SlotPlan::new(),
            trace: None,
        })
    }

    pub fn with_loss_policy(mut self, policy: LossPolicy) -> Self {
        self.loss_policy = policy;
        self
    }

    /// Model packets leaving the network on arrival; buffer occupancy then
    /// stays at 2 instead of 3.
    pub fn with_immediate_exit(mut self, on: bool) -> Self {
        self.immediate_exit = on;
        self
    }

    /// Keep the slot outcomes of one step for inspection.
    pub fn enable_trace(&mut self) {
        self.trace = Some(Vec::new());
    }

    pub fn last_trace(&self) -> Option<&[SlotOutcome]> {
        self.trace.as_deref()
    }

    pub fn state(&self) -> &RoutingState {
        &self.state
    }

    pub fn cfg(&self) -> &NetworkConfig {
        &self.cfg
    }

    pub fn done(&self) -> bool {
        self.state.delivered_count == self.cfg.n()
    }

    fn pending_packets(&self) -> Vec<PendingPacket> {
        let mut list = Vec::with_capacity(self.state.pending_count as usize);
        for (i, &p) in self.state.pending.iter().enumerate() {
            if p {
                list.push((i as PacketId, i as ProcessorId, self.perm[i]));
            }
        }
        list
    }

    fn execute(&mut self, plan_done: &SlotPlan) -> Result<SlotOutcome> {
        let out = self.fabric.execute_slot(plan_done)?;
        self.state.slots_run += 1;
        if let Some(trace) = &mut self.trace {
            trace.push(out.clone());
        }
        Ok(out)
    }

    /// The occupancy of one processor at a reception event. `arriving` is
    /// the packet being written right now.
    fn occupancy(&self, proc: ProcessorId, holds_copy: bool, arriving_counts: bool) -> u32 {
        let stored_received = !self.immediate_exit && self.state.received[proc as usize];
        self.state.pending[proc as usize] as u32
            + stored_received as u32
            + holds_copy as u32
            + arriving_counts as u32
    }

    /// Run one full step (5 or 6 slots). Callers normally use [`Self::run`];
    /// this is the spec-level single-step entry point.
    pub fn run_step(&mut self) -> Result<StepReport> {
        let s = self.state.step + 1;
        let pending_list = self.pending_packets();
        let graph = build_conflict_graph(&pending_list, &self.cfg);
        let g = self.cfg.g();

        // Participation probabilities for this step.
        let fixed_p = participation_probability(s, &self.cfg, &self.schedule);
        let group_p: Option<Vec<f64>> = match self.schedule.mode {
            ScheduleMode::FixedSchedule => None,
            ScheduleMode::Adaptive => Some(
                graph
                    .left_degrees
                    .iter()
                    .map(|&deg| if deg == 0 { 1.0 } else { (g as f64 / deg as f64).min(1.0) })
                    .collect(),
            ),
        };

        if let Some(trace) = &mut self.trace {
            trace.clear();
        }

        let mut participants: Vec<(PacketId, GroupId)> = Vec::with_capacity(pending_list.len());
        for &(pid, src, _) in &pending_list {
            let p = match &group_p {
                Some(per_group) => per_group[self.cfg.group_of_unchecked(src) as usize],
                None => fixed_p,
            };
            let res = p >= 1.0
                || derive_bernoulli(&RandomKey::new(self.seed, pid as u64, s as u64, Purpose::Coin), p)?;
            if res {
                let r = derive_uniform_group(
                    &RandomKey::new(self.seed, pid as u64, s as u64, Purpose::Color),
                    g,
                )?;
                participants.push((pid, r));
            }
        }

        let mut max_occ = 0u32;

        // Slot 1: source -> random intermediate group.
        self.plan.clear();
        for &(pid, r) in &participants {
            let dest = self.perm[pid as usize];
            let header = Header {
                source: pid,
                dest,
                intermediate_group: r,
                temp_dest_group: self.cfg.delta_unchecked(dest),
            };
            self.plan.sends.push(SendPlan::unicast(pid, Message::copy(pid, header), r));
        }
        self.plan.listens.clear();
        self.plan.listens.extend_from_slice(&self.relay_listens);
        let plan = std::mem::take(&mut self.plan);
        let out1 = self.execute(&plan)?;
        self.plan = plan;
        let inter_list = out1.deliveries; // sorted by relay processor
        for &(q, _) in &inter_list {
            max_occ = max_occ.max(self.occupancy(q, false, true));
        }

        // Slot 2: intermediate group -> temporary destination group.
        self.plan.clear();
        for &(q, m) in &inter_list {
            self.plan.sends.push(SendPlan::unicast(q, m, m.header.temp_dest_group));
        }
        self.plan.listens.extend_from_slice(&self.relay_listens);
        let plan = std::mem::take(&mut self.plan);
        let out2 = self.execute(&plan)?;
        self.plan = plan;
        let temp_list = out2.deliveries;
        for &(t, _) in &temp_list {
            max_occ = max_occ.max(self.occupancy(t, false, true));
        }
        let fwd = inter_list; // relays now wait for the ack of what they forwarded

        let mut metrics = StepMetrics {
            step: s,
            participants: participants.len() as u32,
            slot1_survivors: fwd.len() as u32,
            deliveries: 0,
            max_left_degree: graph.max_left_degree(),
            max_right_degree: graph.max_right_degree(),
            lambda: graph.max_degree() as f64 / g as f64,
            conflicts_slot1: out1.conflicts.len() as u32,
            conflicts_slot2: out2.conflicts.len() as u32,
            conflicts_ack: 0,
            conflicts_delivery: 0,
            losses: 0,
            max_buffer_occupancy: 0,
        };

        let (delivered, deleted) = match self.protocol {
            StepProtocol::Paper5 => self.finish_paper5(
                &participants,
                &pending_list,
                fwd,
                temp_list,
                &mut metrics,
                &mut max_occ,
            )?,
            StepProtocol::Reversal6 => self.finish_reversal6(
                &participants,
                &pending_list,
                fwd,
                temp_list,
                &mut metrics,
                &mut max_occ,
            )?,
        };

        metrics.max_buffer_occupancy = max_occ;
        let cap = if self.immediate_exit { 2 } else { 3 };
        if max_occ > cap {
            return Err(Error::invariant(format!(
                "buffer occupancy {max_occ} exceeds {cap} in step {s}"
            )));
        }

        // Losses were reconciled by the protocol; check global conservation.
        if self.state.pending_count + self.state.delivered_count != self.cfg.n() {
            return Err(Error::invariant(format!(
                "pending {} + delivered {} != n {}",
                self.state.pending_count,
                self.state.delivered_count,
                self.cfg.n()
            )));
        }

        metrics.deliveries = delivered.len() as u32;
        let delete_iff_delivered = metrics.losses == 0;
        self.state.step = s;
        self.history.push(metrics);
        Ok(StepReport { metrics, delivered, deleted, delete_iff_delivered })
    }

    /// Slots 3-5 of the literal protocol: ack to intermediate, ack to
    /// source (which deletes), then final delivery.
    fn finish_paper5(
        &mut self,
        participants: &[(PacketId, GroupId)],
        pending_list: &[PendingPacket],
        fwd: Vec<(ProcessorId, Message)>,
        temp_list: Vec<(ProcessorId, Message)>,
        metrics: &mut StepMetrics,
        max_occ: &mut u32,
    ) -> Result<(Vec<PacketId>, Vec<PacketId>)> {
        // Slot 3: temporary group acks the intermediate relay.
        self.plan.clear();
        for &(t, m) in &temp_list {
            self.plan
                .sends
                .push(SendPlan::unicast(t, Message::ack(m.packet_id, m.header), m.header.intermediate_group));
        }
        for &(q, m) in &fwd {
            self.plan.listens.push(ListenPlan { who: q, from_group: m.header.temp_dest_group });
        }
        let plan = std::mem::take(&mut self.plan);
        let out3 = self.execute(&plan)?;
        self.plan = plan;
        metrics.conflicts_ack += out3.conflicts.len() as u32;
        let acks_at_relay = match_acks(&out3.deliveries, &fwd)?;

        // Slot 4: intermediate relay acks the source, which deletes.
        self.plan.clear();
        for &(q, ack) in &acks_at_relay {
            self.plan.sends.push(SendPlan::unicast(
                q,
                ack,
                self.cfg.group_of_unchecked(ack.header.source),
            ));
        }
        for &(pid, r) in participants {
            self.plan.listens.push(ListenPlan { who: pid, from_group: r });
        }
        let plan = std::mem::take(&mut self.plan);
        let out4 = self.execute(&plan)?;
        self.plan = plan;
        metrics.conflicts_ack += out4.conflicts.len() as u32;
        let mut deleted = Vec::with_capacity(out4.deliveries.len());
        for &(src, ack) in &out4.deliveries {
            if ack.header.source != src || !self.state.pending[src as usize] {
                return Err(Error::invariant(format!(
                    "slot-4 ack for packet {} reached processor {src}",
                    ack.packet_id
                )));
            }
            self.state.pending[src as usize] = false;
            self.state.pending_count -= 1;
            deleted.push(ack.packet_id);
        }

        // Slot 5: temporary group -> final destination.
        let delivered_msgs =
            self.delivery_slot(&temp_list, pending_list, metrics, max_occ)?;
        let delivered: Vec<PacketId> = delivered_msgs.iter().map(|&(_, m)| m.packet_id).collect();

        // Reconcile: a deletion without a delivery is a lost packet.
        let mut delivered_sorted = delivered.clone();
        delivered_sorted.sort_unstable();
        for &pid in &delivered_sorted {
            if deleted.binary_search(&pid).is_err() {
                return Err(Error::invariant(format!(
                    "packet {pid} delivered without its source having acked"
                )));
            }
        }
        let lost: Vec<PacketId> = deleted
            .iter()
            .copied()
            .filter(|pid| delivered_sorted.binary_search(pid).is_err())
            .collect();
        if !lost.is_empty() {
            metrics.losses = lost.len() as u32;
            match self.loss_policy {
                LossPolicy::Abort => {
                    return Err(Error::LossDetected { step: metrics.step, lost: lost.len() })
                }
                LossPolicy::RepairAndContinue => {
                    for pid in lost {
                        self.state.pending[pid as usize] = true;
                        self.state.pending_count += 1;
                    }
                }
            }
        }
        Ok((delivered, deleted))
    }

    /// Slots 3-6 of the path-reversal protocol: deliver first, then unwind
    /// the whole forward path with acks.
    fn finish_reversal6(
        &mut self,
        participants: &[(PacketId, GroupId)],
        pending_list: &[PendingPacket],
        fwd: Vec<(ProcessorId, Message)>,
        temp_list: Vec<(ProcessorId, Message)>,
        metrics: &mut StepMetrics,
        max_occ: &mut u32,
    ) -> Result<(Vec<PacketId>, Vec<PacketId>)> {
        // Slot 3: temporary group -> final destination.
        let delivered_msgs =
            self.delivery_slot(&temp_list, pending_list, metrics, max_occ)?;
        let delivered: Vec<PacketId> = delivered_msgs.iter().map(|&(_, m)| m.packet_id).collect();

        // Slot 4: destination acks the temporary relay, reusing the header
        // it just received so the ack can retrace the path.
        self.plan.clear();
        for &(dest, m) in &delivered_msgs {
            self.plan.sends.push(SendPlan::unicast(
                dest,
                Message::ack(m.packet_id, m.header),
                m.header.temp_dest_group,
            ));
        }
        for &(t, m) in &temp_list {
            self.plan
                .listens
                .push(ListenPlan { who: t, from_group: self.cfg.group_of_unchecked(m.header.dest) });
        }
        let plan = std::mem::take(&mut self.plan);
        let out4 = self.execute(&plan)?;
        self.plan = plan;
        metrics.conflicts_ack += out4.conflicts.len() as u32;
        let acks_at_temp = match_acks(&out4.deliveries, &temp_list)?;

        // Slot 5: temporary relay acks the intermediate relay.
        self.plan.clear();
        for &(t, ack) in &acks_at_temp {
            self.plan.sends.push(SendPlan::unicast(t, ack, ack.header.intermediate_group));
        }
        for &(q, m) in &fwd {
            self.plan.listens.push(ListenPlan { who: q, from_group: m.header.temp_dest_group });
        }
        let plan = std::mem::take(&mut self.plan);
        let out5 = self.execute(&plan)?;
        self.plan = plan;
        metrics.conflicts_ack += out5.conflicts.len() as u32;
        let acks_at_relay = match_acks(&out5.deliveries, &fwd)?;

        // Slot 6: intermediate relay acks the source, which deletes.
        self.plan.clear();
        for &(q, ack) in &acks_at_relay {
            self.plan.sends.push(SendPlan::unicast(
                q,
                ack,
                self.cfg.group_of_unchecked(ack.header.source),
            ));
        }
        for &(pid, r) in participants {
            self.plan.listens.push(ListenPlan { who: pid, from_group: r });
        }
        let plan = std::mem::take(&mut self.plan);
        let out6 = self.execute(&plan)?;
        self.plan = plan;
        metrics.conflicts_ack += out6.conflicts.len() as u32;
        let mut deleted = Vec::with_capacity(out6.deliveries.len());
        for &(src, ack) in &out6.deliveries {
            if ack.header.source != src || !self.state.pending[src as usize] {
                return Err(Error::invariant(format!(
                    "slot-6 ack for packet {} reached processor {src}",
                    ack.packet_id
                )));
            }
            self.state.pending[src as usize] = false;
            self.state.pending_count -= 1;
            deleted.push(ack.packet_id);
        }

        // Reversal must confirm exactly the delivered set.
        let mut a = delivered.clone();
        let mut b = deleted.clone();
        a.sort_unstable();
        b.sort_unstable();
        if a != b {
            return Err(Error::invariant(format!(
                "ack chain out of sync in step {}: {} delivered vs {} deleted",
                metrics.step,
                a.len(),
                b.len()
            )));
        }
        Ok((delivered, deleted))
    }

    /// The delivery slot shared by both protocols: temporary relays send to
    /// the destination group; any processor still waiting listens to
    /// `c(group(j), delta(j))`. Returns `(destination, message)` pairs for
    /// the packets that landed.
    fn delivery_slot(
        &mut self,
        temp_list: &[(ProcessorId, Message)],
        pending_list: &[PendingPacket],
        metrics: &mut StepMetrics,
        max_occ: &mut u32,
    ) -> Result<Vec<(ProcessorId, Message)>> {
        self.plan.clear();
        for &(t, m) in temp_list {
            self.plan.sends.push(SendPlan::unicast(t, m, self.cfg.group_of_unchecked(m.header.dest)));
        }
        for &(_, _, dest) in pending_list {
            self.plan
                .listens
                .push(ListenPlan { who: dest, from_group: self.cfg.delta_unchecked(dest) });
        }
        let plan = std::mem::take(&mut self.plan);
        let out = self.execute(&plan)?;
        self.plan = plan;
        metrics.conflicts_delivery += out.conflicts.len() as u32;

        let mut delivered = Vec::new();
        for &(j, m) in &out.deliveries {
            if m.header.dest != j {
                // A bystander sharing (group, delta) with the destination;
                // only possible when d > g.
                debug_assert!(self.cfg.d() > self.cfg.g());
                continue;
            }
            if self.state.received[j as usize] {
                return Err(Error::invariant(format!(
                    "duplicate delivery of packet {} to processor {j}",
                    m.packet_id
                )));
            }
            let holds_copy = temp_list.binary_search_by_key(&j, |e| e.0).is_ok();
            *max_occ = (*max_occ).max(self.occupancy(j, holds_copy, !self.immediate_exit));
            self.state.received[j as usize] = true;
            self.state.delivered_count += 1;
            delivered.push((j, m));
        }
        Ok(delivered)
    }

    /// Route until every packet is delivered.
    pub fn run(&mut self) -> Result<RunStats> {
        let mut stalled = 0u32;
        while !self.done() {
            if self.state.step >= 100_000 {
                return Err(Error::invariant("routing did not terminate within 100000 steps".into()));
            }
            let report = self.run_step()?;
            stalled = if report.delivered.is_empty() { stalled + 1 } else { 0 };
            if stalled > 1_000 {
                return Err(Error::invariant(format!(
                    "no delivery for {stalled} consecutive steps at step {}",
                    self.state.step
                )));
            }
        }
        Ok(self.stats())
    }

    pub fn stats(&self) -> RunStats {
        RunStats {
            iterations: self.state.step,
            slots: self.state.slots_run,
            seed: self.seed,
            per_step: self.history.clone(),
        }
    }
}

/// Join ack deliveries against the forwarding list by processor and check
/// that every ack matches the packet the processor forwarded.
fn match_acks(
    deliveries: &[(ProcessorId, Message)],
    forwarded: &[(ProcessorId, Message)],
) -> Result<Vec<(ProcessorId, Message)>> {
    let mut out = Vec::with_capacity(deliveries.len());
    for &(q, ack) in deliveries {
        let i = forwarded
            .binary_search_by_key(&q, |e| e.0)
            .map_err(|_| Error::invariant(format!("ack reached processor {q} which forwarded nothing")))?;
        let sent = forwarded[i].1;
        if sent.packet_id != ack.packet_id {
            return Err(Error::invariant(format!(
                "ack for packet {} reached the relay of packet {}",
                ack.packet_id, sent.packet_id
            )));
        }
        out.push((q, ack));
    }
    Ok(out)
}

/// Route a full permutation and return the run statistics.
pub fn route_randomized(
    perm: &[u32],
    cfg: &NetworkConfig,
    protocol: StepProtocol,
    schedule: ParticipationSchedule,
    seed: u64,
) -> Result<RunStats> {
    let mut router = RandomizedRouter::new(perm.to_vec(), *cfg, protocol, schedule, seed)?;
    let stats = router.run()?;
    if stats.slots != protocol.slots_per_step() * stats.iterations {
        return Err(Error::invariant("slot accounting drifted from iterations".into()));
    }
    Ok(stats)
}
