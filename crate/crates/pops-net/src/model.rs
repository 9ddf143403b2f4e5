//! The POPS(d,g) network model: groups, couplers, and the slot-synchronous
//! message engine.
//!
//! A POPS(d,g) machine has `n = d*g` processors split into `g` groups of `d`,
//! and one optical coupler `c(b,a)` for every ordered pair of groups. During
//! a slot every processor may broadcast one message to any subset of the `g`
//! couplers fed by its group, and may listen to one coupler that targets its
//! group. A coupler with exactly one sender delivers that message to all of
//! its listeners; a coupler with two or more senders delivers nothing.

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Flat processor index in `[0, n)`.
pub type ProcessorId = u32;
/// Group index in `[0, g)`.
pub type GroupId = u32;
/// Packet index; packet `i` originates at processor `i`.
pub type PacketId = u32;

/// The coupler `c(dest, src)`: senders are the processors of group `src`,
/// listeners the processors of group `dest`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CouplerId {
    pub dest: GroupId,
    pub src: GroupId,
}

impl CouplerId {
    pub fn new(dest: GroupId, src: GroupId) -> Self {
        CouplerId { dest, src }
    }
}

/// Network shape: `g` groups of `d` processors each.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct NetworkConfig {
    d: u32,
    g: u32,
}

impl NetworkConfig {
    pub fn new(d: u32, g: u32) -> Result<Self> {
        if d == 0 || g == 0 {
            return Err(Error::domain(format!(
                "POPS(d,g) requires d >= 1 and g >= 1, got d={d}, g={g}"
            )));
        }
        if (d as u64) * (g as u64) > u32::MAX as u64 {
            return Err(Error::domain(format!("network too large: d*g = {}", d as u64 * g as u64)));
        }
        Ok(NetworkConfig { d, g })
    }

    /// Processors per group.
    pub fn d(&self) -> u32 {
        self.d
    }

    /// Number of groups.
    pub fn g(&self) -> u32 {
        self.g
    }

    /// Total processors, `n = d*g`.
    pub fn n(&self) -> u32 {
        self.d * self.g
    }

    /// Total couplers, always `g^2`.
    pub fn coupler_count(&self) -> usize {
        self.g as usize * self.g as usize
    }

    /// The group of processor `i`: `floor(i/d)`.
    pub fn group_of(&self, i: ProcessorId) -> Result<GroupId> {
        self.check_processor(i)?;
        Ok(i / self.d)
    }

    /// The temporary-destination map `delta(x) = x mod g`.
    pub fn delta(&self, x: ProcessorId) -> Result<GroupId> {
        self.check_processor(x)?;
        Ok(x % self.g)
    }

    /// Processor with index `within` inside `group`.
    pub fn member(&self, group: GroupId, within: u32) -> ProcessorId {
        debug_assert!(group < self.g && within < self.d);
        group * self.d + within
    }

    /// Index of a processor within its own group.
    pub fn index_in_group(&self, i: ProcessorId) -> u32 {
        i % self.d
    }

    /// Dense index of a coupler: `dest * g + src`.
    pub fn coupler_index(&self, c: CouplerId) -> usize {
        debug_assert!(c.dest < self.g && c.src < self.g);
        c.dest as usize * self.g as usize + c.src as usize
    }

    pub fn check_processor(&self, i: ProcessorId) -> Result<()> {
        if i >= self.n() {
            return Err(Error::domain(format!(
                "processor id {i} out of range for POPS({},{}) with n={}",
                self.d,
                self.g,
                self.n()
            )));
        }
        Ok(())
    }

    pub(crate) fn group_of_unchecked(&self, i: ProcessorId) -> GroupId {
        i / self.d
    }

    pub(crate) fn delta_unchecked(&self, x: ProcessorId) -> GroupId {
        x % self.g
    }
}

/// Payload class of a message. Acks carry a header and nothing else.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum MessageKind {
    Copy,
    Ack,
}

/// Routing header carried by every message.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Header {
    pub source: ProcessorId,
    pub dest: ProcessorId,
    pub intermediate_group: GroupId,
    pub temp_dest_group: GroupId,
}

/// A message on the wire. The simulator is message-level: payload bytes are
/// never modelled, only the header and the packet identity.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Message {
    pub kind: MessageKind,
    pub packet_id: PacketId,
    pub header: Header,
}

impl Message {
    pub fn copy(packet_id: PacketId, header: Header) -> Self {
        Message { kind: MessageKind::Copy, packet_id, header }
    }

    pub fn ack(packet_id: PacketId, header: Header) -> Self {
        Message { kind: MessageKind::Ack, packet_id, header }
    }
}

/// One processor's send declaration for a slot: a single message, multicast
/// to one or more couplers of the sender's group.
#[derive(Clone, Debug)]
pub struct SendPlan {
    pub from: ProcessorId,
    pub message: Message,
    /// Destination groups; the couplers used are `c(b, group(from))`.
    pub to_groups: SmallVec<[GroupId; 2]>,
}

impl SendPlan {
    pub fn unicast(from: ProcessorId, message: Message, to_group: GroupId) -> Self {
        SendPlan { from, message, to_groups: SmallVec::from_slice(&[to_group]) }
    }

    /// Send the same message to every group (one-to-all in a single slot).
    pub fn broadcast(from: ProcessorId, message: Message, cfg: &NetworkConfig) -> Self {
        SendPlan { from, message, to_groups: (0..cfg.g()).collect() }
    }
}

/// One processor's listen declaration: the coupler `c(group(who), from_group)`.
#[derive(Clone, Copy, Debug)]
pub struct ListenPlan {
    pub who: ProcessorId,
    pub from_group: GroupId,
}

/// All send and listen declarations for one slot.
///
/// Invariants (checked by [`CouplerFabric::execute_slot`]): a processor
/// appears at most once in `sends` and at most once in `listens`.
#[derive(Clone, Debug, Default)]
pub struct SlotPlan {
    pub sends: Vec<SendPlan>,
    pub listens: Vec<ListenPlan>,
}

impl SlotPlan {
    pub fn new() -> Self {
        SlotPlan::default()
    }

    pub fn clear(&mut self) {
        self.sends.clear();
        self.listens.clear();
    }
}

/// State of one coupler after conflict resolution.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum CouplerStatus {
    Idle,
    Delivered(Message),
    /// Two or more senders drove the coupler; nothing was delivered.
    /// Carries the number of sending processors.
    Conflict(u32),
}

/// Conflict-resolved result of one slot. All vectors are sorted so the
/// outcome is identical regardless of plan assembly order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlotOutcome {
    /// `(listener, message)` for every listener whose coupler delivered.
    pub deliveries: Vec<(ProcessorId, Message)>,
    /// Couplers that had exactly one sender.
    pub delivered_couplers: Vec<(CouplerId, Message)>,
    /// Couplers that had two or more senders, with their sender counts.
    pub conflicts: Vec<(CouplerId, u32)>,
}

impl SlotOutcome {
    /// Number of couplers destroyed by conflicts this slot.
    pub fn conflict_count(&self) -> usize {
        self.conflicts.len()
    }

    pub fn coupler_status(&self, c: CouplerId) -> CouplerStatus {
        if let Ok(i) = self.conflicts.binary_search_by_key(&c, |e| e.0) {
            return CouplerStatus::Conflict(self.conflicts[i].1);
        }
        if let Ok(i) = self.delivered_couplers.binary_search_by_key(&c, |e| e.0) {
            return CouplerStatus::Delivered(self.delivered_couplers[i].1);
        }
        CouplerStatus::Idle
    }

    pub fn received_by(&self, p: ProcessorId) -> Option<Message> {
        self.deliveries
            .binary_search_by_key(&p, |e| e.0)
            .ok()
            .map(|i| self.deliveries[i].1)
    }
}

/// The coupler array plus scratch buffers, reused across slots.
///
/// The engine is stateless between slots: the outcome is a pure function of
/// the plan. Scratch space is epoch-stamped so nothing needs zeroing.
pub struct CouplerFabric {
    cfg: NetworkConfig,
    epoch: u64,
    // Per coupler.
    sender_count: Vec<u32>,
    first_message: Vec<Message>,
    coupler_epoch: Vec<u64>,
    touched: Vec<usize>,
    // Per processor, for contract checks.
    sender_epoch: Vec<u64>,
    listener_epoch: Vec<u64>,
}

const DUMMY_MESSAGE: Message = Message {
    kind: MessageKind::Ack,
    packet_id: 0,
    header: Header { source: 0, dest: 0, intermediate_group: 0, temp_dest_group: 0 },
};

impl CouplerFabric {
    pub fn new(cfg: NetworkConfig) -> Self {
        let couplers = cfg.coupler_count();
        let n = cfg.n() as usize;
        CouplerFabric {
            cfg,
            epoch: 0,
            sender_count: vec![0; couplers],
            first_message: vec![DUMMY_MESSAGE; couplers],
            coupler_epoch: vec![0; couplers],
            touched: Vec::new(),
            sender_epoch: vec![0; n],
            listener_epoch: vec![0; n],
        }
    }

    pub fn cfg(&self) -> NetworkConfig {
        self.cfg
    }

    /// Resolve one slot: tally senders per coupler, apply the conflict rule,
    /// then serve every listener from its coupler.
    pub fn execute_slot(&mut self, plan: &SlotPlan) -> Result<SlotOutcome> {
        let cfg = self.cfg;
        let g = cfg.g();
        self.epoch += 1;
        self.touched.clear();

        for send in &plan.sends {
            cfg.check_processor(send.from).map_err(|e| Error::PlanContract(e.to_string()))?;
            if self.sender_epoch[send.from as usize] == self.epoch {
                return Err(Error::PlanContract(format!(
                    "processor {} declared more than one send in a slot",
                    send.from
                )));
            }
            self.sender_epoch[send.from as usize] = self.epoch;
            let src = cfg.group_of_unchecked(send.from);
            for &dest in &send.to_groups {
                if dest >= g {
                    return Err(Error::PlanContract(format!(
                        "send from {} targets group {dest} outside [0,{g})",
                        send.from
                    )));
                }
                let idx = cfg.coupler_index(CouplerId::new(dest, src));
                if self.coupler_epoch[idx] != self.epoch {
                    self.coupler_epoch[idx] = self.epoch;
                    self.sender_count[idx] = 1;
                    self.first_message[idx] = send.message;
                    self.touched.push(idx);
                } else {
                    self.sender_count[idx] += 1;
                }
            }
        }

        let mut delivered_couplers = Vec::new();
        let mut conflicts = Vec::new();
        self.touched.sort_unstable();
        for &idx in &self.touched {
            let c = CouplerId::new(idx as u32 / g, idx as u32 % g);
            match self.sender_count[idx] {
                1 => delivered_couplers.push((c, self.first_message[idx])),
                k => conflicts.push((c, k)),
            }
        }

        let mut deliveries = Vec::new();
        for listen in &plan.listens {
            cfg.check_processor(listen.who).map_err(|e| Error::PlanContract(e.to_string()))?;
            if listen.from_group >= g {
                return Err(Error::PlanContract(format!(
                    "listener {} names source group {} outside [0,{g})",
                    listen.who, listen.from_group
                )));
            }
            if self.listener_epoch[listen.who as usize] == self.epoch {
                return Err(Error::PlanContract(format!(
                    "processor {} declared more than one listen in a slot",
                    listen.who
                )));
            }
            self.listener_epoch[listen.who as usize] = self.epoch;
            let c = CouplerId::new(cfg.group_of_unchecked(listen.who), listen.from_group);
            let idx = cfg.coupler_index(c);
            if self.coupler_epoch[idx] == self.epoch && self.sender_count[idx] == 1 {
                deliveries.push((listen.who, self.first_message[idx]));
            }
        }
        deliveries.sort_unstable_by_key(|e| e.0);

        Ok(SlotOutcome { deliveries, delivered_couplers, conflicts })
    }
}

/// One-shot form of [`CouplerFabric::execute_slot`] for callers that do not
/// hold a fabric.
pub fn execute_slot(plan: &SlotPlan, cfg: &NetworkConfig) -> Result<SlotOutcome> {
    CouplerFabric::new(*cfg).execute_slot(plan)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(d: u32, g: u32) -> NetworkConfig {
        NetworkConfig::new(d, g).unwrap()
    }

    fn msg(id: PacketId) -> Message {
        Message::copy(
            id,
            Header { source: id, dest: 0, intermediate_group: 0, temp_dest_group: 0 },
        )
    }

    #[test]
    fn group_of_matches_floor_division() {
        // Packet p_5 of a POPS(3,3) lives in group 1.
        assert_eq!(cfg(3, 3).group_of(5).unwrap(), 1);
        assert_eq!(cfg(3, 3).group_of(0).unwrap(), 0);
        assert_eq!(cfg(7, 2).group_of(0).unwrap(), 0);
        assert_eq!(cfg(4, 4).group_of(15).unwrap(), 3);
    }

    #[test]
    fn group_of_rejects_out_of_range() {
        assert!(cfg(3, 3).group_of(9).is_err());
    }

    #[test]
    fn delta_is_mod_g() {
        assert_eq!(cfg(3, 3).delta(1).unwrap(), 1);
        assert_eq!(cfg(4, 4).delta(8).unwrap(), 0);
        assert_eq!(cfg(4, 4).delta(0).unwrap(), 0);
        assert_eq!(cfg(2, 8).delta(0).unwrap(), 0);
        assert!(cfg(4, 4).delta(16).is_err());
    }

    #[test]
    fn config_rejects_degenerate_shapes() {
        assert!(NetworkConfig::new(0, 3).is_err());
        assert!(NetworkConfig::new(3, 0).is_err());
        assert_eq!(cfg(4, 4).coupler_count(), 16);
    }

    #[test]
    fn single_sender_delivers_to_listener() {
        let cfg = cfg(3, 3);
        let m = msg(4);
        let plan = SlotPlan {
            sends: vec![SendPlan::unicast(4, m, 2)],
            listens: vec![ListenPlan { who: 7, from_group: 1 }],
        };
        let out = execute_slot(&plan, &cfg).unwrap();
        assert_eq!(out.received_by(7), Some(m));
        assert_eq!(out.coupler_status(CouplerId::new(2, 1)), CouplerStatus::Delivered(m));
        assert_eq!(out.conflict_count(), 0);
    }

    #[test]
    fn two_senders_on_one_coupler_destroy_both() {
        let cfg = cfg(3, 3);
        let plan = SlotPlan {
            sends: vec![SendPlan::unicast(3, msg(3), 2), SendPlan::unicast(4, msg(4), 2)],
            listens: vec![ListenPlan { who: 6, from_group: 1 }],
        };
        let out = execute_slot(&plan, &cfg).unwrap();
        assert_eq!(out.received_by(6), None);
        assert_eq!(out.coupler_status(CouplerId::new(2, 1)), CouplerStatus::Conflict(2));
    }

    #[test]
    fn one_to_all_in_a_single_slot() {
        let cfg = cfg(3, 3);
        let m = msg(1);
        let mut plan = SlotPlan::new();
        plan.sends.push(SendPlan::broadcast(1, m, &cfg));
        // One listener per destination group.
        for b in 0..cfg.g() {
            plan.listens.push(ListenPlan { who: cfg.member(b, 1), from_group: 0 });
        }
        let out = execute_slot(&plan, &cfg).unwrap();
        assert_eq!(out.deliveries.len(), cfg.g() as usize);
        for b in 0..cfg.g() {
            assert_eq!(out.received_by(cfg.member(b, 1)), Some(m));
        }
    }

    #[test]
    fn all_listeners_of_a_delivered_coupler_receive() {
        let cfg = cfg(3, 3);
        let m = msg(0);
        let plan = SlotPlan {
            sends: vec![SendPlan::unicast(0, m, 1)],
            listens: vec![
                ListenPlan { who: 3, from_group: 0 },
                ListenPlan { who: 4, from_group: 0 },
                ListenPlan { who: 5, from_group: 0 },
            ],
        };
        let out = execute_slot(&plan, &cfg).unwrap();
        assert_eq!(out.deliveries.len(), 3);
    }

    #[test]
    fn duplicate_sender_is_a_contract_error() {
        let cfg = cfg(3, 3);
        let plan = SlotPlan {
            sends: vec![SendPlan::unicast(0, msg(0), 1), SendPlan::unicast(0, msg(0), 2)],
            listens: vec![],
        };
        assert!(matches!(execute_slot(&plan, &cfg), Err(Error::PlanContract(_))));
    }

    #[test]
    fn duplicate_listener_is_a_contract_error() {
        let cfg = cfg(3, 3);
        let plan = SlotPlan {
            sends: vec![],
            listens: vec![
                ListenPlan { who: 0, from_group: 1 },
                ListenPlan { who: 0, from_group: 2 },
            ],
        };
        assert!(matches!(execute_slot(&plan, &cfg), Err(Error::PlanContract(_))));
    }

    #[test]
    fn idle_couplers_report_idle() {
        let cfg = cfg(2, 2);
        let out = execute_slot(&SlotPlan::new(), &cfg).unwrap();
        assert_eq!(out.coupler_status(CouplerId::new(0, 0)), CouplerStatus::Idle);
        assert!(out.deliveries.is_empty());
    }
}
