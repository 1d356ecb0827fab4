//! Synchronous round engine.
//!
//! One round: every scheduled node sees the messages delivered to it this
//! round and queues at most one outgoing message per incident edge;
//! deliveries happen at the end of the round. Nodes within a round may be
//! processed in any order (the engine uses vertex order), rounds are
//! barrier-synchronized.
//!
//! Scheduling is inbox-driven: a node that reports `Idle` is stepped again
//! only when a message arrives for it, so a run costs time proportional to
//! traffic, not `rounds * n`.

use crate::config::DEFAULT_KAPPA_BITS;
use crate::graph::{EdgeId, VertexId, WeightedGraph};

/// What a node wants from the scheduler after a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    /// Step me next round even without messages.
    Active,
    /// Only step me when a message arrives.
    Idle,
    /// Never step me again.
    Halted,
}

/// One message queued on an incident-edge slot.
#[derive(Debug, Clone)]
pub struct Send<M> {
    pub slot: usize,
    pub msg: M,
    pub bits: u32,
}

/// Outgoing buffer handed to the node each step.
#[derive(Debug)]
pub struct Outbox<M> {
    sends: Vec<Send<M>>,
}

impl<M> Outbox<M> {
    pub fn send(&mut self, slot: usize, msg: M, bits: u32) {
        self.sends.push(Send { slot, msg, bits });
    }
}

/// A per-node program. The handler must be deterministic given local state,
/// the private randomness it owns, and its inputs; it can never read another
/// node's state.
pub trait NodeProgram {
    type Msg: Clone;

    /// `inbox` holds (incident-edge slot, message) pairs delivered this
    /// round, in deterministic slot order.
    fn step(
        &mut self,
        round: u64,
        inbox: &[(usize, Self::Msg)],
        out: &mut Outbox<Self::Msg>,
    ) -> Status;
}

/// A message that exceeded the bit budget.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub round: u64,
    pub edge: EdgeId,
    pub bits: u32,
}

/// Round and traffic accounting for one run.
#[derive(Debug, Clone, Default)]
pub struct RunStats {
    /// Last round in which any message was sent (0 if none).
    pub rounds: u64,
    pub max_message_bits: u32,
    /// Cumulative message count per edge (both directions).
    pub edge_messages: Vec<u64>,
    /// Cumulative bits per edge.
    pub edge_bits: Vec<u64>,
    pub total_messages: u64,
    pub bit_budget: u32,
    pub violations: Vec<Violation>,
    pub timed_out: bool,
}

impl RunStats {
    /// Summary triple (rounds, max bits, max per-edge load).
    pub fn measure(&self) -> (u64, u32, u64) {
        (
            self.rounds,
            self.max_message_bits,
            self.edge_messages.iter().copied().max().unwrap_or(0),
        )
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RunBudget {
    pub max_rounds: u64,
    pub bit_budget: u32,
}

impl RunBudget {
    /// Default budget: `ceil(kappa * log2 n)` bits.
    pub fn for_graph(g: &WeightedGraph, max_rounds: u64) -> RunBudget {
        RunBudget {
            max_rounds,
            bit_budget: bit_budget(g.n(), DEFAULT_KAPPA_BITS),
        }
    }
}

pub fn bit_budget(n: usize, kappa: u32) -> u32 {
    (kappa as f64 * (n.max(2) as f64).log2()).ceil() as u32
}

pub struct RunOutcome<P> {
    pub programs: Vec<P>,
    pub stats: RunStats,
}

/// Execute one program per vertex until quiescence (no active node, no
/// queued traffic, or all halted) or until the round budget is exhausted.
pub fn run<P: NodeProgram>(
    g: &WeightedGraph,
    mut programs: Vec<P>,
    budget: RunBudget,
) -> RunOutcome<P> {
    assert_eq!(programs.len(), g.n(), "one program per vertex");
    // slot of edge e at its endpoints, precomputed once
    let mut slot_of = vec![(0usize, 0usize); g.m()];
    for v in g.vertices() {
        for (slot, &e) in g.incident(v).iter().enumerate() {
            if g.edge(e).u == v {
                slot_of[e as usize].0 = slot;
            } else {
                slot_of[e as usize].1 = slot;
            }
        }
    }

    let mut stats = RunStats {
        edge_messages: vec![0; g.m()],
        edge_bits: vec![0; g.m()],
        bit_budget: budget.bit_budget,
        ..RunStats::default()
    };

    let mut status = vec![Status::Active; g.n()];
    let mut inboxes: Vec<Vec<(usize, P::Msg)>> = vec![Vec::new(); g.n()];
    let mut has_mail: Vec<VertexId> = Vec::new();
    let empty: Vec<(usize, P::Msg)> = Vec::new();

    let mut round: u64 = 0;
    loop {
        round += 1;
        if round > budget.max_rounds {
            stats.timed_out = true;
            break;
        }

        // schedule: active nodes plus mail recipients, each stepped once
        let mut scheduled: Vec<VertexId> = g
            .vertices()
            .filter(|&v| status[v as usize] == Status::Active)
            .collect();
        scheduled.extend(has_mail.iter().copied().filter(|&v| {
            status[v as usize] == Status::Idle
        }));
        scheduled.sort_unstable();
        scheduled.dedup();
        has_mail.clear();

        if scheduled.is_empty() {
            break;
        }

        let mut deliveries: Vec<(VertexId, usize, P::Msg)> = Vec::new();
        let mut sent_this_round = false;
        for &v in &scheduled {
            let inbox = std::mem::take(&mut inboxes[v as usize]);
            let inbox_ref = if inbox.is_empty() { &empty } else { &inbox };
            let mut out = Outbox { sends: Vec::new() };
            let st = programs[v as usize].step(round, inbox_ref, &mut out);
            status[v as usize] = st;
            for send in out.sends {
                let e = g.incident(v)[send.slot];
                let target = g.edge(e).other(v);
                let target_slot = if g.edge(e).u == target {
                    slot_of[e as usize].0
                } else {
                    slot_of[e as usize].1
                };
                stats.edge_messages[e as usize] += 1;
                stats.edge_bits[e as usize] += send.bits as u64;
                stats.total_messages += 1;
                stats.max_message_bits = stats.max_message_bits.max(send.bits);
                if send.bits > budget.bit_budget {
                    stats.violations.push(Violation {
                        round,
                        edge: e,
                        bits: send.bits,
                    });
                }
                deliveries.push((target, target_slot, send.msg));
                sent_this_round = true;
            }
        }

        if sent_this_round {
            stats.rounds = round;
        }

        for (target, slot, msg) in deliveries {
            if status[target as usize] != Status::Halted {
                inboxes[target as usize].push((slot, msg));
                has_mail.push(target);
            }
        }
        for &v in &has_mail {
            inboxes[v as usize].sort_by_key(|(slot, _)| *slot);
        }
    }

    RunOutcome { programs, stats }
}
