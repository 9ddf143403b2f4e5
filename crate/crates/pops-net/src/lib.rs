//! Message-level simulation of POPS(d,g) optical interconnection networks,
//! with online and offline permutation routers.
//!
//! A POPS(d,g) machine couples `g` groups of `d` processors through `g^2`
//! optical passive star couplers; a coupler delivers in a slot exactly when
//! it has a single sender. This crate models the network slot by slot,
//! message by message, and builds on that engine:
//!
//! * [`model`] — topology, addressing, and the conflict-resolving slot
//!   engine;
//! * [`randomized`] — the online randomized router: random intermediate
//!   group, temporary destination group `dest mod g`, ack chain, plus the
//!   participation schedule for d > g;
//! * [`offline`] — deterministic routing in `2*ceil(d/g)` slots via
//!   bipartite edge coloring;
//! * [`sorting`] — Batcher odd-even merge networks, comparator-stage
//!   simulation, and deterministic routing by sorting;
//! * [`analysis`] — conflict graphs, degree schedules, the deterministic
//!   baseline slot count, and run statistics;
//! * [`rng`] — keyed, counter-based randomness so every run is a pure
//!   function of its seed;
//! * [`harness`] — permutation generators, seeded experiment blocks,
//!   verification suites, and CSV/JSON reports.
//!
//! ```
//! use pops_net::model::NetworkConfig;
//! use pops_net::randomized::{route_randomized, ParticipationSchedule, StepProtocol};
//!
//! let cfg = NetworkConfig::new(8, 8)?;
//! let perm: Vec<u32> = (0..64).rev().collect();
//! let stats = route_randomized(
//!     &perm,
//!     &cfg,
//!     StepProtocol::Paper5,
//!     ParticipationSchedule::fixed(),
//!     42,
//! )?;
//! assert_eq!(stats.slots, 5 * stats.iterations);
//! # Ok::<(), pops_net::Error>(())
//! ```

pub mod analysis;
pub mod error;
pub mod harness;
pub mod model;
pub mod offline;
pub mod randomized;
pub mod rng;
pub mod sorting;

pub use error::{Error, Result};
