//! Data plane: packets, links, bearer queues, TFT classification and the
//! RAN scheduler.

pub mod link;
pub mod packet;
pub mod queue;
pub mod ran;
pub mod tft;

pub use link::{Link, LinkSpec};
pub use packet::{Dscp, FlowId, Packet, PacketKind, Qci, UeId};
pub use queue::{BearerQueue, EnqueueOutcome, QueueStats};
pub use ran::{Allocation, RanConfig, RanScheduler, UeBearers};
pub use tft::{classify, Tft, TftTable};
