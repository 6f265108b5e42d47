//! System-level simulator for UE-centric cell-free massive MIMO in urban
//! layouts.
//!
//! The pipeline runs bottom-up through the modules:
//! [`geom`] (building maps) → [`placement`] (AP sites, UE lattice) →
//! [`channel`] (large-scale gains under interchangeable backends) →
//! [`cfnet`] (CPU clusters and serving sets) → [`sephy`] (downlink SE) →
//! [`sim`] (Monte-Carlo campaigns and exports).

pub mod cfnet;
pub mod channel;
pub mod geom;
pub mod placement;
pub mod rng;
pub mod sephy;
pub mod sim;
