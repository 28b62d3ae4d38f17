//! Text adventure engine where player input is interpreted by a language
//! model gateway, plus the narrative-graph pipeline that turns game logs into
//! strategy graphs and finds player strategies the designers did not plan.

pub mod action;
pub mod gateway;
pub mod narrative;
pub mod npc;
pub mod session;
pub mod world;

pub use action::{ActionEngine, ActionResult, FailureMessages, Verb, VerbObjectCommand};
pub use gateway::{Gateway, Provider, ProviderError, RuleBasedProvider};
pub use session::{GameRuntime, LogRecord, PlayerMetadata, Session, SessionStatus};
pub use world::{dejaboom, load_world_spec, StateLabel, WorldSpec, WorldState};
