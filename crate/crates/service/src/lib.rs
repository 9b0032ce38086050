//! File-backed HTTP service for paired-comparison listening sessions.
//!
//! Responses are appended to one JSON-lines log per participant and synced
//! to disk before the request is acknowledged. Participant state is never
//! stored separately; it is replayed from the log.

pub mod api;
pub mod error;
pub mod state;
pub mod store;

pub use api::{router, serve, AppState, Progress, ResponseBody, SessionView};
pub use error::{Result, StoreError};
pub use state::{Accepted, ParticipantState, Stage};
pub use store::{AudioIndex, Enrollment, ExperimentDesign, ExperimentStore};
