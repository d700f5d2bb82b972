//! Service layer for `timecrit`: model and scenario files, per-patient
//! sessions with timestamped finding logs, assessment assembly, plan
//! evaluation, session persistence, the HTTP API and the command line.

pub mod assessment;
pub mod cli;
pub mod error;
pub mod http;
pub mod model;
pub mod scenario;
pub mod session;
pub mod store;

pub use assessment::{Assessment, AssessmentRequest, DEFAULT_GRID};
pub use error::{Detail, ErrorCode, ServiceError};
pub use model::{ModelBundle, ModelFile};
pub use session::{Finding, Session};
pub use store::{NewSession, Store};
