//! Annotation service: hands out qualification and main tasks, enforces
//! three distinct annotators per summary and stores judgments in SQLite.

pub mod api;
pub mod error;
pub mod store;

pub use api::{router, serve};
pub use error::{Result, ServiceError};
pub use store::{AnnotationTask, GoldItem, Phase, ServiceConfig, Store, SystemClock};
