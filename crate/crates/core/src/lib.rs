//! Natural-language chart generation over national-statistics open data.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`catalog`] pulls table metadata and typed rows from an OData v3
//!    endpoint and materializes them as `data/<id>.csv` plus a JSON sidecar.
//! 2. [`retrieval`] embeds table descriptions and ranks them against a
//!    question by cosine similarity (top-1 is used downstream).
//! 3. [`agent`] drives either a single zero-shot completion or the iterative
//!    tool-using loop, with prompts from [`prompting`], model access through
//!    [`llm`] and code execution through [`sandbox`].
//! 4. [`evaluation`] turns manual 22-item binary grade sheets into
//!    normalized visual/code/data scores and aggregate reports.

pub mod agent;
pub mod catalog;
pub mod evaluation;
pub mod llm;
pub mod prompting;
pub mod retrieval;
pub mod sandbox;
pub mod tasks;

mod util;

pub use agent::{AgentConfig, AgentRunner, Mode, RunRecord, RunStatus};
pub use catalog::{Cell, ColumnKind, ColumnSpec, DataTable, TableMetadata, TableRef};
pub use evaluation::{CategoryScores, GradeSheet, ScoreReport};
pub use llm::{Gateway, Message, ModelTurn, ToolCall, ToolSpec};
pub use prompting::{ModuleId, PromptBundle};
pub use retrieval::{EmbeddingProvider, EmbeddingVector, RankedMatch, RetrievalIndex};
pub use sandbox::{CodeExecutor, ExecutionRequest, ExecutionResult};
pub use tasks::{Difficulty, TaskSpec};
