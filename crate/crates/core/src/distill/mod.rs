//! QA dataset distillation from abstracts.
//!
//! Two chat prompts run per abstract: one extracts numbered single-sentence
//! findings, the other writes a question for each finding that survives the
//! keyword filter. The completion service sits behind [`CompletionClient`].

pub mod client;
pub mod cost;
pub mod filter;
pub mod parse;
pub mod pipeline;
pub mod prompts;

pub use client::{CompletionClient, MockClient, ReplayClient, Usage};
pub use cost::{compute_cost, CostReport, StageUsage};
pub use filter::{filter_finding, FilterVerdict, KeywordFilter, MatchMode};
pub use parse::{parse_findings, parse_question, QuestionOutcome};
pub use pipeline::{distill_abstract, distill_corpus, DistillConfig, Distilled, TraceEvent};
pub use prompts::{render_finding_prompt, render_question_prompt, PromptMessages};
