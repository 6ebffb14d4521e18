//! Every generative step goes through one [`CompletionPort`]. Tests and
//! offline runs use [`MockPort`] or a [`ScriptedPort`] replay; a live model
//! sits behind [`HttpPort`].

pub mod article;
pub mod assist;
pub mod json;
pub mod port;
pub mod prompts;
pub mod synthesis;

pub use article::BaseArticle;
pub use assist::{articles_from_docs, expand_with_port, filter_useful, gen_queries, AssistError, ExpandByIdError, LlmFilter, LlmQueries};
pub use port::{CompletionParams, CompletionPort, HttpConfig, HttpPort, LlmChoice, MockPort, PortError, ScriptedPort};
pub use synthesis::{synthesize_bundle, AttemptOutcome, Synthesis, SynthesisAttempt, SynthesisError, SynthesisOptions};
