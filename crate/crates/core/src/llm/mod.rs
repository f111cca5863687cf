//! Zero-shot labeling through a chat-completions model.

mod client;
mod labeler;
mod parse;
mod prompt;

pub use client::{
    ChatBackend, ChatMessage, ChatRequest, ConfigError, HttpChatBackend, PromptConfig, RetryPolicy, TransportError,
    API_KEY_ENV, BASE_URL_ENV,
};
pub use labeler::{label_corpus, CompletionOutcome, LabelingRun, RawCompletion, TRANSPORT_FAILURE};
pub use parse::{parse_salvage, parse_strict, serialize_completion, CompletionParser, SalvageError, StrictError};
pub use prompt::{build_prompt, system_prompt, user_prompt, Prompt, PromptError, CANONICAL_DISEASE_LIST};
