//! Lambda terms, contexts, and a reference normal-order normalizer.
//!
//! Everything in this module is independent of the interaction-net
//! machinery so the normalizer can serve as an oracle for it.

mod context;
mod normalize;
mod parse;
mod random;
mod term;

pub use context::{ctx_apply_left, ctx_under_lambda, plug, Context, Frame};
pub use normalize::{normalize, reduce_step, NormalizeOutcome};
pub use parse::{parse, ParseError};
pub use random::random_closed_term;
pub use term::{alpha_eq, free_vars, fresh_name, is_identifier, substitute, Term};
