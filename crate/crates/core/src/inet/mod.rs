//! A generic interaction-net runtime: agent kinds and rules are registered at
//! run time, and a [`Net`] reduces a [`Configuration`] under them.

mod net;
mod registry;
mod term;

pub use net::{EngineError, Net, Stats, Status, StepEvent, Strategy, Validator};
pub use registry::{
    Bindings, Fresh, Guard, Head, KindDescriptor, KindId, Match, PayloadSort, Registry,
    RegistryError, Relation, Rule,
};
pub use term::{render_term, Agent, AgentTerm, Configuration, Equation, Name, Payload, Violation};
