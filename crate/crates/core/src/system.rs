//! The complete rule set and the end-to-end reduction pipeline.

use std::sync::Arc;

use serde::Serialize;

use crate::inet::{
    Configuration, EngineError, Net, Registry, RegistryError, Stats, Status, StepEvent, Strategy,
};
use crate::lambda::Term;
use crate::optimal::{install_core_rules, CoreOptions, CoreSignature, Sharing};
use crate::readback::{
    extract_result, initial_config, install_readback_rules, reserved_binders, ReadOptions,
    ReadSignature,
};
use crate::token::{check_token_chains, install_wait_rules, TokenOptions, WaitSignature};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleOptions {
    pub core: CoreOptions,
    pub token: TokenOptions,
    pub read: ReadOptions,
    pub sharing: Sharing,
    /// Rule pairs removed after installation, by kind name.
    pub disabled: Vec<(String, String)>,
}

impl Default for RuleOptions {
    /// The published rules plus the completions the corpus needs. `Eval`
    /// crosses controls, `Read` crosses fans and fans duplicate atoms.
    fn default() -> Self {
        RuleOptions {
            core: CoreOptions::default(),
            token: TokenOptions {
                eval_passes_controls: true,
            },
            read: ReadOptions {
                read_passes_fans: true,
            },
            sharing: Sharing::default(),
            disabled: Vec::new(),
        }
    }
}

impl RuleOptions {
    /// Only the published rules, without completions.
    pub fn paper_only() -> RuleOptions {
        RuleOptions {
            core: CoreOptions { fan_atom: false },
            token: TokenOptions::default(),
            read: ReadOptions::default(),
            sharing: Sharing::default(),
            disabled: Vec::new(),
        }
    }
}

/// Registry with every signature and rule installed.
#[derive(Clone)]
pub struct System {
    pub registry: Arc<Registry>,
    pub core: CoreSignature,
    pub wait: WaitSignature,
    pub read: ReadSignature,
    pub sharing: Sharing,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Normal { term: String },
    Fuel,
    Stuck { left: String, right: String },
    NotNormalForm { dump: String },
}

#[derive(Clone, Debug)]
pub struct Reduction {
    pub outcome: Outcome,
    /// The read-back term when the outcome is `Normal`.
    pub term: Option<Term>,
    pub stats: Stats,
    /// Final configuration, when requested.
    pub config: Option<Configuration>,
}

#[derive(Clone, Copy, Debug)]
pub struct RunOptions {
    pub strategy: Strategy,
    pub fuel: u64,
    pub debug_checks: bool,
    pub keep_config: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            strategy: Strategy::Fifo,
            fuel: 1_000_000,
            debug_checks: false,
            keep_config: false,
        }
    }
}

impl System {
    pub fn new(options: &RuleOptions) -> Result<System, RegistryError> {
        let mut registry = Registry::new();
        let core = CoreSignature::register(&mut registry)?;
        let wait = WaitSignature::register(&mut registry)?;
        let read = ReadSignature::register(&mut registry)?;
        let erasable: Vec<_> = registry
            .kinds()
            .map(|(id, _)| id)
            .filter(|&k| k != wait.decide && k != wait.amb)
            .collect();
        install_core_rules(&mut registry, &core, options.core, &erasable)?;
        install_wait_rules(&mut registry, &core, &wait, options.token)?;
        install_readback_rules(&mut registry, &core, &wait, &read, options.read)?;
        for (a, b) in &options.disabled {
            let (a, b) = (registry.kind_named(a)?, registry.kind_named(b)?);
            registry.remove_rules(a, b);
        }
        Ok(System {
            registry: Arc::new(registry),
            core,
            wait,
            read,
            sharing: options.sharing,
        })
    }

    pub fn standard() -> System {
        System::new(&RuleOptions::default()).expect("standard rules are consistent")
    }

    pub fn initial_config(&self, term: &Term) -> Configuration {
        initial_config(term, &self.core, &self.wait, &self.read, self.sharing)
    }

    pub fn load(&self, term: &Term) -> Result<Net, EngineError> {
        let mut net = Net::load(Arc::clone(&self.registry), &self.initial_config(term))?;
        net.set_reserved_binders(reserved_binders(term));
        let (core, wait) = (self.core, self.wait);
        net.set_validator(Arc::new(move |config| {
            check_token_chains(config, &core, &wait)
        }));
        Ok(net)
    }

    pub fn reduce(&self, term: &Term, options: RunOptions) -> Result<Reduction, EngineError> {
        self.reduce_observed(term, options, &mut |_| {})
    }

    pub fn reduce_observed(
        &self,
        term: &Term,
        options: RunOptions,
        observer: &mut dyn FnMut(&StepEvent<'_>),
    ) -> Result<Reduction, EngineError> {
        let mut net = self.load(term)?;
        net.set_debug(options.debug_checks);
        let status = net.run(options.strategy, options.fuel, observer)?;
        // Reading a large unfinished net back is costly; skip it unless asked.
        let config = (options.keep_config || status == Status::Done).then(|| net.to_config());
        let (outcome, term) = match status {
            Status::FuelExhausted => (Outcome::Fuel, None),
            Status::Stuck { left, right } => (Outcome::Stuck { left, right }, None),
            Status::Done => {
                match extract_result(config.as_ref().expect("read back"), &self.registry) {
                    Ok(term) => (
                        Outcome::Normal {
                            term: term.to_string(),
                        },
                        Some(term),
                    ),
                    Err(err) => (
                        Outcome::NotNormalForm {
                            dump: err.to_string(),
                        },
                        None,
                    ),
                }
            }
        };
        Ok(Reduction {
            outcome,
            term,
            stats: net.stats(),
            config: config.filter(|_| options.keep_config),
        })
    }
}
