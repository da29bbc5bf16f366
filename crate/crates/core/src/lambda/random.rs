use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::term::Term;

const NAMES: [&str; 4] = ["x", "y", "z", "u"];

fn binder_name(depth: usize) -> String {
    match NAMES.get(depth) {
        Some(name) => name.to_string(),
        None => format!("{}{}", NAMES[depth % NAMES.len()], depth / NAMES.len()),
    }
}

fn generate(rng: &mut ChaCha8Rng, nodes: usize, scope: &mut Vec<String>) -> Term {
    if nodes == 0 {
        let pick = rng.gen_range(0..scope.len());
        return Term::Var(scope[pick].clone());
    }
    if scope.is_empty() || rng.gen_bool(0.5) {
        let binder = binder_name(scope.len());
        scope.push(binder.clone());
        let body = generate(rng, nodes - 1, scope);
        scope.pop();
        return Term::abs(binder, body);
    }
    let left = rng.gen_range(0..nodes);
    let fun = generate(rng, left, scope);
    let arg = generate(rng, nodes - 1 - left, scope);
    Term::app(fun, arg)
}

/// A closed term with between 1 and `size` abstraction/application nodes
/// (variables are not counted), fully determined by `seed`.
pub fn random_closed_term(size: usize, seed: u64) -> Term {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes = rng.gen_range(1..=size.max(1));
    generate(&mut rng, nodes, &mut Vec::new())
}
