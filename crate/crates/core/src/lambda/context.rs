use std::fmt;

use super::term::Term;

/// One layer of a context, from the root towards the hole.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Frame {
    /// `\x.[ ]`
    Abs(String),
    /// `M [ ]`: the hole is the argument.
    AppArg(Term),
    /// `[ ] N`: the hole is the function.
    AppFun(Term),
}

/// A term with exactly one hole. The empty frame list is the bare hole `[ ]`.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct Context {
    frames: Vec<Frame>,
}

impl Context {
    pub fn hole() -> Context {
        Context::default()
    }

    pub fn from_frames(frames: Vec<Frame>) -> Context {
        Context { frames }
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn is_hole(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Fills the hole with `m`. Binders of the context are NOT renamed, so free
/// variables of `m` may be captured by them.
pub fn plug(ctx: &Context, m: Term) -> Term {
    ctx.frames.iter().rev().fold(m, |inner, frame| match frame {
        Frame::Abs(binder) => Term::abs(binder.clone(), inner),
        Frame::AppArg(fun) => Term::app(fun.clone(), inner),
        Frame::AppFun(arg) => Term::app(inner, arg.clone()),
    })
}

/// `C[\y.[ ]]`
pub fn ctx_under_lambda(ctx: &Context, binder: &str) -> Context {
    let mut frames = ctx.frames.clone();
    frames.push(Frame::Abs(binder.to_string()));
    Context { frames }
}

/// `M [ ]`
pub fn ctx_apply_left(head: Term) -> Context {
    Context {
        frames: vec![Frame::AppArg(head)],
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // The placeholder is not a valid identifier, so it cannot clash.
        write!(f, "{}", plug(self, Term::Var("[]".to_string())))
    }
}
