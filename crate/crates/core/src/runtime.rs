//! Tree-side contracts shared by generated code and the dynamic backend.
//!
//! A derivation tree is always reached through a view: [`NodeView`] for reading
//! and [`NodeViewMut`] for the two structural edits the engine performs
//! (regenerating a subtree and swapping two subtrees of the same type). Every
//! operation on trees is written once against [`Backend`], so the typed and
//! the dynamic representation can only differ in speed.

use std::fmt;
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::generation::{GenCtx, GenError};
use crate::graph::{GrammarGraph, NodeDef, NodeId};

/// A separately allocated child, used where a recursive type would otherwise
/// have infinite size.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Indirect<T>(Box<T>);

impl<T> Indirect<T> {
    #[inline]
    pub fn new(value: T) -> Self {
        Indirect(Box::new(value))
    }

    #[inline]
    pub fn get(&self) -> &T {
        &self.0
    }

    #[inline]
    pub fn get_mut(&mut self) -> &mut T {
        &mut self.0
    }

    pub fn into_inner(self) -> T {
        *self.0
    }
}

impl<T: fmt::Debug> fmt::Debug for Indirect<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Child indices from the root to a node.
///
/// An alternation's single child has the index of the chosen variant; a
/// repetition's children are numbered by position; heads and present options
/// have child 0.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodePath(Vec<usize>);

impl NodePath {
    pub fn root() -> Self {
        NodePath(Vec::new())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, index: usize) {
        self.0.push(index);
    }

    pub fn pop(&mut self) -> Option<usize> {
        self.0.pop()
    }

    /// This path extended by one step.
    pub fn child(&self, index: usize) -> NodePath {
        let mut p = self.clone();
        p.push(index);
        p
    }

    pub fn starts_with(&self, prefix: &NodePath) -> bool {
        self.0.starts_with(&prefix.0)
    }
}

impl From<Vec<usize>> for NodePath {
    fn from(v: Vec<usize>) -> Self {
        NodePath(v)
    }
}

impl fmt::Display for NodePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("/")?;
        for (i, step) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("/")?;
            }
            write!(f, "{step}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("invalid path: no child {index} at depth {depth}")]
pub struct PathError {
    pub index: usize,
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TreeError {
    #[error(transparent)]
    InvalidPath(#[from] PathError),
    #[error(transparent)]
    Generation(#[from] GenError),
}

/// The result of one visit: an error, an early exit, or the visitor state to
/// continue with.
pub type VisitResult<B, V, E> = Result<ControlFlow<B, V>, E>;

/// A visitor over views of type `T`. The visitor is moved through the
/// traversal; it decides itself whether to descend by calling
/// [`NodeView::visit_each`] on the node it is given.
pub trait Visitor<T>: Sized {
    type Break;
    type Error;

    fn visit(self, node: T, index: usize) -> VisitResult<Self::Break, Self, Self::Error>;
}

/// A read-only handle to a node of some tree.
pub trait NodeView<'t>: Copy + fmt::Debug {
    fn node_id(self) -> NodeId;

    /// The grammar entry this node was derived from.
    fn definition(self) -> NodeDef<'t>;

    /// Calls `visitor` on each present child, in child-index order.
    fn visit_each<V: Visitor<Self>>(self, visitor: V) -> VisitResult<V::Break, V, V::Error>;

    /// The child at `index`, if present.
    fn child(self, index: usize) -> Option<Self>;

    /// Present children with their indices.
    fn children(self) -> SmallVec<[(usize, Self); 4]> {
        struct Collect<T>(SmallVec<[(usize, T); 4]>);
        impl<T> Visitor<T> for Collect<T> {
            type Break = std::convert::Infallible;
            type Error = std::convert::Infallible;
            fn visit(
                mut self,
                node: T,
                index: usize,
            ) -> VisitResult<Self::Break, Self, Self::Error> {
                self.0.push((index, node));
                Ok(ControlFlow::Continue(self))
            }
        }
        match self.visit_each(Collect(SmallVec::new())) {
            Ok(ControlFlow::Continue(c)) => c.0,
            Ok(ControlFlow::Break(never)) | Err(never) => match never {},
        }
    }
}

/// An exclusive handle to a node of some tree.
pub trait NodeViewMut<'t>: Sized {
    fn node_id(&self) -> NodeId;

    /// Moves the handle to the child at `index`.
    fn into_child(self, index: usize) -> Option<Self>;

    /// Replaces the node with a freshly generated one of the same type.
    fn regenerate(&mut self, ctx: &mut GenCtx<'_>) -> Result<(), GenError>;

    /// Exchanges the two subtrees if they have the same type. Returns whether it did.
    fn swap(self, other: Self) -> bool;
}

/// Contract of generated node types.
pub trait Node: Clone + fmt::Debug + Send + Sync + 'static {
    type Ref<'a>: NodeView<'a>;
    type Mut<'a>: NodeViewMut<'a>;

    const ID: NodeId;
    const DEF: NodeDef<'static>;

    fn definition(&self) -> NodeDef<'static> {
        Self::DEF
    }

    fn opaque(&self) -> Self::Ref<'_>;

    fn opaque_mut(&mut self) -> Self::Mut<'_>;

    /// Checked downcast: `None` if the view holds another type.
    fn from_opaque(view: Self::Ref<'_>) -> Option<&Self>;

    fn from_opaque_mut(view: Self::Mut<'_>) -> Option<&mut Self>;

    fn visit_each<'a, V: Visitor<Self::Ref<'a>>>(
        &'a self,
        visitor: V,
    ) -> VisitResult<V::Break, V, V::Error> {
        self.opaque().visit_each(visitor)
    }

    /// Default construction through the choice protocol.
    fn generate(ctx: &mut GenCtx<'_>) -> Result<Self, GenError>;
}

/// Follows `path` from `root`.
pub fn resolve<'t, V: NodeView<'t>>(root: V, path: &NodePath) -> Result<V, PathError> {
    let mut node = root;
    for (depth, &index) in path.as_slice().iter().enumerate() {
        node = node.child(index).ok_or(PathError { index, depth })?;
    }
    Ok(node)
}

/// Follows `path` from `root`, keeping exclusive access.
pub fn resolve_mut<'t, M: NodeViewMut<'t>>(root: M, path: &NodePath) -> Result<M, PathError> {
    let mut node = root;
    for (depth, &index) in path.as_slice().iter().enumerate() {
        node = node.into_child(index).ok_or(PathError { index, depth })?;
    }
    Ok(node)
}

/// A tree representation: either the generated types of one grammar or the
/// dynamic interpreter over a grammar graph.
pub trait Backend: Send + Sync {
    type Tree: Clone + fmt::Debug + Send + Sync + 'static;
    type Ref<'t>: NodeView<'t>
    where
        Self: 't;
    type Mut<'t>: NodeViewMut<'t>
    where
        Self: 't;

    fn name(&self) -> &'static str;

    fn graph(&self) -> &GrammarGraph;

    fn generate_root(&self, ctx: &mut GenCtx<'_>) -> Result<Self::Tree, GenError>;

    fn root<'t>(&'t self, tree: &'t Self::Tree) -> Self::Ref<'t>;

    fn root_mut<'t>(&'t self, tree: &'t mut Self::Tree) -> Self::Mut<'t>;

    /// Replaces the subtree at `path` with a freshly generated one. Depth
    /// accounting starts at the path length.
    /// Rebuilds a tree from the answers of [`choice_script`](crate::visitors::choice_script).
    fn replay(&self, script: &[usize]) -> Result<Self::Tree, GenError> {
        let generators = crate::generation::GeneratorList::empty(self.graph());
        let mut sampler = crate::generation::ScriptedSampler::new(script.iter().copied());
        self.generate_root(&mut GenCtx::new(&mut sampler, &generators))
    }

    fn regenerate_at(
        &self,
        tree: &mut Self::Tree,
        path: &NodePath,
        ctx: &mut GenCtx<'_>,
    ) -> Result<(), TreeError> {
        let mut node = resolve_mut(self.root_mut(tree), path)?;
        ctx.reset_depth(path.len());
        node.regenerate(ctx)?;
        Ok(())
    }

    /// Exchanges the subtrees at `pa` in `a` and `pb` in `b`. Returns `false`
    /// (and changes nothing) if their types differ.
    fn swap_subtrees(
        &self,
        a: &mut Self::Tree,
        pa: &NodePath,
        b: &mut Self::Tree,
        pb: &NodePath,
    ) -> Result<bool, PathError> {
        let na = resolve_mut(self.root_mut(a), pa)?;
        let nb = resolve_mut(self.root_mut(b), pb)?;
        Ok(na.swap(nb))
    }
}
