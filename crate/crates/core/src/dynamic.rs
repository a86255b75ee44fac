//! One uniform node type that interprets the grammar graph at run time.

use std::ops::ControlFlow;

use crate::generation::{GenCtx, GenError};
use crate::graph::{GrammarGraph, NodeDef, NodeId};
use crate::runtime::{Backend, NodeView, NodeViewMut, VisitResult, Visitor};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DynNode {
    pub id: NodeId,
    pub payload: Payload,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Payload {
    VariantChoice(usize, Box<DynNode>),
    ConcatChildren(Vec<DynNode>),
    RepChildren(Vec<DynNode>),
    OptionalChild(Option<Box<DynNode>>),
    TerminalLeaf,
    RefChild(Box<DynNode>),
}

/// Generates a dynamic tree for `id`, making exactly the choices the
/// generated code for the same grammar makes.
pub fn dyn_generate(
    graph: &GrammarGraph,
    id: NodeId,
    ctx: &mut GenCtx<'_>,
) -> Result<DynNode, GenError> {
    ctx.node(id, |ctx| {
        let payload = match graph.def(id) {
            NodeDef::NonterminalHead(_) => {
                Payload::RefChild(Box::new(dyn_generate(graph, graph.child(id, 0), ctx)?))
            }
            NodeDef::Terminal(_) => Payload::TerminalLeaf,
            NodeDef::Concatenation(arity) => Payload::ConcatChildren(
                (0..arity)
                    .map(|i| dyn_generate(graph, graph.child(id, i), ctx))
                    .collect::<Result<_, _>>()?,
            ),
            NodeDef::Alternation(arity) => {
                let i = ctx.choose_alt(id, arity)?;
                Payload::VariantChoice(i, Box::new(dyn_generate(graph, graph.child(id, i), ctx)?))
            }
            NodeDef::Option => {
                let present = ctx.choose_rep(id, 0, Some(2))? == 1;
                Payload::OptionalChild(if present {
                    Some(Box::new(dyn_generate(graph, graph.child(id, 0), ctx)?))
                } else {
                    None
                })
            }
            def @ (NodeDef::Star | NodeDef::Plus | NodeDef::Range { .. }) => {
                let (lo, hi) = def.repetition_bounds().expect("repetition");
                let n = ctx.choose_rep(id, lo, hi)?;
                let inner = graph.child(id, 0);
                let mut items = Vec::with_capacity(n);
                for _ in 0..n {
                    items.push(dyn_generate(graph, inner, ctx)?);
                }
                Payload::RepChildren(items)
            }
        };
        Ok(DynNode { id, payload })
    })
}

/// Concatenated terminal bytes of `node`.
pub fn dyn_serialize(graph: &GrammarGraph, node: &DynNode) -> Vec<u8> {
    let mut out = Vec::new();
    crate::visitors::write_tree(DynRef::new(graph, node), &mut out)
        .expect("writing to a Vec cannot fail");
    out
}

#[derive(Clone, Copy, Debug)]
pub struct DynRef<'t> {
    pub graph: &'t GrammarGraph,
    pub node: &'t DynNode,
}

impl<'t> DynRef<'t> {
    pub fn new(graph: &'t GrammarGraph, node: &'t DynNode) -> Self {
        DynRef { graph, node }
    }

    fn with(self, node: &'t DynNode) -> Self {
        DynRef {
            graph: self.graph,
            node,
        }
    }
}

impl<'t> NodeView<'t> for DynRef<'t> {
    #[inline]
    fn node_id(self) -> NodeId {
        self.node.id
    }

    #[inline]
    fn definition(self) -> NodeDef<'t> {
        self.graph.def(self.node.id)
    }

    fn visit_each<V: Visitor<Self>>(self, visitor: V) -> VisitResult<V::Break, V, V::Error> {
        let mut v = visitor;
        match &self.node.payload {
            Payload::TerminalLeaf | Payload::OptionalChild(None) => {}
            Payload::RefChild(c) | Payload::OptionalChild(Some(c)) => {
                return v.visit(self.with(c), 0)
            }
            Payload::VariantChoice(i, c) => return v.visit(self.with(c), *i),
            Payload::ConcatChildren(cs) | Payload::RepChildren(cs) => {
                for (i, c) in cs.iter().enumerate() {
                    v = match v.visit(self.with(c), i)? {
                        ControlFlow::Continue(v) => v,
                        b @ ControlFlow::Break(_) => return Ok(b),
                    };
                }
            }
        }
        Ok(ControlFlow::Continue(v))
    }

    fn child(self, index: usize) -> Option<Self> {
        let c = match &self.node.payload {
            Payload::TerminalLeaf | Payload::OptionalChild(None) => return None,
            Payload::RefChild(c) | Payload::OptionalChild(Some(c)) => {
                (index == 0).then_some(&**c)?
            }
            Payload::VariantChoice(i, c) => (index == *i).then_some(&**c)?,
            Payload::ConcatChildren(cs) | Payload::RepChildren(cs) => cs.get(index)?,
        };
        Some(self.with(c))
    }
}

#[derive(Debug)]
pub struct DynMut<'t> {
    pub graph: &'t GrammarGraph,
    pub node: &'t mut DynNode,
}

impl<'t> NodeViewMut<'t> for DynMut<'t> {
    fn node_id(&self) -> NodeId {
        self.node.id
    }

    fn into_child(self, index: usize) -> Option<Self> {
        let graph = self.graph;
        let c = match &mut self.node.payload {
            Payload::TerminalLeaf | Payload::OptionalChild(None) => return None,
            Payload::RefChild(c) | Payload::OptionalChild(Some(c)) => {
                (index == 0).then_some(&mut **c)?
            }
            Payload::VariantChoice(i, c) => (index == *i).then_some(&mut **c)?,
            Payload::ConcatChildren(cs) | Payload::RepChildren(cs) => cs.get_mut(index)?,
        };
        Some(DynMut { graph, node: c })
    }

    fn regenerate(&mut self, ctx: &mut GenCtx<'_>) -> Result<(), GenError> {
        *self.node = dyn_generate(self.graph, self.node.id, ctx)?;
        Ok(())
    }

    fn swap(self, other: Self) -> bool {
        if self.node.id != other.node.id {
            return false;
        }
        std::mem::swap(self.node, other.node);
        true
    }
}

/// The dynamic backend over one grammar graph.
#[derive(Clone, Debug)]
pub struct DynamicBackend {
    graph: GrammarGraph,
}

impl DynamicBackend {
    pub fn new(graph: GrammarGraph) -> Self {
        DynamicBackend { graph }
    }
}

impl Backend for DynamicBackend {
    type Tree = DynNode;
    type Ref<'t> = DynRef<'t>;
    type Mut<'t> = DynMut<'t>;

    fn name(&self) -> &'static str {
        "dynamic"
    }

    fn graph(&self) -> &GrammarGraph {
        &self.graph
    }

    fn generate_root(&self, ctx: &mut GenCtx<'_>) -> Result<DynNode, GenError> {
        ctx.reset_depth(0);
        dyn_generate(&self.graph, self.graph.start(), ctx)
    }

    fn root<'t>(&'t self, tree: &'t DynNode) -> DynRef<'t> {
        DynRef::new(&self.graph, tree)
    }

    fn root_mut<'t>(&'t self, tree: &'t mut DynNode) -> DynMut<'t> {
        DynMut {
            graph: &self.graph,
            node: tree,
        }
    }
}
