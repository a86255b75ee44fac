//! Emits Rust source with one concrete type per grammar graph node.
//!
//! The emitted text is meant to be `include!`d into a module of a crate that
//! depends on this one. Shapes per node kind:
//!
//! * head: tuple struct around its body
//! * terminal: unit struct with a `LITERAL` constant
//! * concatenation: struct with one private field per child
//! * alternation: enum with variants `V0..`
//! * star, plus, range: `Vec` of the inner type (range carries `LO`/`HI`)
//! * option: `Option` of the inner type
//!
//! Indirect edges hold their child in [`Indirect`](crate::runtime::Indirect).

use std::collections::HashSet;
use std::fmt::Write;

use serde::Serialize;

use crate::graph::{GrammarGraph, NodeDef, NodeId};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodegenError {
    #[error("type name {0} assigned twice")]
    NameCollision(String),
}

/// Where the emitted code finds this crate.
#[derive(Clone, Debug)]
pub struct EmitOptions {
    pub runtime_path: String,
}

impl Default for EmitOptions {
    fn default() -> Self {
        EmitOptions {
            runtime_path: "::treeforge".into(),
        }
    }
}

const RESERVED: &[&str] = &[
    "Self",
    "Ref",
    "Mut",
    "Grammar",
    "Root",
    "Option",
    "Some",
    "None",
    "Result",
    "Ok",
    "Err",
    "Vec",
    "Box",
    "String",
    "Clone",
    "Copy",
    "Debug",
    "Default",
    "Eq",
    "PartialEq",
    "Hash",
    "Send",
    "Sync",
    "Sized",
    "Drop",
    "Fn",
    "FnMut",
    "FnOnce",
    "Iterator",
    "IntoIterator",
    "ToString",
    "ToOwned",
    "From",
    "Into",
    "AsRef",
    "AsMut",
];

fn camel(rule: &str) -> String {
    let mut out = String::new();
    for piece in rule.split('_').filter(|p| !p.is_empty()) {
        let mut chars = piece.chars();
        if let Some(c) = chars.next() {
            out.push(c.to_ascii_uppercase());
            out.extend(chars);
        }
    }
    if out.is_empty() {
        out.push_str("Rule");
    }
    if out.starts_with(|c: char| c.is_ascii_digit()) {
        out.insert(0, 'R');
    }
    out
}

/// The per-node decisions the emitter works from.
#[derive(Clone, Debug)]
pub struct EmitPlan {
    names: Vec<String>,
}

impl EmitPlan {
    pub fn new(graph: &GrammarGraph) -> Result<Self, CodegenError> {
        let mut used: HashSet<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        let mut names = Vec::with_capacity(graph.len());
        for (id, node) in graph.nodes() {
            let base = match node.def() {
                NodeDef::NonterminalHead(rule) => camel(rule),
                def => format!("{}_{}_{}", camel(&node.rule), def.kind_name(), id.0),
            };
            let name = if used.contains(&base) {
                format!("{base}_{}", id.0)
            } else {
                base
            };
            if !used.insert(name.clone()) {
                return Err(CodegenError::NameCollision(name));
            }
            names.push(name);
        }
        Ok(EmitPlan { names })
    }

    pub fn type_name(&self, id: NodeId) -> &str {
        &self.names[id.index()]
    }

    pub fn type_names(&self) -> &[String] {
        &self.names
    }
}

/// One entry of the JSON manifest.
#[derive(Clone, Debug, Serialize)]
pub struct ManifestEntry {
    pub id: u32,
    #[serde(rename = "type")]
    pub type_name: String,
    pub kind: &'static str,
    pub rule: String,
    pub line: usize,
    pub column: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub start: String,
    pub root_type: String,
    pub nodes: Vec<ManifestEntry>,
}

pub fn manifest(graph: &GrammarGraph) -> Result<Manifest, CodegenError> {
    let plan = EmitPlan::new(graph)?;
    let nodes = graph
        .nodes()
        .map(|(id, n)| ManifestEntry {
            id: id.0,
            type_name: plan.type_name(id).to_string(),
            kind: n.def().kind_name(),
            rule: n.rule.clone(),
            line: n.span.line,
            column: n.span.column,
        })
        .collect();
    Ok(Manifest {
        start: graph.node(graph.start()).rule.clone(),
        root_type: plan.type_name(graph.start()).to_string(),
        nodes,
    })
}

fn byte_literal(bytes: &[u8]) -> String {
    let mut s = String::from("b\"");
    for &b in bytes {
        match b {
            b'"' => s.push_str("\\\""),
            b'\\' => s.push_str("\\\\"),
            0x20..=0x7e => s.push(char::from(b)),
            _ => {
                let _ = write!(s, "\\x{b:02x}");
            }
        }
    }
    s.push('"');
    s
}

fn str_literal(text: &str) -> String {
    format!("{text:?}")
}

fn def_expr(rt: &str, def: NodeDef<'_>) -> String {
    let p = format!("{rt}::graph::NodeDef");
    match def {
        NodeDef::NonterminalHead(n) => format!("{p}::NonterminalHead({})", str_literal(n)),
        NodeDef::Alternation(k) => format!("{p}::Alternation({k})"),
        NodeDef::Concatenation(k) => format!("{p}::Concatenation({k})"),
        NodeDef::Star => format!("{p}::Star"),
        NodeDef::Plus => format!("{p}::Plus"),
        NodeDef::Range { lo, hi } => format!("{p}::Range {{ lo: {lo}, hi: {hi} }}"),
        NodeDef::Option => format!("{p}::Option"),
        NodeDef::Terminal(b) => format!("{p}::Terminal({})", byte_literal(b)),
    }
}

struct Emitter<'g> {
    graph: &'g GrammarGraph,
    plan: EmitPlan,
    rt: String,
    out: String,
}

/// A child slot of a node: its type and whether it sits behind an indirection cell.
struct Slot {
    index: usize,
    ty: String,
    indirect: bool,
}

impl Emitter<'_> {
    fn name(&self, id: NodeId) -> &str {
        self.plan.type_name(id)
    }

    fn slots(&self, id: NodeId) -> Vec<Slot> {
        let repetition = matches!(
            self.graph.def(id),
            NodeDef::Star | NodeDef::Plus | NodeDef::Range { .. }
        );
        self.graph
            .out_edges(id)
            .enumerate()
            .map(|(index, e)| Slot {
                index,
                ty: self.name(e.dst).to_string(),
                // repetitions already allocate through their Vec
                indirect: e.indirect && !repetition,
            })
            .collect()
    }

    fn stored(&self, slot: &Slot) -> String {
        if slot.indirect {
            format!("{}::runtime::Indirect<{}>", self.rt, slot.ty)
        } else {
            slot.ty.clone()
        }
    }

    fn gen_call(&self, slot: &Slot) -> String {
        let call = format!(
            "<{} as {}::runtime::Node>::generate(ctx)?",
            slot.ty, self.rt
        );
        if slot.indirect {
            format!("{}::runtime::Indirect::new({call})", self.rt)
        } else {
            call
        }
    }

    fn wrap(&self, slot: &Slot, value: &str) -> String {
        if slot.indirect {
            format!("{}::runtime::Indirect::new({value})", self.rt)
        } else {
            value.to_string()
        }
    }

    /// Expression borrowing `place` (a stored slot value) as the child type.
    fn borrow(&self, slot: &Slot, place: &str, mutable: bool) -> String {
        match (slot.indirect, mutable) {
            (false, false) => format!("&{place}"),
            (false, true) => format!("&mut {place}"),
            (true, false) => format!("{place}.get()"),
            (true, true) => format!("{place}.get_mut()"),
        }
    }

    /// Same as [`Self::borrow`] for a binding that is already a reference.
    fn borrow_ref(&self, slot: &Slot, binding: &str, mutable: bool) -> String {
        match (slot.indirect, mutable) {
            (false, _) => binding.to_string(),
            (true, false) => format!("{binding}.get()"),
            (true, true) => format!("{binding}.get_mut()"),
        }
    }
}

// The emitter appends through `w!`, keeping the borrow of `out` separate from
// the rest of the emitter state.
macro_rules! w {
    ($out:expr, $($arg:tt)*) => {{
        let _ = writeln!($out, $($arg)*);
    }};
}

impl Emitter<'_> {
    fn doc_lines(&self, id: NodeId) -> String {
        let node = self.graph.node(id);
        let summary = match node.def() {
            NodeDef::NonterminalHead(_) => format!("`{}`", node.text),
            def => format!("{} in `<{}>`: `{}`", def.kind_name(), node.rule, node.text),
        };
        format!(
            "/// {}\n///\n/// Node {} of the grammar graph, defined at {}.\n",
            summary.replace('\n', " "),
            id.0,
            node.span
        )
    }

    fn emit_type(&mut self, id: NodeId) {
        let name = self.name(id).to_string();
        let docs = self.doc_lines(id);
        let slots = self.slots(id);
        let rt = self.rt.clone();
        let mut s = String::new();
        s.push_str(&docs);
        let camel_allow = if name.contains('_') {
            "#[allow(non_camel_case_types)]\n"
        } else {
            ""
        };
        match self.graph.def(id) {
            NodeDef::Terminal(bytes) => {
                s.push_str(camel_allow);
                w!(
                    s,
                    "#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]"
                );
                w!(s, "pub struct {name};\n");
                w!(s, "impl {name} {{");
                w!(
                    s,
                    "    pub const LITERAL: &'static [u8] = {};\n",
                    byte_literal(bytes)
                );
                w!(s, "    pub fn new() -> Self {{\n        {name}\n    }}");
                w!(s, "}}\n");
            }
            NodeDef::NonterminalHead(_) => {
                let c = &slots[0];
                s.push_str(camel_allow);
                w!(s, "#[derive(Clone, Debug, PartialEq, Eq, Hash)]");
                w!(s, "pub struct {name}({});\n", self.stored(c));
                s.push_str(camel_allow);
                w!(s, "impl {name} {{");
                w!(
                    s,
                    "    pub fn new(inner: {}) -> Self {{\n        {name}({})\n    }}\n",
                    c.ty,
                    self.wrap(c, "inner")
                );
                w!(
                    s,
                    "    pub fn inner(&self) -> &{} {{\n        {}\n    }}\n",
                    c.ty,
                    self.borrow(c, "self.0", false)
                );
                w!(
                    s,
                    "    pub fn inner_mut(&mut self) -> &mut {} {{\n        {}\n    }}\n",
                    c.ty,
                    self.borrow(c, "self.0", true)
                );
                let into = if c.indirect {
                    "self.0.into_inner()"
                } else {
                    "self.0"
                };
                w!(
                    s,
                    "    pub fn into_inner(self) -> {} {{\n        {into}\n    }}\n",
                    c.ty
                );
                w!(s, "    /// The derived bytes.");
                w!(s, "    pub fn to_bytes(&self) -> Vec<u8> {{\n        {rt}::visitors::serialize(Ref::{name}(self))\n    }}");
                w!(s, "}}\n");
            }
            NodeDef::Concatenation(_) => {
                s.push_str(camel_allow);
                w!(s, "#[derive(Clone, Debug, PartialEq, Eq, Hash)]");
                w!(s, "pub struct {name} {{");
                for c in &slots {
                    w!(s, "    f{}: {},", c.index, self.stored(c));
                }
                w!(s, "}}\n");
                s.push_str(camel_allow);
                w!(s, "impl {name} {{");
                let params: Vec<String> = slots
                    .iter()
                    .map(|c| format!("f{}: {}", c.index, c.ty))
                    .collect();
                let inits: Vec<String> = slots
                    .iter()
                    .map(|c| format!("f{0}: {1}", c.index, self.wrap(c, &format!("f{}", c.index))))
                    .collect();
                w!(s, "    #[allow(clippy::too_many_arguments)]");
                w!(
                    s,
                    "    pub fn new({}) -> Self {{\n        {name} {{ {} }}\n    }}",
                    params.join(", "),
                    inits.join(", ")
                );
                for c in &slots {
                    let place = format!("self.f{}", c.index);
                    w!(
                        s,
                        "\n    pub fn field_{}(&self) -> &{} {{\n        {}\n    }}",
                        c.index,
                        c.ty,
                        self.borrow(c, &place, false)
                    );
                    w!(
                        s,
                        "\n    pub fn field_{}_mut(&mut self) -> &mut {} {{\n        {}\n    }}",
                        c.index,
                        c.ty,
                        self.borrow(c, &place, true)
                    );
                }
                w!(s, "}}\n");
            }
            NodeDef::Alternation(_) => {
                s.push_str(camel_allow);
                w!(s, "#[derive(Clone, Debug, PartialEq, Eq, Hash)]");
                w!(s, "pub enum {name} {{");
                for c in &slots {
                    w!(s, "    V{}({}),", c.index, self.stored(c));
                }
                w!(s, "}}\n");
                s.push_str(camel_allow);
                w!(s, "impl {name} {{");
                w!(s, "    /// Index of the chosen variant.");
                w!(
                    s,
                    "    pub fn variant_index(&self) -> usize {{\n        match self {{"
                );
                for c in &slots {
                    w!(s, "            {name}::V{0}(_) => {0},", c.index);
                }
                w!(s, "        }}\n    }}");
                for c in &slots {
                    w!(s, "\n    pub fn v{0}(value: {1}) -> Self {{\n        {name}::V{0}({2})\n    }}", c.index, c.ty, self.wrap(c, "value"));
                }
                w!(s, "}}\n");
            }
            def @ (NodeDef::Star | NodeDef::Plus | NodeDef::Range { .. }) => {
                let c = &slots[0];
                let (lo, hi) = def.repetition_bounds().expect("repetition");
                s.push_str(camel_allow);
                w!(s, "#[derive(Clone, Debug, PartialEq, Eq, Hash)]");
                w!(s, "pub struct {name}(Vec<{}>);\n", c.ty);
                s.push_str(camel_allow);
                w!(s, "impl {name} {{");
                w!(s, "    pub const LO: usize = {lo};");
                if let Some(hi) = hi {
                    w!(s, "    /// Exclusive upper bound.");
                    w!(s, "    pub const HI: usize = {hi};");
                }
                let check = match hi {
                    None if lo == 0 => None,
                    None => Some(format!("items.len() >= {lo}")),
                    Some(hi) => Some(format!("({lo}..{hi}).contains(&items.len())")),
                };
                match check {
                    None => w!(s, "\n    pub fn new(items: Vec<{}>) -> Self {{\n        {name}(items)\n    }}", c.ty),
                    Some(check) => w!(
                        s,
                        "\n    /// `None` if the count is out of bounds.\n    pub fn new(items: Vec<{}>) -> Option<Self> {{\n        ({check}).then(|| {name}(items))\n    }}",
                        c.ty
                    ),
                }
                w!(
                    s,
                    "\n    pub fn items(&self) -> &[{}] {{\n        &self.0\n    }}",
                    c.ty
                );
                w!(s, "\n    pub fn items_mut(&mut self) -> &mut [{}] {{\n        &mut self.0\n    }}", c.ty);
                w!(
                    s,
                    "\n    pub fn len(&self) -> usize {{\n        self.0.len()\n    }}"
                );
                w!(
                    s,
                    "\n    pub fn is_empty(&self) -> bool {{\n        self.0.is_empty()\n    }}"
                );
                if hi.is_none() {
                    w!(s, "\n    pub fn push(&mut self, item: {}) {{\n        self.0.push(item);\n    }}", c.ty);
                }
                w!(s, "}}\n");
            }
            NodeDef::Option => {
                let c = &slots[0];
                s.push_str(camel_allow);
                w!(s, "#[derive(Clone, Debug, PartialEq, Eq, Hash)]");
                w!(s, "pub struct {name}(Option<{}>);\n", self.stored(c));
                s.push_str(camel_allow);
                w!(s, "impl {name} {{");
                w!(
                    s,
                    "    pub fn new(value: Option<{}>) -> Self {{\n        {name}(value.map(|v| {}))\n    }}",
                    c.ty,
                    self.wrap(c, "v")
                );
                w!(
                    s,
                    "\n    pub fn get(&self) -> Option<&{}> {{\n        self.0.as_ref().map(|v| {})\n    }}",
                    c.ty,
                    self.borrow_ref(c, "v", false)
                );
                w!(
                    s,
                    "\n    pub fn get_mut(&mut self) -> Option<&mut {}> {{\n        self.0.as_mut().map(|v| {})\n    }}",
                    c.ty,
                    self.borrow_ref(c, "v", true)
                );
                w!(s, "}}\n");
            }
        }
        self.out.push_str(&s);
    }

    fn emit_generate_body(&self, id: NodeId) -> String {
        let name = self.name(id);
        let slots = self.slots(id);
        match self.graph.def(id) {
            NodeDef::Terminal(_) => format!("Ok({name})"),
            NodeDef::NonterminalHead(_) => format!("Ok({name}({}))", self.gen_call(&slots[0])),
            NodeDef::Concatenation(_) => {
                let fields: Vec<String> = slots
                    .iter()
                    .map(|c| format!("f{}: {}", c.index, self.gen_call(c)))
                    .collect();
                format!("Ok({name} {{ {} }})", fields.join(", "))
            }
            NodeDef::Alternation(k) => {
                let mut s = format!(
                    "Ok(match ctx.choose_alt(<Self as {}::runtime::Node>::ID, {k})? {{\n",
                    self.rt
                );
                for c in &slots {
                    let pat = if c.index + 1 == slots.len() {
                        "_".to_string()
                    } else {
                        c.index.to_string()
                    };
                    let _ = writeln!(
                        s,
                        "                {pat} => {name}::V{}({}),",
                        c.index,
                        self.gen_call(c)
                    );
                }
                s.push_str("            })");
                s
            }
            NodeDef::Option => {
                let c = &slots[0];
                format!(
                    "let present = ctx.choose_rep(<Self as {rt}::runtime::Node>::ID, 0, Some(2))? == 1;\n            Ok({name}(if present {{ Some({}) }} else {{ None }}))",
                    self.gen_call(c),
                    rt = self.rt
                )
            }
            def => {
                let (lo, hi) = def.repetition_bounds().expect("repetition");
                let hi = match hi {
                    Some(h) => format!("Some({h})"),
                    None => "None".into(),
                };
                format!(
                    "let n = ctx.choose_rep(<Self as {rt}::runtime::Node>::ID, {lo}, {hi})?;\n            \
                     let mut items = Vec::with_capacity(n);\n            \
                     for _ in 0..n {{\n                items.push({});\n            }}\n            \
                     Ok({name}(items))",
                    self.gen_call(&slots[0]),
                    rt = self.rt
                )
            }
        }
    }

    fn emit_node_impl(&mut self, id: NodeId) {
        let name = self.name(id).to_string();
        let rt = self.rt.clone();
        let body = self.emit_generate_body(id);
        let def = def_expr(&rt, self.graph.def(id));
        let mut s = String::new();
        w!(s, "impl {rt}::runtime::Node for {name} {{");
        w!(s, "    type Ref<'a> = Ref<'a>;");
        w!(s, "    type Mut<'a> = Mut<'a>;\n");
        w!(
            s,
            "    const ID: {rt}::graph::NodeId = {rt}::graph::NodeId({});",
            id.0
        );
        w!(s, "    const DEF: {rt}::graph::NodeDef<'static> = {def};\n");
        w!(s, "    #[inline]");
        w!(
            s,
            "    fn opaque(&self) -> Ref<'_> {{\n        Ref::{name}(self)\n    }}\n"
        );
        w!(s, "    #[inline]");
        w!(
            s,
            "    fn opaque_mut(&mut self) -> Mut<'_> {{\n        Mut::{name}(self)\n    }}\n"
        );
        w!(
            s,
            "    fn from_opaque(view: Self::Ref<'_>) -> Option<&Self> {{"
        );
        w!(s, "        match view {{\n            Ref::{name}(x) => Some(x),\n            _ => None,\n        }}\n    }}\n");
        w!(
            s,
            "    fn from_opaque_mut(view: Self::Mut<'_>) -> Option<&mut Self> {{"
        );
        w!(s, "        match view {{\n            Mut::{name}(x) => Some(x),\n            _ => None,\n        }}\n    }}\n");
        w!(s, "    #[inline]");
        w!(s, "    fn generate(ctx: &mut {rt}::generation::GenCtx<'_>) -> Result<Self, {rt}::generation::GenError> {{");
        let param = if self.graph.def(id).is_terminal() {
            "_ctx"
        } else {
            "ctx"
        };
        w!(s, "        ctx.node(<Self as {rt}::runtime::Node>::ID, |{param}| {{\n            {body}\n        }})");
        w!(s, "    }}");
        w!(s, "}}\n");
        self.out.push_str(&s);
    }

    fn visit_arm(&self, id: NodeId) -> String {
        let name = self.name(id);
        let slots = self.slots(id);
        let cont = "Ok(::core::ops::ControlFlow::Continue(visitor))";
        let step = |child: String, index: String| -> String {
            format!(
                "visitor = match visitor.visit({child}, {index})? {{\n                    ::core::ops::ControlFlow::Continue(v) => v,\n                    b => return Ok(b),\n                }};"
            )
        };
        match self.graph.def(id) {
            NodeDef::Terminal(_) => format!("Ref::{name}(_) => {cont},"),
            NodeDef::NonterminalHead(_) => {
                let c = &slots[0];
                format!(
                    "Ref::{name}(x) => visitor.visit(Ref::{}({}), 0),",
                    c.ty,
                    self.borrow(c, "x.0", false)
                )
            }
            NodeDef::Concatenation(_) => {
                let mut s = format!("Ref::{name}(x) => {{\n");
                for c in &slots[..slots.len() - 1] {
                    let child = format!(
                        "Ref::{}({})",
                        c.ty,
                        self.borrow(c, &format!("x.f{}", c.index), false)
                    );
                    let _ = writeln!(s, "                {}", step(child, c.index.to_string()));
                }
                let c = slots.last().expect("concatenation has children");
                let child = format!(
                    "Ref::{}({})",
                    c.ty,
                    self.borrow(c, &format!("x.f{}", c.index), false)
                );
                let _ = writeln!(s, "                visitor.visit({child}, {})", c.index);
                s.push_str("            }");
                s
            }
            NodeDef::Alternation(_) => {
                let mut s = format!("Ref::{name}(x) => match x {{\n");
                for c in &slots {
                    let _ = writeln!(
                        s,
                        "                {name}::V{0}(c) => visitor.visit(Ref::{1}({2}), {0}),",
                        c.index,
                        c.ty,
                        self.borrow_ref(c, "c", false)
                    );
                }
                s.push_str("            },");
                s
            }
            NodeDef::Option => {
                let c = &slots[0];
                format!(
                    "Ref::{name}(x) => match &x.0 {{\n                Some(c) => visitor.visit(Ref::{}({}), 0),\n                None => {cont},\n            }},",
                    c.ty,
                    self.borrow_ref(c, "c", false)
                )
            }
            _ => {
                let c = &slots[0];
                format!(
                    "Ref::{name}(x) => {{\n                for (i, c) in x.0.iter().enumerate() {{\n                    {}\n                }}\n                {cont}\n            }}",
                    step(format!("Ref::{}(c)", c.ty), "i".into()).replace("\n                ", "\n                    ")
                )
            }
        }
    }

    fn child_arm(&self, id: NodeId, mutable: bool) -> String {
        let name = self.name(id);
        let slots = self.slots(id);
        let (view, m) = if mutable {
            ("Mut", "mut ")
        } else {
            ("Ref", "")
        };
        match self.graph.def(id) {
            NodeDef::Terminal(_) => format!("{view}::{name}(_) => None,"),
            NodeDef::NonterminalHead(_) => {
                let c = &slots[0];
                format!(
                    "{view}::{name}(x) => {{\n                if index == 0 {{\n                    Some({view}::{}({}))\n                }} else {{\n                    None\n                }}\n            }}",
                    c.ty,
                    self.borrow(c, "x.0", mutable)
                )
            }
            NodeDef::Concatenation(_) => {
                let mut s = format!("{view}::{name}(x) => match index {{\n");
                for c in &slots {
                    let place = format!("x.f{}", c.index);
                    let _ = writeln!(
                        s,
                        "                {} => Some({view}::{}({})),",
                        c.index,
                        c.ty,
                        self.borrow(c, &place, mutable)
                    );
                }
                s.push_str("                _ => None,\n            },");
                s
            }
            NodeDef::Alternation(_) => {
                let mut s = format!("{view}::{name}(x) => match x {{\n");
                for c in &slots {
                    let _ = writeln!(
                        s,
                        "                {name}::V{0}(c) if index == {0} => Some({view}::{1}({2})),",
                        c.index,
                        c.ty,
                        self.borrow_ref(c, "c", mutable)
                    );
                }
                s.push_str("                _ => None,\n            },");
                s
            }
            NodeDef::Option => {
                let c = &slots[0];
                format!(
                    "{view}::{name}(x) => match &{m}x.0 {{\n                Some(c) if index == 0 => Some({view}::{}({})),\n                _ => None,\n            }},",
                    c.ty,
                    self.borrow_ref(c, "c", mutable)
                )
            }
            _ => {
                let c = &slots[0];
                let get = if mutable { "get_mut" } else { "get" };
                format!(
                    "{view}::{name}(x) => x.0.{get}(index).map({view}::{}),",
                    c.ty
                )
            }
        }
    }

    fn emit_opaque(&mut self) {
        let rt = self.rt.clone();
        let ids: Vec<NodeId> = self.graph.nodes().map(|(id, _)| id).collect();
        let mut s = String::new();
        w!(s, "/// Immutable view of any node of this grammar.");
        w!(s, "#[allow(non_camel_case_types)]");
        w!(s, "#[derive(Clone, Copy, Debug)]");
        w!(s, "pub enum Ref<'a> {{");
        for &id in &ids {
            w!(s, "    {0}(&'a {0}),", self.name(id));
        }
        w!(s, "}}\n");
        w!(s, "/// Mutable view of any node of this grammar.");
        w!(s, "#[allow(non_camel_case_types)]");
        w!(s, "#[derive(Debug)]");
        w!(s, "pub enum Mut<'a> {{");
        for &id in &ids {
            w!(s, "    {0}(&'a mut {0}),", self.name(id));
        }
        w!(s, "}}\n");
        for &id in &ids {
            let name = self.name(id);
            w!(s, "impl<'a> From<&'a {name}> for Ref<'a> {{\n    fn from(x: &'a {name}) -> Self {{\n        Ref::{name}(x)\n    }}\n}}\n");
            w!(s, "impl<'a> From<&'a mut {name}> for Mut<'a> {{\n    fn from(x: &'a mut {name}) -> Self {{\n        Mut::{name}(x)\n    }}\n}}\n");
        }
        w!(s, "impl<'a> {rt}::runtime::NodeView<'a> for Ref<'a> {{");
        w!(s, "    #[inline]");
        w!(
            s,
            "    fn node_id(self) -> {rt}::graph::NodeId {{\n        match self {{"
        );
        for &id in &ids {
            w!(
                s,
                "            Ref::{}(_) => {rt}::graph::NodeId({}),",
                self.name(id),
                id.0
            );
        }
        w!(s, "        }}\n    }}\n");
        w!(s, "    #[inline]");
        w!(s, "    fn definition(self) -> {rt}::graph::NodeDef<'a> {{\n        DEFS[{rt}::runtime::NodeView::node_id(self).index()]\n    }}\n");
        w!(s, "    fn visit_each<V: {rt}::runtime::Visitor<Self>>(self, visitor: V) -> {rt}::runtime::VisitResult<V::Break, V, V::Error> {{");
        w!(
            s,
            "        #[allow(unused_mut)]\n        let mut visitor = visitor;"
        );
        w!(s, "        match self {{");
        for &id in &ids {
            w!(s, "            {}", self.visit_arm(id));
        }
        w!(s, "        }}\n    }}\n");
        w!(
            s,
            "    fn child(self, index: usize) -> Option<Self> {{\n        match self {{"
        );
        for &id in &ids {
            w!(s, "            {}", self.child_arm(id, false));
        }
        w!(s, "        }}\n    }}");
        w!(s, "}}\n");

        w!(s, "impl<'a> {rt}::runtime::NodeViewMut<'a> for Mut<'a> {{");
        w!(
            s,
            "    fn node_id(&self) -> {rt}::graph::NodeId {{\n        match self {{"
        );
        for &id in &ids {
            w!(
                s,
                "            Mut::{}(_) => {rt}::graph::NodeId({}),",
                self.name(id),
                id.0
            );
        }
        w!(s, "        }}\n    }}\n");
        w!(
            s,
            "    fn into_child(self, index: usize) -> Option<Self> {{\n        match self {{"
        );
        for &id in &ids {
            w!(s, "            {}", self.child_arm(id, true));
        }
        w!(s, "        }}\n    }}\n");
        w!(s, "    fn regenerate(&mut self, ctx: &mut {rt}::generation::GenCtx<'_>) -> Result<(), {rt}::generation::GenError> {{");
        w!(s, "        match self {{");
        for &id in &ids {
            w!(
                s,
                "            Mut::{0}(x) => **x = <{0} as {rt}::runtime::Node>::generate(ctx)?,",
                self.name(id)
            );
        }
        w!(s, "        }}\n        Ok(())\n    }}\n");
        w!(
            s,
            "    fn swap(self, other: Self) -> bool {{\n        match (self, other) {{"
        );
        for &id in &ids {
            w!(s, "            (Mut::{0}(a), Mut::{0}(b)) => {{\n                ::core::mem::swap(a, b);\n                true\n            }}", self.name(id));
        }
        w!(s, "            _ => false,\n        }}\n    }}");
        w!(s, "}}\n");
        self.out.push_str(&s);
    }

    fn emit_backend(&mut self) {
        let rt = self.rt.clone();
        let root = self.name(self.graph.start()).to_string();
        let mut source = String::new();
        let first = self.graph.heads().next().map(|(_, id)| id);
        if first != Some(self.graph.start()) {
            let _ = writeln!(
                source,
                "start = <{}>",
                self.graph.node(self.graph.start()).rule
            );
        }
        for (_, head) in self.graph.heads() {
            let _ = writeln!(source, "{}", self.graph.node(head).text);
        }
        let mut s = String::new();
        w!(s, "/// The grammar these types were generated from.");
        w!(s, "pub const SOURCE: &str = {};\n", str_literal(&source));
        w!(s, "/// Node descriptors by node id.");
        w!(s, "pub const DEFS: &[{rt}::graph::NodeDef<'static>] = &[");
        for (id, _) in self.graph.nodes() {
            w!(s, "    <{} as {rt}::runtime::Node>::DEF,", self.name(id));
        }
        w!(s, "];\n");
        w!(
            s,
            "/// Edge count of the grammar graph, checked when the backend is built."
        );
        w!(
            s,
            "pub const EDGES: usize = {};\n",
            self.graph.edges().len()
        );
        w!(s, "/// Type of whole derivation trees.");
        w!(s, "pub type Root = {root};\n");
        w!(s, "/// Backend over the generated types.");
        w!(s, "#[derive(Clone, Debug)]");
        w!(
            s,
            "pub struct Grammar {{\n    graph: {rt}::graph::GrammarGraph,\n}}\n"
        );
        w!(s, "impl Grammar {{");
        w!(s, "    pub fn new() -> Self {{");
        w!(s, "        let graph = {rt}::graph::GrammarGraph::from_text(SOURCE.as_bytes()).expect(\"embedded grammar parses\");");
        w!(
            s,
            "        assert_eq!(graph.len(), DEFS.len(), \"generated types are out of date\");"
        );
        w!(
            s,
            "        assert_eq!(graph.edges().len(), EDGES, \"generated types are out of date\");"
        );
        w!(s, "        for (id, node) in graph.nodes() {{");
        w!(s, "            assert_eq!(node.def(), DEFS[id.index()], \"generated types are out of date\");");
        w!(s, "        }}");
        w!(s, "        Grammar {{ graph }}\n    }}");
        w!(s, "}}\n");
        w!(s, "impl Default for Grammar {{\n    fn default() -> Self {{\n        Self::new()\n    }}\n}}\n");
        w!(s, "impl {rt}::runtime::Backend for Grammar {{");
        w!(s, "    type Tree = {root};");
        w!(s, "    type Ref<'t> = Ref<'t>;");
        w!(s, "    type Mut<'t> = Mut<'t>;\n");
        w!(
            s,
            "    fn name(&self) -> &'static str {{\n        \"static\"\n    }}\n"
        );
        w!(
            s,
            "    fn graph(&self) -> &{rt}::graph::GrammarGraph {{\n        &self.graph\n    }}\n"
        );
        w!(s, "    fn generate_root(&self, ctx: &mut {rt}::generation::GenCtx<'_>) -> Result<{root}, {rt}::generation::GenError> {{");
        w!(s, "        ctx.reset_depth(0);\n        <{root} as {rt}::runtime::Node>::generate(ctx)\n    }}\n");
        w!(s, "    fn root<'t>(&'t self, tree: &'t {root}) -> Ref<'t> {{\n        Ref::{root}(tree)\n    }}\n");
        w!(s, "    fn root_mut<'t>(&'t self, tree: &'t mut {root}) -> Mut<'t> {{\n        Mut::{root}(tree)\n    }}");
        w!(s, "}}");
        self.out.push_str(&s);
    }
}

fn emitter<'g>(
    graph: &'g GrammarGraph,
    options: &EmitOptions,
) -> Result<Emitter<'g>, CodegenError> {
    Ok(Emitter {
        graph,
        plan: EmitPlan::new(graph)?,
        rt: options.runtime_path.clone(),
        out: String::new(),
    })
}

/// Type definitions with their constructors and accessors.
pub fn emit_types(graph: &GrammarGraph, options: &EmitOptions) -> Result<String, CodegenError> {
    let mut e = emitter(graph, options)?;
    for (id, _) in graph.nodes() {
        e.emit_type(id);
    }
    Ok(e.out)
}

/// The `Ref` and `Mut` views with their upcasts and traversal.
pub fn emit_opaque(graph: &GrammarGraph, options: &EmitOptions) -> Result<String, CodegenError> {
    let mut e = emitter(graph, options)?;
    e.emit_opaque();
    Ok(e.out)
}

/// `Node` implementations: descriptors, views, downcasts and generation.
pub fn emit_node_contract(
    graph: &GrammarGraph,
    options: &EmitOptions,
) -> Result<String, CodegenError> {
    let mut e = emitter(graph, options)?;
    for (id, _) in graph.nodes() {
        e.emit_node_impl(id);
    }
    Ok(e.out)
}

/// A complete module body: types, views, node contract and the backend.
pub fn emit_module(graph: &GrammarGraph, options: &EmitOptions) -> Result<String, CodegenError> {
    let mut out = String::from("// Generated by treeforge. Do not edit.\n\n");
    out.push_str(&emit_types(graph, options)?);
    out.push_str(&emit_opaque(graph, options)?);
    out.push_str(&emit_node_contract(graph, options)?);
    let mut e = emitter(graph, options)?;
    e.emit_backend();
    out.push_str(&e.out);
    out.push('\n');
    Ok(out)
}
