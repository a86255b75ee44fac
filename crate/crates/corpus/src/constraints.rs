//! Checkers for the XML-lite and mini-C grammars.

use std::collections::HashSet;

use treeforge::evolution::{Constraint, ConstraintError, ConstraintRegistry, Evaluation};
use treeforge::graph::{GrammarGraph, NodeId};
use treeforge::runtime::{Backend, NodePath, NodeView};
use treeforge::visitors::serialize;

pub const C_KEYWORDS: &[&str] = &[
    "auto", "break", "case", "char", "const", "continue", "default", "do", "double", "else",
    "enum", "extern", "float", "for", "goto", "if", "int", "long", "register", "return", "short",
    "signed", "sizeof", "static", "struct", "switch", "typedef", "union", "unsigned", "void",
    "volatile", "while",
];

pub fn register<B: Backend + 'static>(r: &mut ConstraintRegistry<B>) {
    r.register("tag_match", |_, g| Ok(Box::new(TagMatch::new(g)?)));
    r.register("declared_before_use", |_, g| {
        Ok(Box::new(ScopeRule::new(g, ScopeCheck::DeclaredBeforeUse)?))
    });
    r.register("no_redeclaration", |_, g| {
        Ok(Box::new(ScopeRule::new(g, ScopeCheck::NoRedeclaration)?))
    });
    r.register("no_reserved_keywords", |_, g| {
        Ok(Box::new(ScopeRule::new(g, ScopeCheck::NoReservedKeywords)?))
    });
}

fn head(graph: &GrammarGraph, name: &str) -> Result<NodeId, ConstraintError> {
    graph
        .head(name)
        .ok_or_else(|| ConstraintError::UnknownSelector(name.to_string()))
}

fn ratio(good: usize, total: usize) -> f64 {
    if total == 0 {
        1.0
    } else {
        good as f64 / total as f64
    }
}

fn evaluation(total: usize, violations: Vec<NodePath>) -> Evaluation {
    if violations.is_empty() {
        return Evaluation::satisfied();
    }
    Evaluation {
        score: ratio(total - violations.len(), total),
        violations,
    }
}

/// Finds the first node with id `target` below `node` without entering
/// nodes with id `stop`.
fn find<'t, V: NodeView<'t>>(
    node: V,
    path: &mut NodePath,
    target: NodeId,
    stop: NodeId,
) -> Option<(V, NodePath)> {
    for (i, c) in node.children() {
        path.push(i);
        if c.node_id() == target {
            let found = (c, path.clone());
            path.pop();
            return Some(found);
        }
        if c.node_id() != stop {
            if let Some(hit) = find(c, path, target, stop) {
                path.pop();
                return Some(hit);
            }
        }
        path.pop();
    }
    None
}

/// Every element with an open and a close tag uses the same name in both.
#[derive(Clone, Debug)]
pub struct TagMatch {
    element: NodeId,
    content: NodeId,
    open: NodeId,
    close: NodeId,
    name: NodeId,
}

impl TagMatch {
    pub fn new(graph: &GrammarGraph) -> Result<Self, ConstraintError> {
        Ok(TagMatch {
            element: head(graph, "element")?,
            content: head(graph, "content")?,
            open: head(graph, "open_tag")?,
            close: head(graph, "close_tag")?,
            name: head(graph, "tag_name")?,
        })
    }

    fn walk<'t, V: NodeView<'t>>(
        &self,
        node: V,
        path: &mut NodePath,
        total: &mut usize,
        bad: &mut Vec<NodePath>,
    ) {
        if node.node_id() == self.element {
            let open = find(node, &mut path.clone(), self.open, self.content);
            let close = find(node, &mut path.clone(), self.close, self.content);
            if let (Some((o, _)), Some((c, cpath))) = (open, close) {
                *total += 1;
                let on =
                    find(o, &mut NodePath::root(), self.name, self.name).map(|(v, _)| serialize(v));
                let cn =
                    find(c, &mut NodePath::root(), self.name, self.name).map(|(v, _)| serialize(v));
                if on != cn {
                    bad.push(cpath);
                }
            }
        }
        for (i, c) in node.children() {
            path.push(i);
            self.walk(c, path, total, bad);
            path.pop();
        }
    }
}

impl<B: Backend> Constraint<B> for TagMatch {
    fn name(&self) -> &str {
        "tag_match"
    }

    fn evaluate(&self, backend: &B, tree: &B::Tree) -> Result<Evaluation, ConstraintError> {
        let mut total = 0;
        let mut bad = Vec::new();
        self.walk(
            backend.root(tree),
            &mut NodePath::root(),
            &mut total,
            &mut bad,
        );
        Ok(evaluation(total, bad))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScopeCheck {
    DeclaredBeforeUse,
    NoRedeclaration,
    NoReservedKeywords,
}

/// Identifier occurrences of a mini-C program, classified by scope.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ScopeReport {
    /// Uses, with whether a visible declaration precedes them.
    pub uses: Vec<(NodePath, String, bool)>,
    /// Declarations, with whether the same scope already declared the name.
    pub decls: Vec<(NodePath, String, bool)>,
}

impl ScopeReport {
    pub fn identifiers(&self) -> impl Iterator<Item = (&NodePath, &str)> {
        self.uses
            .iter()
            .chain(&self.decls)
            .map(|(p, n, _)| (p, n.as_str()))
    }
}

#[derive(Clone, Debug)]
struct MiniC {
    block: NodeId,
    global_decl: NodeId,
    declaration: NodeId,
    initializer: NodeId,
    identifier: NodeId,
}

impl MiniC {
    fn new(graph: &GrammarGraph) -> Result<Self, ConstraintError> {
        Ok(MiniC {
            block: head(graph, "block")?,
            global_decl: head(graph, "global_decl")?,
            declaration: head(graph, "declaration")?,
            initializer: head(graph, "initializer")?,
            identifier: head(graph, "identifier")?,
        })
    }

    fn report<'t, V: NodeView<'t>>(&self, root: V) -> ScopeReport {
        let mut r = ScopeReport::default();
        let mut scopes = vec![HashSet::new()];
        self.walk(root, &mut NodePath::root(), &mut scopes, &mut r);
        r
    }

    fn walk<'t, V: NodeView<'t>>(
        &self,
        node: V,
        path: &mut NodePath,
        scopes: &mut Vec<HashSet<String>>,
        r: &mut ScopeReport,
    ) {
        let id = node.node_id();
        if id == self.identifier {
            let name = String::from_utf8_lossy(&serialize(node)).into_owned();
            let known = scopes.iter().any(|s| s.contains(&name));
            r.uses.push((path.clone(), name, known));
            return;
        }
        if id == self.global_decl || id == self.declaration {
            // the initializer is checked before the new name becomes visible
            let Some((ident, ipath)) =
                find(node, &mut path.clone(), self.identifier, self.initializer)
            else {
                return;
            };
            if let Some((init, mut init_path)) =
                find(node, &mut path.clone(), self.initializer, self.identifier)
            {
                self.walk(init, &mut init_path, scopes, r);
            }
            let name = String::from_utf8_lossy(&serialize(ident)).into_owned();
            let scope = scopes.last_mut().expect("global scope");
            let again = !scope.insert(name.clone());
            r.decls.push((ipath, name, again));
            return;
        }
        let opens = id == self.block;
        if opens {
            scopes.push(HashSet::new());
        }
        for (i, c) in node.children() {
            path.push(i);
            self.walk(c, path, scopes, r);
            path.pop();
        }
        if opens {
            scopes.pop();
        }
    }
}

/// Reports the scope analysis of a mini-C tree.
pub fn scope_report<'t, V: NodeView<'t>>(
    graph: &GrammarGraph,
    root: V,
) -> Result<ScopeReport, ConstraintError> {
    Ok(MiniC::new(graph)?.report(root))
}

/// One of the mini-C validity rules.
#[derive(Clone, Debug)]
pub struct ScopeRule {
    check: ScopeCheck,
    minic: MiniC,
}

impl ScopeRule {
    pub fn new(graph: &GrammarGraph, check: ScopeCheck) -> Result<Self, ConstraintError> {
        Ok(ScopeRule {
            check,
            minic: MiniC::new(graph)?,
        })
    }
}

impl<B: Backend> Constraint<B> for ScopeRule {
    fn name(&self) -> &str {
        match self.check {
            ScopeCheck::DeclaredBeforeUse => "declared_before_use",
            ScopeCheck::NoRedeclaration => "no_redeclaration",
            ScopeCheck::NoReservedKeywords => "no_reserved_keywords",
        }
    }

    fn evaluate(&self, backend: &B, tree: &B::Tree) -> Result<Evaluation, ConstraintError> {
        let r = self.minic.report(backend.root(tree));
        Ok(match self.check {
            ScopeCheck::DeclaredBeforeUse => {
                let bad = r
                    .uses
                    .iter()
                    .filter(|u| !u.2)
                    .map(|u| u.0.clone())
                    .collect();
                evaluation(r.uses.len(), bad)
            }
            ScopeCheck::NoRedeclaration => {
                let bad = r
                    .decls
                    .iter()
                    .filter(|d| d.2)
                    .map(|d| d.0.clone())
                    .collect();
                evaluation(r.decls.len(), bad)
            }
            ScopeCheck::NoReservedKeywords => {
                let all: Vec<_> = r.identifiers().collect();
                let bad = all
                    .iter()
                    .filter(|(_, n)| C_KEYWORDS.contains(n))
                    .map(|(p, _)| (*p).clone())
                    .collect();
                evaluation(all.len(), bad)
            }
        })
    }
}
