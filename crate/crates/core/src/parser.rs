//! A reference Earley parser over the grammar graph.
//!
//! It shares nothing with generation beyond the graph itself, which makes it
//! usable as a validity oracle for generated and evolved trees. Every graph
//! node becomes a nonterminal; terminals are expanded into byte tokens and
//! repetitions into left-recursive or enumerated productions. Nullable
//! symbols are handled by advancing over them at prediction time.

use std::collections::{HashMap, HashSet};

use crate::dynamic::{DynNode, DynRef, Payload};
use crate::generation::GenError;
use crate::graph::{GrammarGraph, NodeDef, NodeId};
use crate::runtime::Backend;
use crate::visitors::choice_script;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("input rejected at byte {0}")]
    Rejected(usize),
    #[error("no derivation tree could be extracted")]
    Extraction,
    #[error("parsed tree could not be rebuilt: {0}")]
    Import(#[from] GenError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Sym {
    N(u32),
    B(u8),
}

#[derive(Clone, Debug)]
struct Prod {
    lhs: u32,
    rhs: Vec<Sym>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct Item {
    prod: u32,
    dot: u32,
    origin: u32,
}

#[derive(Default)]
struct EarleySet {
    items: Vec<Item>,
    seen: HashSet<Item>,
    /// Items waiting for each nonterminal.
    waiting: HashMap<u32, Vec<u32>>,
}

impl EarleySet {
    fn add(&mut self, item: Item, prods: &[Prod]) {
        if self.seen.insert(item) {
            if let Some(Sym::N(s)) = prods[item.prod as usize].rhs.get(item.dot as usize) {
                self.waiting
                    .entry(*s)
                    .or_default()
                    .push(self.items.len() as u32);
            }
            self.items.push(item);
        }
    }
}

/// A parser for one grammar graph.
#[derive(Clone, Debug)]
pub struct EarleyParser {
    prods: Vec<Prod>,
    by_lhs: Vec<Vec<u32>>,
    nullable: Vec<bool>,
    kinds: Vec<Kind>,
    start: u32,
}

#[derive(Clone, Copy, Debug)]
enum Kind {
    Head,
    Terminal,
    Concat,
    Alt,
    Repeat,
    Option,
}

impl EarleyParser {
    pub fn new(graph: &GrammarGraph) -> Self {
        let mut prods = Vec::new();
        let mut kinds = Vec::with_capacity(graph.len());
        for (id, node) in graph.nodes() {
            let lhs = id.0;
            let kids: Vec<Sym> = graph.children(id).map(|c| Sym::N(c.0)).collect();
            let kind = match node.def() {
                NodeDef::NonterminalHead(_) => {
                    prods.push(Prod { lhs, rhs: kids });
                    Kind::Head
                }
                NodeDef::Terminal(bytes) => {
                    prods.push(Prod {
                        lhs,
                        rhs: bytes.iter().map(|&b| Sym::B(b)).collect(),
                    });
                    Kind::Terminal
                }
                NodeDef::Concatenation(_) => {
                    prods.push(Prod { lhs, rhs: kids });
                    Kind::Concat
                }
                NodeDef::Alternation(_) => {
                    // one production per variant, in variant order
                    for k in kids {
                        prods.push(Prod { lhs, rhs: vec![k] });
                    }
                    Kind::Alt
                }
                NodeDef::Star => {
                    prods.push(Prod { lhs, rhs: vec![] });
                    prods.push(Prod {
                        lhs,
                        rhs: vec![Sym::N(lhs), kids[0]],
                    });
                    Kind::Repeat
                }
                NodeDef::Plus => {
                    prods.push(Prod {
                        lhs,
                        rhs: vec![kids[0]],
                    });
                    prods.push(Prod {
                        lhs,
                        rhs: vec![Sym::N(lhs), kids[0]],
                    });
                    Kind::Repeat
                }
                NodeDef::Range { lo, hi } => {
                    for n in lo..hi {
                        prods.push(Prod {
                            lhs,
                            rhs: vec![kids[0]; n],
                        });
                    }
                    Kind::Repeat
                }
                NodeDef::Option => {
                    prods.push(Prod { lhs, rhs: vec![] });
                    prods.push(Prod {
                        lhs,
                        rhs: vec![kids[0]],
                    });
                    Kind::Option
                }
            };
            kinds.push(kind);
        }
        let mut by_lhs = vec![Vec::new(); graph.len()];
        for (i, p) in prods.iter().enumerate() {
            by_lhs[p.lhs as usize].push(i as u32);
        }
        let mut nullable = vec![false; graph.len()];
        loop {
            let mut changed = false;
            for p in &prods {
                if !nullable[p.lhs as usize]
                    && p.rhs
                        .iter()
                        .all(|s| matches!(s, Sym::N(n) if nullable[*n as usize]))
                {
                    nullable[p.lhs as usize] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        EarleyParser {
            prods,
            by_lhs,
            nullable,
            kinds,
            start: graph.start().0,
        }
    }

    fn chart(&self, input: &[u8]) -> Result<Vec<EarleySet>, ParseError> {
        let n = input.len();
        let mut sets: Vec<EarleySet> = (0..=n).map(|_| EarleySet::default()).collect();
        for &p in &self.by_lhs[self.start as usize] {
            sets[0].add(
                Item {
                    prod: p,
                    dot: 0,
                    origin: 0,
                },
                &self.prods,
            );
        }
        let mut predicted = vec![u32::MAX; self.by_lhs.len()];
        for i in 0..=n {
            let mut k = 0;
            while k < sets[i].items.len() {
                let item = sets[i].items[k];
                k += 1;
                let prod = &self.prods[item.prod as usize];
                match prod.rhs.get(item.dot as usize) {
                    None => {
                        let origin = item.origin as usize;
                        let lhs = prod.lhs;
                        let waiting: Vec<u32> =
                            sets[origin].waiting.get(&lhs).cloned().unwrap_or_default();
                        for w in waiting {
                            let it = sets[origin].items[w as usize];
                            sets[i].add(
                                Item {
                                    dot: it.dot + 1,
                                    ..it
                                },
                                &self.prods,
                            );
                        }
                    }
                    Some(&Sym::N(s)) => {
                        if predicted[s as usize] != i as u32 {
                            predicted[s as usize] = i as u32;
                            for &p in &self.by_lhs[s as usize] {
                                sets[i].add(
                                    Item {
                                        prod: p,
                                        dot: 0,
                                        origin: i as u32,
                                    },
                                    &self.prods,
                                );
                            }
                        }
                        if self.nullable[s as usize] {
                            sets[i].add(
                                Item {
                                    dot: item.dot + 1,
                                    ..item
                                },
                                &self.prods,
                            );
                        }
                    }
                    Some(&Sym::B(b)) => {
                        if i < n && input[i] == b {
                            sets[i + 1].add(
                                Item {
                                    dot: item.dot + 1,
                                    ..item
                                },
                                &self.prods,
                            );
                        }
                    }
                }
            }
            if i < n && sets[i + 1].items.is_empty() {
                return Err(ParseError::Rejected(i));
            }
        }
        let accepted = sets[n].items.iter().any(|it| {
            let p = &self.prods[it.prod as usize];
            p.lhs == self.start && it.origin == 0 && it.dot as usize == p.rhs.len()
        });
        if accepted {
            Ok(sets)
        } else {
            Err(ParseError::Rejected(n))
        }
    }

    /// Whether `input` is in the language of the grammar.
    pub fn recognize(&self, input: &[u8]) -> bool {
        self.chart(input).is_ok()
    }

    /// Parses `input` into a dynamic derivation tree. For ambiguous inputs
    /// the first derivation in production order is returned.
    pub fn parse(&self, input: &[u8]) -> Result<DynNode, ParseError> {
        let sets = self.chart(input)?;
        let mut ends: HashMap<(u32, u32), Vec<u32>> = HashMap::new();
        for (j, set) in sets.iter().enumerate() {
            for it in &set.items {
                let p = &self.prods[it.prod as usize];
                if it.dot as usize == p.rhs.len() {
                    ends.entry((p.lhs, it.origin)).or_default().push(j as u32);
                }
            }
        }
        for v in ends.values_mut() {
            v.sort_unstable();
            v.dedup();
        }
        let mut ex = Extractor {
            parser: self,
            input,
            ends,
            active: HashSet::new(),
            failed: HashSet::new(),
            guard_hits: 0,
        };
        ex.derive(self.start, 0, input.len() as u32)
            .ok_or(ParseError::Extraction)
    }

    /// Parses `input` into a tree of `backend`, which must be built from the
    /// same graph as this parser.
    pub fn parse_into<B: Backend>(&self, backend: &B, input: &[u8]) -> Result<B::Tree, ParseError> {
        let tree = self.parse(input)?;
        let script = choice_script(DynRef::new(backend.graph(), &tree));
        Ok(backend.replay(&script)?)
    }
}

struct Extractor<'p> {
    parser: &'p EarleyParser,
    input: &'p [u8],
    ends: HashMap<(u32, u32), Vec<u32>>,
    active: HashSet<(u32, u32, u32)>,
    failed: HashSet<(u32, u32, u32)>,
    guard_hits: usize,
}

impl Extractor<'_> {
    fn completes(&self, sym: u32, i: u32, j: u32) -> bool {
        (i == j && self.parser.nullable[sym as usize])
            || self
                .ends
                .get(&(sym, i))
                .is_some_and(|e| e.binary_search(&j).is_ok())
    }

    fn derive(&mut self, sym: u32, i: u32, j: u32) -> Option<DynNode> {
        let key = (sym, i, j);
        if !self.completes(sym, i, j) || self.failed.contains(&key) {
            return None;
        }
        if !self.active.insert(key) {
            self.guard_hits += 1;
            return None;
        }
        let hits = self.guard_hits;
        let mut result = None;
        for (variant, &p) in self.parser.by_lhs[sym as usize].iter().enumerate() {
            let rhs = &self.parser.prods[p as usize].rhs;
            if let Some(children) = self.split(rhs, 0, i, j) {
                result = Some(self.build(sym, p, variant, children));
                break;
            }
        }
        self.active.remove(&key);
        if result.is_none() && hits == self.guard_hits {
            self.failed.insert(key);
        }
        result
    }

    fn split(&mut self, rhs: &[Sym], k: usize, pos: u32, j: u32) -> Option<Vec<DynNode>> {
        let Some(&sym) = rhs.get(k) else {
            return (pos == j).then(Vec::new);
        };
        match sym {
            Sym::B(b) => {
                if pos < j && self.input[pos as usize] == b {
                    self.split(rhs, k + 1, pos + 1, j)
                } else {
                    None
                }
            }
            Sym::N(s) => {
                let candidates: Vec<u32> = if k + 1 == rhs.len() {
                    vec![j]
                } else {
                    let mut c: Vec<u32> = self
                        .ends
                        .get(&(s, pos))
                        .map(|e| e.iter().copied().filter(|&e| e <= j).collect())
                        .unwrap_or_default();
                    if self.parser.nullable[s as usize] && c.first() != Some(&pos) {
                        c.insert(0, pos);
                    }
                    c
                };
                for e in candidates {
                    if !self.completes(s, pos, e) {
                        continue;
                    }
                    let Some(rest) = self.split(rhs, k + 1, e, j) else {
                        continue;
                    };
                    let Some(child) = self.derive(s, pos, e) else {
                        continue;
                    };
                    let mut out = Vec::with_capacity(rest.len() + 1);
                    out.push(child);
                    out.extend(rest);
                    return Some(out);
                }
                None
            }
        }
    }

    fn build(&self, sym: u32, prod: u32, variant: usize, mut children: Vec<DynNode>) -> DynNode {
        let id = NodeId(sym);
        let payload = match self.parser.kinds[sym as usize] {
            Kind::Head => Payload::RefChild(Box::new(children.pop().expect("head child"))),
            Kind::Terminal => Payload::TerminalLeaf,
            Kind::Concat => Payload::ConcatChildren(children),
            Kind::Alt => {
                Payload::VariantChoice(variant, Box::new(children.pop().expect("variant child")))
            }
            Kind::Option => Payload::OptionalChild(children.pop().map(Box::new)),
            Kind::Repeat => {
                let rhs = &self.parser.prods[prod as usize].rhs;
                if rhs.first() == Some(&Sym::N(sym)) {
                    // left recursion: the first child is the shorter repetition
                    let mut iter = children.into_iter();
                    let head = iter.next().expect("recursive child");
                    let Payload::RepChildren(mut items) = head.payload else {
                        unreachable!("repetition payload")
                    };
                    items.extend(iter);
                    Payload::RepChildren(items)
                } else {
                    Payload::RepChildren(children)
                }
            }
        };
        DynNode { id, payload }
    }
}
