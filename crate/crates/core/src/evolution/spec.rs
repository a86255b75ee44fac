use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::builtin::{cardinality_eq_k, cardinality_equal, count_bound, node_goal};
use super::{Constraint, ConstraintError};
use crate::graph::GrammarGraph;
use crate::runtime::Backend;

/// One entry of a constraint file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scope: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selector: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<usize>,
    /// Parameters of user-registered kinds.
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl ConstraintSpec {
    pub fn new(kind: &str) -> Self {
        ConstraintSpec {
            kind: kind.to_string(),
            ..Default::default()
        }
    }

    fn need<T: Clone>(&self, v: &Option<T>, param: &'static str) -> Result<T, ConstraintError> {
        v.clone().ok_or_else(|| ConstraintError::MissingParameter {
            kind: self.kind.clone(),
            param,
        })
    }
}

/// A list of constraints, written as TOML (`[[constraint]]` tables) or JSON
/// (an array, or an object with a `constraint` array).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSpecFile {
    #[serde(default, rename = "constraint", alias = "constraints")]
    pub constraints: Vec<ConstraintSpec>,
}

impl ConstraintSpecFile {
    pub fn parse(text: &str) -> Result<Self, ConstraintError> {
        let trimmed = text.trim_start();
        if trimmed.starts_with('[') && !trimmed.starts_with("[[") {
            let constraints =
                serde_json::from_str(text).map_err(|e| ConstraintError::Invalid(e.to_string()))?;
            return Ok(ConstraintSpecFile { constraints });
        }
        if trimmed.starts_with('{') {
            return serde_json::from_str(text).map_err(|e| ConstraintError::Invalid(e.to_string()));
        }
        toml::from_str(text).map_err(|e| ConstraintError::Invalid(e.to_string()))
    }
}

pub type ConstraintFactory<B> = Box<
    dyn Fn(&ConstraintSpec, &GrammarGraph) -> Result<Box<dyn Constraint<B>>, ConstraintError>
        + Send
        + Sync,
>;

/// Maps constraint kinds to constructors. Comes with the built-in kinds;
/// user code adds its own with [`ConstraintRegistry::register`].
pub struct ConstraintRegistry<B: Backend> {
    factories: BTreeMap<String, ConstraintFactory<B>>,
}

impl<B: Backend + 'static> Default for ConstraintRegistry<B> {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl<B: Backend + 'static> ConstraintRegistry<B> {
    pub fn empty() -> Self {
        ConstraintRegistry {
            factories: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register("cardinality_equal", |s, g| {
            Ok(Box::new(cardinality_equal(
                g,
                &s.need(&s.scope, "scope")?,
                &s.need(&s.selector, "selector")?,
            )?))
        });
        r.register("cardinality_eq_k", |s, g| {
            Ok(Box::new(cardinality_eq_k(
                g,
                &s.need(&s.scope, "scope")?,
                &s.need(&s.selector, "selector")?,
                s.need(&s.k, "k")?,
            )?))
        });
        r.register("node_goal", |s, _| {
            Ok(Box::new(node_goal(s.need(&s.target, "target")?)))
        });
        r.register("count_bound", |s, g| {
            Ok(Box::new(count_bound(
                g,
                &s.need(&s.selector, "selector")?,
                s.min.unwrap_or(0),
                s.max.unwrap_or(usize::MAX),
            )?))
        });
        r
    }

    pub fn register<F>(&mut self, kind: &str, factory: F)
    where
        F: Fn(&ConstraintSpec, &GrammarGraph) -> Result<Box<dyn Constraint<B>>, ConstraintError>
            + Send
            + Sync
            + 'static,
    {
        self.factories.insert(kind.to_string(), Box::new(factory));
    }

    pub fn kinds(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn build(
        &self,
        spec: &ConstraintSpec,
        graph: &GrammarGraph,
    ) -> Result<Box<dyn Constraint<B>>, ConstraintError> {
        let f = self
            .factories
            .get(&spec.kind)
            .ok_or_else(|| ConstraintError::UnknownKind(spec.kind.clone()))?;
        f(spec, graph)
    }

    pub fn build_all(
        &self,
        file: &ConstraintSpecFile,
        graph: &GrammarGraph,
    ) -> Result<Vec<Box<dyn Constraint<B>>>, ConstraintError> {
        file.constraints
            .iter()
            .map(|s| self.build(s, graph))
            .collect()
    }
}
