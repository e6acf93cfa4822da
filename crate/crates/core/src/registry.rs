//! Name-keyed registries for interchangeable numerical strategies.

use std::sync::Arc;

use crate::error::{Error, Result};

type Factory<T> = fn() -> Arc<T>;

/// Maps strategy names to constructors. The first registered entry is the
/// default.
pub struct Registry<T: ?Sized> {
    kind: &'static str,
    entries: Vec<(&'static str, Factory<T>)>,
}

impl<T: ?Sized> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Registry {
            kind,
            entries: Vec::new(),
        }
    }

    pub fn register(mut self, name: &'static str, factory: Factory<T>) -> Self {
        assert!(
            self.entries.iter().all(|(n, _)| *n != name),
            "duplicate {} strategy `{name}`",
            self.kind
        );
        self.entries.push((name, factory));
        self
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|(n, _)| *n).collect()
    }

    pub fn default_name(&self) -> &'static str {
        self.entries[0].0
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.iter().any(|(n, _)| *n == name)
    }

    pub fn create(&self, name: &str) -> Result<Arc<T>> {
        self.entries
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, make)| make())
            .ok_or_else(|| Error::UnknownStrategy {
                kind: self.kind,
                name: name.to_string(),
                available: self.names().join(", "),
            })
    }
}
