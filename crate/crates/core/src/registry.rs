//! Name-keyed registries for interchangeable strategies.
//!
//! CFAR statistics, enhancement stages and builtin scenes are each selected
//! at runtime by name (from the CLI or a run config). A [`Registry`] maps
//! those names to constructors returning boxed trait objects.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

pub type Factory<T> = fn() -> Box<T>;

pub struct Registry<T: ?Sized> {
    kind: &'static str,
    entries: BTreeMap<&'static str, Factory<T>>,
}

impl<T: ?Sized> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: BTreeMap::new(),
        }
    }

    /// Register (or replace) a constructor under `name`.
    pub fn register(&mut self, name: &'static str, factory: Factory<T>) -> &mut Self {
        self.entries.insert(name, factory);
        self
    }

    pub fn with(mut self, name: &'static str, factory: Factory<T>) -> Self {
        self.register(name, factory);
        self
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    /// Registered names in sorted order.
    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    pub fn create(&self, name: &str) -> Result<Box<T>> {
        match self.entries.get(name) {
            Some(f) => Ok(f()),
            None => Err(Error::Unknown {
                kind: self.kind,
                name: name.to_string(),
                allowed: self.names().join(", "),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    trait Named {
        fn name(&self) -> &'static str;
    }
    struct A;
    impl Named for A {
        fn name(&self) -> &'static str {
            "a"
        }
    }

    #[test]
    fn create_and_unknown() {
        let reg: Registry<dyn Named> = Registry::new("thing").with("a", || Box::new(A) as Box<dyn Named>);
        assert_eq!(reg.create("a").unwrap().name(), "a");
        let err = reg.create("b").err().unwrap().to_string();
        assert!(err.contains("unknown thing 'b'"), "{err}");
        assert!(err.contains("a"));
    }
}
