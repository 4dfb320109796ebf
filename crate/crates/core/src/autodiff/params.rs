use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One named block of a flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub start: usize,
    pub end: usize,
    pub shape: Vec<usize>,
}

impl ParamEntry {
    pub fn range(&self) -> Range<usize> {
        self.start..self.end
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

/// Registry mapping layer names to contiguous index ranges.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ParamLayout {
    entries: Vec<ParamEntry>,
}

impl ParamLayout {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append a block; its range starts where the previous one ended.
    pub fn push(&mut self, name: impl Into<String>, shape: Vec<usize>) -> &ParamEntry {
        let start = self.len();
        let size: usize = shape.iter().product();
        self.entries.push(ParamEntry {
            name: name.into(),
            start,
            end: start + size,
            shape,
        });
        self.entries.last().expect("just pushed")
    }

    /// Total parameter count `p`.
    pub fn len(&self) -> usize {
        self.entries.last().map_or(0, |e| e.end)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn get(&self, name: &str) -> Option<&ParamEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Ranges must be contiguous, disjoint and cover `[0, p)`.
    pub fn validate(&self) -> Result<()> {
        let mut cursor = 0;
        for e in &self.entries {
            if e.start != cursor || e.end < e.start || e.len() != e.shape.iter().product::<usize>() {
                return Err(Error::Dimension(format!(
                    "registry entry `{}` [{}, {}) does not continue at {cursor}",
                    e.name, e.start, e.end
                )));
            }
            cursor = e.end;
        }
        Ok(())
    }
}

/// Flat parameter vector plus its layer registry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub registry: ParamLayout,
    pub values: Vec<f64>,
}

impl ParamVector {
    pub fn new(registry: ParamLayout, values: Vec<f64>) -> Result<Self> {
        registry.validate()?;
        if values.len() != registry.len() {
            return Err(Error::Dimension(format!(
                "registry covers {} parameters, got {} values",
                registry.len(),
                values.len()
            )));
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(ParamVector { registry, values })
    }

    pub fn zeros(registry: ParamLayout) -> Self {
        let values = vec![0.0; registry.len()];
        ParamVector { registry, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn block(&self, name: &str) -> Option<&[f64]> {
        self.registry.get(name).map(|e| &self.values[e.range()])
    }

    pub fn block_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let range = self.registry.get(name)?.range();
        Some(&mut self.values[range])
    }

    pub fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        ParamVector {
            registry: self.registry.clone(),
            values,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_contiguous() {
        let mut l = ParamLayout::new();
        l.push("a.weight", vec![2, 3]);
        l.push("a.bias", vec![3]);
        assert_eq!(l.len(), 9);
        assert_eq!(l.get("a.bias").unwrap().range(), 6..9);
        l.validate().unwrap();
    }

    #[test]
    fn rejects_non_finite_values() {
        let mut l = ParamLayout::new();
        l.push("x", vec![2]);
        let err = ParamVector::new(l, vec![0.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { index: 1, .. }));
    }
}
