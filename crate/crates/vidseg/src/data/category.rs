use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One class of the catalog. `is_thing` distinguishes countable object
/// classes from amorphous stuff classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    #[serde(rename = "id")]
    pub class_id: u32,
    pub name: String,
    #[serde(rename = "isthing")]
    pub is_thing: bool,
}

/// Class catalog with thing/stuff flags. Class id 0 is reserved for void
/// and may not appear in the table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryTable {
    entries: Vec<Category>,
    by_id: BTreeMap<u32, usize>,
}

impl CategoryTable {
    pub fn new(entries: Vec<Category>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::validation("category table must not be empty"));
        }
        let mut by_id = BTreeMap::new();
        for (idx, entry) in entries.iter().enumerate() {
            if entry.class_id == 0 {
                return Err(Error::validation(
                    "class id 0 found in category table: void is reserved",
                ));
            }
            if by_id.insert(entry.class_id, idx).is_some() {
                return Err(Error::validation(format!(
                    "duplicate class id {} in category table",
                    entry.class_id
                )));
            }
        }
        Ok(CategoryTable { entries, by_id })
    }

    pub fn entries(&self) -> &[Category] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, class_id: u32) -> bool {
        self.by_id.contains_key(&class_id)
    }

    pub fn get(&self, class_id: u32) -> Option<&Category> {
        self.by_id.get(&class_id).map(|&idx| &self.entries[idx])
    }

    /// `None` when the class is unknown.
    pub fn is_thing(&self, class_id: u32) -> Option<bool> {
        self.get(class_id).map(|c| c.is_thing)
    }

    pub fn thing_count(&self) -> usize {
        self.entries.iter().filter(|c| c.is_thing).count()
    }

    pub fn stuff_count(&self) -> usize {
        self.entries.iter().filter(|c| !c.is_thing).count()
    }

    pub fn class_ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.by_id.keys().copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cat(id: u32, thing: bool) -> Category {
        Category {
            class_id: id,
            name: format!("class_{id}"),
            is_thing: thing,
        }
    }

    #[test]
    fn single_entry_table() {
        let t = CategoryTable::new(vec![cat(1, true)]).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.thing_count(), 1);
        assert_eq!(t.stuff_count(), 0);
    }

    #[test]
    fn duplicate_id_rejected() {
        let err = CategoryTable::new(vec![cat(1, true), cat(1, false)]).unwrap_err();
        assert!(err.to_string().contains("duplicate class id 1"));
    }

    #[test]
    fn void_id_rejected() {
        let err = CategoryTable::new(vec![cat(0, true)]).unwrap_err();
        assert!(err.to_string().contains("void is reserved"));
    }

    #[test]
    fn empty_rejected() {
        assert!(CategoryTable::new(vec![]).is_err());
    }
}
