use std::fmt;

use serde::{Deserialize, Serialize};

/// Stable identifier of one training example within a dataset.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct ExampleId(pub u64);

impl ExampleId {
    #[inline]
    pub fn get(self) -> u64 {
        self.0
    }
}

impl fmt::Display for ExampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u64> for ExampleId {
    fn from(v: u64) -> Self {
        ExampleId(v)
    }
}
