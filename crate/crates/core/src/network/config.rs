use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ElementState {
    /// Terminated in an individually chosen reactance.
    Tunable,
    /// Open circuit (zero current).
    Open,
    /// Short circuit (zero voltage).
    Shorted,
    /// Connected in parallel with the other members of the same cluster, sharing one reactance.
    Cluster(u32),
}

/// Per-element termination pattern of the surface.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SurfaceConfig {
    pub states: Vec<ElementState>,
    pub seed: u64,
    pub label: String,
}

/// One tunable reactance of a configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Dof {
    Element(usize),
    Cluster { id: u32, members: Vec<usize> },
}

impl Dof {
    /// Smallest element index this reactance terminates.
    pub fn first_element(&self) -> usize {
        match self {
            Dof::Element(i) => *i,
            Dof::Cluster { members, .. } => members[0],
        }
    }

    pub fn members(&self) -> &[usize] {
        match self {
            Dof::Element(i) => core::slice::from_ref(i),
            Dof::Cluster { members, .. } => members,
        }
    }
}

impl SurfaceConfig {
    pub fn new(states: Vec<ElementState>, seed: u64, label: impl Into<String>) -> Result<Self> {
        let c = Self {
            states,
            seed,
            label: label.into(),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn all(state: ElementState, n: usize, label: impl Into<String>) -> Self {
        Self {
            states: alloc::vec![state; n],
            seed: 0,
            label: label.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// A configuration without any reactance is only meaningful as the all-open reference.
    pub fn validate(&self) -> Result<()> {
        if self.states.is_empty() {
            return Err(Error::InvalidConfig("no surface elements".into()));
        }
        let has_dof = self
            .states
            .iter()
            .any(|s| matches!(s, ElementState::Tunable | ElementState::Cluster(_)));
        if !has_dof && !self.is_reference() {
            return Err(Error::InvalidConfig(format!(
                "configuration '{}' has no tunable element and is not the all-open reference",
                self.label
            )));
        }
        Ok(())
    }

    pub fn is_reference(&self) -> bool {
        self.states.iter().all(|s| *s == ElementState::Open)
    }

    pub fn clusters(&self) -> BTreeMap<u32, Vec<usize>> {
        let mut map: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for (i, s) in self.states.iter().enumerate() {
            if let ElementState::Cluster(id) = s {
                map.entry(*id).or_default().push(i);
            }
        }
        map
    }

    /// Reactance degrees of freedom ordered by their first element index.
    pub fn dofs(&self) -> Vec<Dof> {
        let clusters = self.clusters();
        let mut out = Vec::new();
        for (i, s) in self.states.iter().enumerate() {
            match s {
                ElementState::Tunable => out.push(Dof::Element(i)),
                ElementState::Cluster(id) => {
                    let members = &clusters[id];
                    if members[0] == i {
                        out.push(Dof::Cluster {
                            id: *id,
                            members: members.clone(),
                        });
                    }
                }
                _ => {}
            }
        }
        out
    }

    pub fn count(&self, state: ElementState) -> usize {
        self.states.iter().filter(|s| **s == state).count()
    }

    pub fn indices(&self, state: ElementState) -> Vec<usize> {
        (0..self.states.len())
            .filter(|&i| self.states[i] == state)
            .collect()
    }
}
