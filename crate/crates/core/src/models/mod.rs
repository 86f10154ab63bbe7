//! Built-in compartmental models and observable extraction.

mod observables;
mod seir;
mod sir;

pub use observables::{incidence, prevalence};
pub use seir::{forcing, seir_jacobians, seir_rhs, Seir, SeirInputs, SEIR_VARYING};
pub use sir::{sir_jacobians, sir_rhs, Sir, SirInputs};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("output times are not a daily grid starting one day after t0 = {t0} (offending index {index})")]
    GridMismatch { t0: f64, index: usize },
    #[error("layout has no `{0}` compartment")]
    MissingCompartment(&'static str),
    #[error("invalid model input: {0}")]
    InvalidInput(String),
}

/// Names of the state components, in state-vector order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompartmentLayout {
    names: Vec<&'static str>,
}

impl CompartmentLayout {
    pub fn sir() -> Self {
        Self {
            names: vec!["S", "I", "R"],
        }
    }

    /// SIR augmented with the cumulative flux `C` into `I`.
    pub fn sir_with_incidence() -> Self {
        Self {
            names: vec!["S", "I", "R", "C"],
        }
    }

    pub fn seir() -> Self {
        Self {
            names: vec!["S", "E", "I", "R", "C"],
        }
    }

    /// A layout for a user-defined system. Names must be distinct.
    pub fn custom(names: Vec<&'static str>) -> Result<Self, ModelError> {
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(ModelError::InvalidInput(format!("duplicate compartment `{n}`")));
            }
        }
        Ok(Self { names })
    }

    pub fn names(&self) -> &[&'static str] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &'static str) -> Result<usize, ModelError> {
        self.names
            .iter()
            .position(|n| *n == name)
            .ok_or(ModelError::MissingCompartment(name))
    }

    /// Compartments that partition the population (everything but `C`).
    pub fn population_indices(&self) -> Vec<usize> {
        (0..self.names.len()).filter(|&i| self.names[i] != "C").collect()
    }
}
