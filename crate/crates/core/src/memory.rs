//! Bounded LIFO stack of past decisions, read most-recent-first.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_CAPACITY: usize = 64;
pub const DEFAULT_RECALL_STEPS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub timestep: u64,
    pub action_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl DecisionRecord {
    pub fn new(timestep: u64, action_text: impl Into<String>) -> Self {
        Self {
            timestep,
            action_text: action_text.into(),
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// One-line rendering used in the prompt's memory slot.
    pub fn line(&self) -> String {
        match &self.note {
            Some(n) => format!("t={}: {} ({n})", self.timestep, self.action_text),
            None => format!("t={}: {}", self.timestep, self.action_text),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MemoryError {
    #[error("timestep {got} does not follow top timestep {top}")]
    NonMonotone { top: u64, got: u64 },
    #[error("capacity must be positive")]
    ZeroCapacity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryStack {
    records: VecDeque<DecisionRecord>,
    capacity: Option<usize>,
}

impl Default for MemoryStack {
    fn default() -> Self {
        Self {
            records: VecDeque::new(),
            capacity: Some(DEFAULT_CAPACITY),
        }
    }
}

impl MemoryStack {
    pub fn with_capacity(capacity: Option<usize>) -> Result<Self, MemoryError> {
        if capacity == Some(0) {
            return Err(MemoryError::ZeroCapacity);
        }
        Ok(Self {
            records: VecDeque::new(),
            capacity,
        })
    }

    pub fn capacity(&self) -> Option<usize> {
        self.capacity
    }

    pub fn push(&mut self, record: DecisionRecord) -> Result<(), MemoryError> {
        if let Some(top) = self.records.back() {
            if record.timestep <= top.timestep {
                return Err(MemoryError::NonMonotone {
                    top: top.timestep,
                    got: record.timestep,
                });
            }
        }
        self.records.push_back(record);
        if let Some(cap) = self.capacity {
            while self.records.len() > cap {
                self.records.pop_front();
            }
        }
        Ok(())
    }

    /// The newest `steps` records, top first. Does not modify the stack.
    pub fn recall(&self, steps: usize) -> Vec<DecisionRecord> {
        self.records.iter().rev().take(steps).cloned().collect()
    }

    pub fn depth(&self) -> usize {
        self.records.len()
    }

    pub fn top(&self) -> Option<&DecisionRecord> {
        self.records.back()
    }

    /// Bottom-to-top iteration, for persistence.
    pub fn iter(&self) -> impl Iterator<Item = &DecisionRecord> {
        self.records.iter()
    }

    pub fn to_jsonl(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
            .collect()
    }
}
