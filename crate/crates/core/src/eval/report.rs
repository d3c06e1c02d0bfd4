use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{aggregate_recall, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecallCell {
    pub liberal: String,
    pub conservative: String,
    pub method: String,
    pub hits: usize,
    pub k: usize,
    pub recall: f64,
}

impl RecallCell {
    /// `hits/k` in lowest terms, `0` and `1` bare.
    pub fn fraction(&self) -> String {
        fraction(self.hits, self.k)
    }
}

fn fraction(hits: usize, k: usize) -> String {
    if hits == 0 {
        return "0".into();
    }
    if hits == k {
        return "1".into();
    }
    let (mut a, mut b) = (hits, k);
    while b != 0 {
        (a, b) = (b, a % b);
    }
    format!("{}/{}", hits / a, k / a)
}

/// Recall per (liberal source, conservative source, method): liberal sources
/// are rows, each conservative source a column group with one column per
/// method.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RecallTable {
    pub methods: Vec<String>,
    pub liberal: Vec<String>,
    pub conservative: Vec<String>,
    pub cells: Vec<RecallCell>,
}

impl RecallTable {
    pub fn insert(
        &mut self,
        liberal: &str,
        conservative: &str,
        method: &str,
        hits: usize,
        k: usize,
    ) {
        for (list, value) in [
            (&mut self.methods, method),
            (&mut self.liberal, liberal),
            (&mut self.conservative, conservative),
        ] {
            if !list.iter().any(|v| v == value) {
                list.push(value.to_string());
            }
        }
        self.cells.retain(|c| {
            !(c.liberal == liberal && c.conservative == conservative && c.method == method)
        });
        self.cells.push(RecallCell {
            liberal: liberal.into(),
            conservative: conservative.into(),
            method: method.into(),
            hits,
            k,
            recall: hits as f64 / k as f64,
        });
    }

    pub fn get(&self, liberal: &str, conservative: &str, method: &str) -> Option<&RecallCell> {
        self.cells
            .iter()
            .find(|c| c.liberal == liberal && c.conservative == conservative && c.method == method)
    }

    /// Mean recall of one method over all of its pairs.
    pub fn average(&self, method: &str) -> Result<f64> {
        let values: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| c.method == method)
            .map(|c| c.recall)
            .collect();
        aggregate_recall(&values)
    }

    pub fn averages(&self) -> BTreeMap<String, f64> {
        self.methods
            .iter()
            .filter_map(|m| self.average(m).ok().map(|a| (m.clone(), a)))
            .collect()
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| |");
        for c in &self.conservative {
            for m in &self.methods {
                let _ = write!(out, " {c} {m} |");
            }
        }
        out.push_str("\n|---|");
        for _ in 0..self.conservative.len() * self.methods.len() {
            out.push_str("---|");
        }
        out.push('\n');
        for l in &self.liberal {
            let _ = write!(out, "| {l} |");
            for c in &self.conservative {
                for m in &self.methods {
                    let cell = self
                        .get(l, c, m)
                        .map_or_else(|| "-".to_string(), RecallCell::fraction);
                    let _ = write!(out, " {cell} |");
                }
            }
            out.push('\n');
        }
        out.push_str("\n| Method | Average recall |\n|---|---|\n");
        for m in &self.methods {
            if let Ok(avg) = self.average(m) {
                let _ = writeln!(out, "| {m} | {avg:.4} |");
            }
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "methods": self.methods,
            "liberal": self.liberal,
            "conservative": self.conservative,
            "cells": self.cells,
            "average": self.averages(),
        })
    }
}
