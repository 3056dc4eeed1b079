//! JSON documents for models, matrices and densities.
//!
//! Complex entries are `[re, im]` pairs; plain numbers are accepted as real
//! entries on input. QTM sites are 1-based (`"i->j"` keys); lattice windows
//! use signed labels.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::linalg::{c, CMat};
use crate::qtm::Qtm;
use crate::walk::{Boundary, LatticeWindow, Walk};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("{field}: {message}")]
    Field { field: String, message: String },
    #[error("validation failed: {0}")]
    Validation(#[from] Error),
}

impl From<serde_json::Error> for ModelError {
    fn from(e: serde_json::Error) -> Self {
        ModelError::Parse { line: e.line(), column: e.column(), message: e.to_string() }
    }
}

fn field(name: impl Into<String>, message: impl Into<String>) -> ModelError {
    ModelError::Field { field: name.into(), message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Complex([f64; 2]),
    Real(f64),
}

/// Row-major list of rows.
pub type MatrixDocument = Vec<Vec<Entry>>;

pub fn matrix_from_document(name: &str, doc: &MatrixDocument) -> Result<CMat, ModelError> {
    let rows = doc.len();
    if rows == 0 {
        return Err(field(name, "matrix is empty"));
    }
    let cols = doc[0].len();
    if let Some(r) = doc.iter().position(|row| row.len() != cols) {
        return Err(field(name, format!("row {} has {} entries, expected {cols}", r + 1, doc[r].len())));
    }
    Ok(CMat::from_fn(rows, cols, |r, j| match doc[r][j] {
        Entry::Complex([a, b]) => c(a, b),
        Entry::Real(a) => c(a, 0.0),
    }))
}

pub fn matrix_to_document(m: &CMat) -> MatrixDocument {
    (0..m.nrows()).map(|r| (0..m.ncols()).map(|j| Entry::Complex([m[(r, j)].re, m[(r, j)].im])).collect()).collect()
}

fn square(name: &str, doc: &MatrixDocument, k: usize) -> Result<CMat, ModelError> {
    let m = matrix_from_document(name, doc)?;
    if m.nrows() != k || m.ncols() != k {
        return Err(field(name, format!("expected a {k}x{k} matrix, got {}x{}", m.nrows(), m.ncols())));
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryName {
    #[default]
    Absorbing,
    HardError,
}

impl From<BoundaryName> for Boundary {
    fn from(b: BoundaryName) -> Self {
        match b {
            BoundaryName::Absorbing => Boundary::Absorbing,
            BoundaryName::HardError => Boundary::HardError,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WalkKind {
    NearestNeighbor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkDocument {
    pub kind: WalkKind,
    pub window: [i64; 2],
    pub left: MatrixDocument,
    pub right: MatrixDocument,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub left_i: BTreeMap<String, MatrixDocument>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub right_i: BTreeMap<String, MatrixDocument>,
    #[serde(default)]
    pub boundary: BoundaryName,
}

/// Either a block-listed QTM or a nearest-neighbour window on the integers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_sites: Option<usize>,
    pub internal_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<BTreeMap<String, MatrixDocument>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub walk: Option<WalkDocument>,
}

/// A parsed model.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Qtm(Qtm),
    Window(LatticeWindow),
}

impl Walk for Model {
    fn qtm(&self) -> &Qtm {
        match self {
            Model::Qtm(q) => q,
            Model::Window(w) => w.qtm(),
        }
    }

    fn label(&self, index: usize) -> i64 {
        match self {
            Model::Qtm(q) => q.label(index),
            Model::Window(w) => w.label(index),
        }
    }

    fn index_of(&self, label: i64) -> crate::Result<usize> {
        match self {
            Model::Qtm(q) => q.index_of(label),
            Model::Window(w) => w.index_of(label),
        }
    }

    fn edge_sites(&self) -> Vec<usize> {
        match self {
            Model::Qtm(q) => q.edge_sites(),
            Model::Window(w) => w.edge_sites(),
        }
    }

    fn boundary(&self) -> Boundary {
        match self {
            Model::Qtm(q) => Walk::boundary(q),
            Model::Window(w) => w.boundary(),
        }
    }
}

fn parse_key(key: &str) -> Result<(usize, usize), ModelError> {
    let bad = || field(format!("blocks.{key}"), "keys must look like \"i->j\" with 1-based sites");
    let (a, b) = key.split_once("->").ok_or_else(bad)?;
    let i: usize = a.trim().parse().map_err(|_| bad())?;
    let j: usize = b.trim().parse().map_err(|_| bad())?;
    if i == 0 || j == 0 {
        return Err(bad());
    }
    Ok((i - 1, j - 1))
}

fn parse_label_map(
    name: &str,
    map: &BTreeMap<String, MatrixDocument>,
    k: usize,
) -> Result<BTreeMap<i64, CMat>, ModelError> {
    map.iter()
        .map(|(key, m)| {
            let x: i64 = key.trim().parse().map_err(|_| field(format!("{name}.{key}"), "keys must be integers"))?;
            Ok((x, square(&format!("{name}.{key}"), m, k)?))
        })
        .collect()
}

impl ModelDocument {
    pub fn build(&self) -> Result<Model, ModelError> {
        let k = self.internal_dim;
        if k == 0 {
            return Err(field("internal_dim", "must be positive"));
        }
        match (&self.blocks, &self.walk) {
            (Some(blocks), None) => {
                let n = self.n_sites.ok_or_else(|| field("n_sites", "required when blocks are given"))?;
                let mut list = Vec::with_capacity(blocks.len());
                for (key, m) in blocks {
                    list.push((parse_key(key)?, square(&format!("blocks.{key}"), m, k)?));
                }
                Ok(Model::Qtm(Qtm::new(n, k, list)?))
            }
            (None, Some(w)) => {
                let [lo, hi] = w.window;
                if let Some(n) = self.n_sites {
                    if n as i64 != hi - lo + 1 {
                        return Err(field("n_sites", "does not match the window size"));
                    }
                }
                let left = square("walk.left", &w.left, k)?;
                let right = square("walk.right", &w.right, k)?;
                let li = parse_label_map("walk.left_i", &w.left_i, k)?;
                let ri = parse_label_map("walk.right_i", &w.right_i, k)?;
                for x in li.keys().chain(ri.keys()) {
                    if *x <= lo || *x >= hi {
                        return Err(field(format!("walk override {x}"), "must be an interior site of the window"));
                    }
                }
                let window = LatticeWindow::from_site_fn(lo, hi, w.boundary.into(), |x| {
                    (li.get(&x).unwrap_or(&left).clone(), ri.get(&x).unwrap_or(&right).clone())
                })?;
                Ok(Model::Window(window))
            }
            (Some(_), Some(_)) => Err(field("walk", "give either blocks or walk, not both")),
            (None, None) => Err(field("blocks", "a model needs blocks or a walk")),
        }
    }

    /// Block-listed document for any QTM.
    pub fn from_qtm(q: &Qtm) -> Self {
        let blocks = q
            .blocks()
            .map(|((i, j), m)| (format!("{}->{}", i + 1, j + 1), matrix_to_document(m)))
            .collect();
        ModelDocument { n_sites: Some(q.sites()), internal_dim: q.dim(), blocks: Some(blocks), walk: None }
    }
}

pub fn parse_model(text: &str) -> Result<Model, ModelError> {
    serde_json::from_str::<ModelDocument>(text)?.build()
}

pub fn emit_qtm(q: &Qtm) -> String {
    serde_json::to_string_pretty(&ModelDocument::from_qtm(q)).expect("model documents always serialize")
}

pub fn parse_matrix(name: &str, text: &str) -> Result<CMat, ModelError> {
    let doc: MatrixDocument = serde_json::from_str(text)?;
    matrix_from_document(name, &doc)
}

/// `{"left": …, "right": …}`: a commuting pair for the closed-form solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairDocument {
    pub left: MatrixDocument,
    pub right: MatrixDocument,
}

impl PairDocument {
    pub fn matrices(&self) -> Result<(CMat, CMat), ModelError> {
        let l = matrix_from_document("left", &self.left)?;
        let k = l.nrows();
        Ok((square("left", &self.left, k)?, square("right", &self.right, k)?))
    }
}

/// `{"sites": [{"left": …, "right": …}, …]}` for sites `1, 2, …`; the last entry repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BirthDeathDocument {
    pub sites: Vec<PairDocument>,
}

impl BirthDeathDocument {
    pub fn matrices(&self) -> Result<Vec<(CMat, CMat)>, ModelError> {
        self.sites.iter().map(PairDocument::matrices).collect()
    }
}
