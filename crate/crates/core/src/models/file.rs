//! JSON model and observable files.
//!
//! Model file, tagged by `"type"`:
//!
//! ```json
//! {"type": "dense", "matrix": [[[1, 0], [0, 0]], [[0, 0], [-1, 0]]], "e_max_pad": 0.0}
//! {"type": "tfim", "sites": 2, "coupling": 1.0, "field": 0.5, "longitudinal": 0.0, "periodic": false}
//! {"type": "classical-ising", "rows": 3, "cols": 3, "coupling": 1.0, "field": 0.0, "periodic": true}
//! {"type": "classical", "energies": [0.0, 1.0], "kernel": "uniform-others"}
//! ```
//!
//! Dense matrices are row-major nested arrays of `[re, im]` pairs. Classical
//! models can also be used as diagonal (commuting) quantum Hamiltonians.
//!
//! Observable file (the observable acts on the first tensor factor):
//!
//! ```json
//! {"rest_dim": 2, "basis": "computational", "values": [1.0, -1.0], "kernel": "uniform-others"}
//! ```
//!
//! `basis` is `"computational"`, `"hadamard"` (m = 2 only) or an m x m matrix of
//! `[re, im]` pairs whose columns are the basis vectors. `kernel` is the
//! proposal P(c|d) over subsystem outcomes: `"uniform"`, `"uniform-others"`,
//! `"single-flip"` (m a power of two) or `{"matrix": [[...]]}` with
//! `matrix[a][b] = P(a|b)`.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{builders, ClassicalSystem, LocalObservable, ProposalKernel};
use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix};

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

fn rest_default() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelFile {
    Dense {
        matrix: Vec<Vec<[f64; 2]>>,
        #[serde(default)]
        e_max_pad: f64,
    },
    Tfim {
        sites: usize,
        #[serde(default = "one")]
        coupling: f64,
        field: f64,
        #[serde(default)]
        longitudinal: f64,
        #[serde(default)]
        periodic: bool,
        #[serde(default)]
        e_max_pad: f64,
    },
    ClassicalIsing {
        rows: usize,
        cols: usize,
        #[serde(default = "one")]
        coupling: f64,
        #[serde(default)]
        field: f64,
        #[serde(default = "yes")]
        periodic: bool,
    },
    Classical {
        energies: Vec<f64>,
        #[serde(default)]
        kernel: Option<KernelSpec>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KernelSpec {
    Named(String),
    Matrix { matrix: Vec<Vec<f64>> },
}

impl KernelSpec {
    pub fn build(&self, k: usize) -> Result<ProposalKernel> {
        match self {
            KernelSpec::Named(name) => match name.as_str() {
                "uniform" => ProposalKernel::uniform(k),
                "uniform-others" => ProposalKernel::uniform_others(k),
                "single-flip" if k.is_power_of_two() => ProposalKernel::single_flip(k.trailing_zeros()),
                other => Err(Error::invalid(
                    "kernel",
                    format!("unknown or inapplicable kernel '{other}'"),
                )),
            },
            KernelSpec::Matrix { matrix } => {
                if matrix.len() != k || matrix.iter().any(|row| row.len() != k) {
                    return Err(Error::DimensionMismatch {
                        expected: k,
                        actual: matrix.len(),
                    });
                }
                ProposalKernel::from_matrix(DMatrix::from_fn(k, k, |a, b| matrix[a][b]))
            }
        }
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, what: &'static str) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::invalid(what, format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::invalid(what, format!("{}: {e}", path.display())))
}

pub fn complex_matrix(rows: &[Vec<[f64; 2]>]) -> Result<CMatrix> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::invalid("matrix", "must be a non-empty square array"));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| c(rows[i][j][0], rows[i][j][1])))
}

impl ModelFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_json(path.as_ref(), "model file")
    }

    pub fn is_classical(&self) -> bool {
        matches!(self, ModelFile::ClassicalIsing { .. } | ModelFile::Classical { .. })
    }

    pub fn e_max_pad(&self) -> f64 {
        match self {
            ModelFile::Dense { e_max_pad, .. } | ModelFile::Tfim { e_max_pad, .. } => *e_max_pad,
            _ => 0.0,
        }
    }

    /// The classical system and its proposal kernel; quantum models are rejected.
    pub fn classical(&self, temperature: f64) -> Result<(ClassicalSystem, ProposalKernel)> {
        match self {
            ModelFile::ClassicalIsing {
                rows,
                cols,
                coupling,
                field,
                periodic,
            } => builders::classical_ising(*rows, *cols, *coupling, *field, *periodic, temperature),
            ModelFile::Classical { energies, kernel } => {
                let system = ClassicalSystem::new(energies.clone(), temperature)?;
                let spec = kernel
                    .clone()
                    .unwrap_or_else(|| KernelSpec::Named("uniform-others".into()));
                let kernel = spec.build(energies.len())?;
                Ok((system, kernel))
            }
            _ => Err(Error::invalid("model", "not a classical model")),
        }
    }

    /// Hamiltonian matrix; classical models become diagonal.
    pub fn hamiltonian(&self) -> Result<CMatrix> {
        match self {
            ModelFile::Dense { matrix, .. } => complex_matrix(matrix),
            ModelFile::Tfim {
                sites,
                coupling,
                field,
                longitudinal,
                periodic,
                ..
            } => builders::tfim(*sites, *coupling, *field, *longitudinal, *periodic),
            ModelFile::ClassicalIsing { .. } | ModelFile::Classical { .. } => {
                let (system, _) = self.classical(1.0)?;
                Ok(builders::diagonal_matrix(system.energies()))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BasisSpec {
    Named(String),
    Matrix(Vec<Vec<[f64; 2]>>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableFile {
    #[serde(default = "rest_default")]
    pub rest_dim: usize,
    pub basis: BasisSpec,
    pub values: Vec<f64>,
    #[serde(default)]
    pub kernel: Option<KernelSpec>,
}

impl ObservableFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_json(path.as_ref(), "observable file")
    }

    pub fn observable(&self) -> Result<LocalObservable> {
        let m = self.values.len();
        let basis = match &self.basis {
            BasisSpec::Named(name) if name == "computational" => CMatrix::identity(m, m),
            BasisSpec::Named(name) if name == "hadamard" && m == 2 => {
                let r = std::f64::consts::FRAC_1_SQRT_2;
                CMatrix::from_row_slice(2, 2, &[c(r, 0.0), c(r, 0.0), c(r, 0.0), c(-r, 0.0)])
            }
            BasisSpec::Named(other) => {
                return Err(Error::invalid("observable basis", format!("unknown basis '{other}'")))
            }
            BasisSpec::Matrix(rows) => complex_matrix(rows)?,
        };
        LocalObservable::new(basis, self.values.clone(), self.rest_dim)
    }

    pub fn kernel(&self) -> Result<ProposalKernel> {
        self.kernel
            .clone()
            .unwrap_or_else(|| KernelSpec::Named("uniform-others".into()))
            .build(self.values.len())
    }
}
