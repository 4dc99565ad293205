//! Versioned binary container for built representations.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic     8 bytes   "MODLOCAR"
//! version   u32
//! hlen      u64       length of the JSON header
//! header    hlen bytes
//! matrices  for each header entry, rows·cols pairs (re, im) of f64, row-major
//! ```
//!
//! Floats are stored as raw IEEE bits, so a save/load round trip is exact.

use std::io::{Read, Write};
use std::path::Path;

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::laguerre::{BasisKind, BasisSpec};
use crate::linalg::CMat;
use crate::spectral_rep::{GeneratorSet, SpectralError, Variant, build_generators, build_native_tilde, tilde_weight};

pub const MAGIC: &[u8; 8] = b"MODLOCAR";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a representation artifact (bad magic)")]
    BadMagic,
    #[error("unsupported artifact version {0}")]
    Version(u32),
    #[error("malformed header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("missing matrix {0}")]
    MissingMatrix(&'static str),
    #[error("matrix {name} has shape {rows}x{cols}, expected {m}x{m}")]
    Shape { name: String, rows: usize, cols: usize, m: usize },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactHeader {
    pub format_version: u32,
    pub k: f64,
    pub beta: f64,
    pub m: usize,
    pub quadrature_order: usize,
    pub build_asymmetry: f64,
    pub beta_tilde: Option<f64>,
    pub tilde_quadrature_order: Option<usize>,
    pub tilde_asymmetry: Option<f64>,
    pub matrices: Vec<MatrixEntry>,
    /// Free-form record of what produced the artifact.
    #[serde(default)]
    pub provenance: serde_json::Value,
}

/// A plain triple and optionally its native tilde triple.
#[derive(Debug, Clone)]
pub struct RepresentationArtifact {
    pub header: ArtifactHeader,
    pub matrices: Vec<(String, CMat)>,
}

impl RepresentationArtifact {
    /// Builds both triples from scratch.
    pub fn build(spec: &BasisSpec, beta_tilde: Option<f64>) -> Result<Self, ArtifactError> {
        let plain = build_generators(spec)?;
        let tilde = match beta_tilde {
            Some(bt) => Some(build_native_tilde(spec.k, bt, spec.m)?),
            None => None,
        };
        Ok(Self::from_sets(&plain, tilde.as_ref()))
    }

    pub fn from_sets(plain: &GeneratorSet, tilde: Option<&GeneratorSet>) -> Self {
        let mut matrices = vec![
            ("H".to_string(), plain.h.clone()),
            ("D".to_string(), plain.d.clone()),
            ("C".to_string(), plain.c.clone()),
        ];
        if let Some(t) = tilde {
            matrices.push(("Ht".to_string(), t.h.clone()));
            matrices.push(("Dt".to_string(), t.d.clone()));
            matrices.push(("Ct".to_string(), t.c.clone()));
        }
        let header = ArtifactHeader {
            format_version: FORMAT_VERSION,
            k: plain.spec.k,
            beta: plain.spec.beta,
            m: plain.spec.m,
            quadrature_order: plain.quadrature_order,
            build_asymmetry: plain.asymmetry,
            beta_tilde: tilde.map(|t| t.spec.beta),
            tilde_quadrature_order: tilde.map(|t| t.quadrature_order),
            tilde_asymmetry: tilde.map(|t| t.asymmetry),
            matrices: matrices
                .iter()
                .map(|(n, a)| MatrixEntry { name: n.clone(), rows: a.nrows(), cols: a.ncols() })
                .collect(),
            provenance: serde_json::Value::Null,
        };
        RepresentationArtifact { header, matrices }
    }

    pub fn matrix(&self, name: &str) -> Option<&CMat> {
        self.matrices.iter().find(|(n, _)| n == name).map(|(_, a)| a)
    }

    pub fn matrix_mut(&mut self, name: &str) -> Option<&mut CMat> {
        self.matrices.iter_mut().find(|(n, _)| n == name).map(|(_, a)| a)
    }

    fn take(&self, name: &'static str) -> Result<CMat, ArtifactError> {
        let a = self.matrix(name).ok_or(ArtifactError::MissingMatrix(name))?;
        let m = self.header.m;
        if a.nrows() != m || a.ncols() != m {
            return Err(ArtifactError::Shape { name: name.into(), rows: a.nrows(), cols: a.ncols(), m });
        }
        Ok(a.clone())
    }

    pub fn plain(&self) -> Result<GeneratorSet, ArtifactError> {
        let h = &self.header;
        Ok(GeneratorSet {
            h: self.take("H")?,
            d: self.take("D")?,
            c: self.take("C")?,
            spec: BasisSpec { k: h.k, beta: h.beta, m: h.m },
            basis: BasisKind::Z,
            variant: Variant::Plain,
            weight: h.k,
            quadrature_order: h.quadrature_order,
            asymmetry: h.build_asymmetry,
        })
    }

    pub fn tilde(&self) -> Result<Option<GeneratorSet>, ArtifactError> {
        let h = &self.header;
        let Some(bt) = h.beta_tilde else { return Ok(None) };
        Ok(Some(GeneratorSet {
            h: self.take("Ht")?,
            d: self.take("Dt")?,
            c: self.take("Ct")?,
            spec: BasisSpec { k: tilde_weight(h.k), beta: bt, m: h.m },
            basis: BasisKind::Ztilde,
            variant: Variant::Tilde,
            weight: h.k,
            quadrature_order: h.tilde_quadrature_order.unwrap_or(0),
            asymmetry: h.tilde_asymmetry.unwrap_or(0.0),
        }))
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<(), ArtifactError> {
        let header = serde_json::to_vec(&self.header)?;
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(header.len() as u64).to_le_bytes())?;
        w.write_all(&header)?;
        for (_, a) in &self.matrices {
            let mut buf = Vec::with_capacity(a.nrows() * a.ncols() * 16);
            for i in 0..a.nrows() {
                for j in 0..a.ncols() {
                    buf.extend_from_slice(&a[(i, j)].re.to_le_bytes());
                    buf.extend_from_slice(&a[(i, j)].im.to_le_bytes());
                }
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self, ArtifactError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(ArtifactError::BadMagic);
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != FORMAT_VERSION {
            return Err(ArtifactError::Version(version));
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let mut hbuf = vec![0u8; u64::from_le_bytes(b8) as usize];
        r.read_exact(&mut hbuf)?;
        let header: ArtifactHeader = serde_json::from_slice(&hbuf)?;
        let mut matrices = Vec::with_capacity(header.matrices.len());
        for e in &header.matrices {
            let mut buf = vec![0u8; e.rows * e.cols * 16];
            r.read_exact(&mut buf)?;
            let f = |o: usize| f64::from_le_bytes(buf[o..o + 8].try_into().unwrap());
            let a = Mat::from_fn(e.rows, e.cols, |i, j| {
                let o = (i * e.cols + j) * 16;
                C64::new(f(o), f(o + 8))
            });
            matrices.push((e.name.clone(), a));
        }
        Ok(RepresentationArtifact { header, matrices })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut v = Vec::new();
        self.write_to(&mut v).expect("writing to a Vec cannot fail");
        v
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ArtifactError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ArtifactError> {
        let bytes = std::fs::read(path)?;
        Self::read_from(&mut bytes.as_slice())
    }
}
