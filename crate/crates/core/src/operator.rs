//! Compressed sparse row operators with complex entries.
//!
//! The text dump format is a header line `dim nnz` followed by one
//! `row col re im` line per stored entry, rows ascending and columns ascending
//! within a row.

use std::io::{BufRead, Write};

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::scalar::{czero, Scalar};

const PAR_ROWS: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator<T: Scalar> {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<Complex<T>>,
}

impl<T: Scalar> SparseOperator<T> {
    /// Builds from unordered triplets. Duplicates are summed and exact zeros dropped.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, Complex<T>)>) -> Result<Self> {
        if let Some(&(r, c, _)) = triplets.iter().find(|(r, c, _)| *r >= dim || *c >= dim) {
            return Err(invalid(format!("entry ({r}, {c}) outside dimension {dim}")));
        }
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut merged: Vec<(usize, usize, Complex<T>)> = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 = last.2 + v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|(_, _, v)| v.re != T::zero() || v.im != T::zero());
        let mut row_ptr = vec![0usize; dim + 1];
        for &(r, _, _) in &merged {
            row_ptr[r + 1] += 1;
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        let (col_idx, values) = merged.into_iter().map(|(_, c, v)| (c, v)).unzip();
        Ok(Self {
            dim,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            row_ptr: vec![0; dim + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![T::one(); dim])
    }

    pub fn diagonal(entries: &[T]) -> Self {
        let t = entries
            .iter()
            .enumerate()
            .map(|(i, &d)| (i, i, Complex::new(d, T::zero())))
            .collect();
        Self::from_triplets(entries.len(), t).expect("diagonal indices in range")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Stored entries in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Complex<T>)> + '_ {
        (0..self.dim).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |p| (r, self.col_idx[p], self.values[p]))
        })
    }

    pub fn get(&self, row: usize, col: usize) -> Complex<T> {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        match self.col_idx[range.clone()].binary_search(&col) {
            Ok(p) => self.values[range.start + p],
            Err(_) => czero(),
        }
    }

    /// Diagonal entries.
    pub fn diagonal_entries(&self) -> Vec<Complex<T>> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    fn row_dot(&self, r: usize, x: &[Complex<T>]) -> Complex<T> {
        let mut acc = czero();
        for p in self.row_ptr[r]..self.row_ptr[r + 1] {
            acc = acc + self.values[p] * x[self.col_idx[p]];
        }
        acc
    }

    /// `y = A x`. Row sums are accumulated in a fixed order, so the result does
    /// not depend on the thread count.
    pub fn apply(&self, x: &[Complex<T>], y: &mut [Complex<T>]) {
        assert_eq!(x.len(), self.dim, "input length");
        assert_eq!(y.len(), self.dim, "output length");
        if self.dim >= PAR_ROWS {
            y.par_iter_mut().enumerate().for_each(|(r, yr)| *yr = self.row_dot(r, x));
        } else {
            for (r, yr) in y.iter_mut().enumerate() {
                *yr = self.row_dot(r, x);
            }
        }
    }

    pub fn matvec(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut y = vec![czero(); self.dim];
        self.apply(x, &mut y);
        y
    }

    /// `⟨x|A|x⟩`.
    pub fn expectation(&self, x: &[Complex<T>]) -> Complex<T> {
        let y = self.matvec(x);
        crate::scalar::inner(x, &y)
    }

    pub fn adjoint(&self) -> Self {
        let t = self.triplets().map(|(r, c, v)| (c, r, v.conj())).collect();
        Self::from_triplets(self.dim, t).expect("same dimension")
    }

    /// `max |A_ij − conj(A_ji)|`.
    pub fn hermiticity_defect(&self) -> T {
        self.triplets()
            .map(|(r, c, v)| (v - self.get(c, r).conj()).norm())
            .fold(T::zero(), T::max)
    }

    pub fn scaled(&self, s: Complex<T>) -> Self {
        let mut out = self.clone();
        for v in out.values.iter_mut() {
            *v = *v * s;
        }
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let t = self.triplets().chain(other.triplets()).collect();
        Self::from_triplets(self.dim, t)
    }

    /// Sum of several operators of equal dimension.
    pub fn sum(dim: usize, terms: &[&Self]) -> Result<Self> {
        let mut t = Vec::new();
        for op in terms {
            if op.dim != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: op.dim,
                });
            }
            t.extend(op.triplets());
        }
        Self::from_triplets(dim, t)
    }

    /// `self ⊗ I_n`, with the identity factor as the fast index.
    pub fn kron_identity(&self, n: usize) -> Self {
        let t = self
            .triplets()
            .flat_map(|(r, c, v)| (0..n).map(move |f| (r * n + f, c * n + f, v)))
            .collect();
        Self::from_triplets(self.dim * n, t).expect("in range")
    }

    /// `I_n ⊗ self`, with `self` as the fast index.
    pub fn identity_kron(&self, n: usize) -> Self {
        let d = self.dim;
        let t = (0..n)
            .flat_map(|g| self.triplets().map(move |(r, c, v)| (g * d + r, g * d + c, v)))
            .collect();
        Self::from_triplets(n * d, t).expect("in range")
    }

    /// Operator product `self · other`. Intended for small operators.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let mut t = Vec::new();
        for (r, k, a) in self.triplets() {
            for p in other.row_ptr[k]..other.row_ptr[k + 1] {
                t.push((r, other.col_idx[p], a * other.values[p]));
            }
        }
        Self::from_triplets(self.dim, t)
    }

    /// Dense row-major copy.
    pub fn to_dense(&self) -> Vec<Vec<Complex<T>>> {
        let mut m = vec![vec![czero(); self.dim]; self.dim];
        for (r, c, v) in self.triplets() {
            m[r][c] = v;
        }
        m
    }

    pub fn write_triplets<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.dim, self.nnz())?;
        for (r, c, v) in self.triplets() {
            writeln!(w, "{} {} {:.17e} {:.17e}", r, c, v.re, v.im)?;
        }
        Ok(())
    }

    pub fn read_triplets<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Data("empty operator dump".into()))?
            .map_err(|e| Error::Data(e.to_string()))?;
        let mut h = header.split_whitespace();
        let dim: usize = parse_field(h.next(), "dim")?;
        let nnz: usize = parse_field(h.next(), "nnz")?;
        let mut t = Vec::with_capacity(nnz);
        for line in lines {
            let line = line.map_err(|e| Error::Data(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut f = line.split_whitespace();
            let row: usize = parse_field(f.next(), "row")?;
            let col: usize = parse_field(f.next(), "col")?;
            let re: f64 = parse_field(f.next(), "re")?;
            let im: f64 = parse_field(f.next(), "im")?;
            t.push((row, col, Complex::new(T::lit(re), T::lit(im))));
        }
        if t.len() != nnz {
            return Err(Error::Data(format!("header announces {nnz} entries, found {}", t.len())));
        }
        Self::from_triplets(dim, t).map_err(|e| Error::Data(e.to_string()))
    }
}

fn parse_field<V: std::str::FromStr>(s: Option<&str>, what: &str) -> Result<V> {
    s.ok_or_else(|| Error::Data(format!("missing {what}")))?
        .parse()
        .map_err(|_| Error::Data(format!("unparsable {what}")))
}
