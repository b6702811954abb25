//! Arithmetic and linear algebra over GF(2^l), 1 <= l <= 16.
//!
//! Elements are `u16` words holding the coefficients of a polynomial over
//! GF(2) (bit `i` is the coefficient of `x^i`). Addition is XOR and
//! multiplication is polynomial multiplication modulo the reduction
//! polynomial of the field, implemented with exp/log tables.
//!
//! Every degree uses the numerically smallest primitive polynomial, so that
//! coefficient streams are reproducible across implementations:
//!
//! | l | polynomial | l | polynomial |
//! |---|------------|---|------------|
//! | 1 | `0x3`      | 9 | `0x211`    |
//! | 2 | `0x7`      | 10 | `0x409`   |
//! | 3 | `0xB`      | 11 | `0x805`   |
//! | 4 | `0x13`     | 12 | `0x1053`  |
//! | 5 | `0x25`     | 13 | `0x201B`  |
//! | 6 | `0x43`     | 14 | `0x402B`  |
//! | 7 | `0x83`     | 15 | `0x8003`  |
//! | 8 | `0x11D`    | 16 | `0x1002D` |

use std::fmt;

use crate::error::{Error, Result};

/// A field element. Only the low `l` bits are meaningful.
pub type Element = u16;

/// Largest supported extension degree.
pub const MAX_DEGREE: u32 = 16;

/// Smallest primitive polynomial of each degree, indexed by degree.
pub const PRIMITIVE_POLYNOMIALS: [u32; 17] = [
    0, 0x3, 0x7, 0xB, 0x13, 0x25, 0x43, 0x83, 0x11D, 0x211, 0x409, 0x805, 0x1053, 0x201B, 0x402B,
    0x8003, 0x1002D,
];

/// Arithmetic context for GF(q), q = 2^l. Immutable once built.
#[derive(Clone)]
pub struct GaloisField {
    degree: u32,
    poly: u32,
    // exp has 2(q-1) entries so that log a + log b never needs a modulo.
    exp: Vec<Element>,
    log: Vec<u32>,
    // full q x q product table for degree <= MUL_TABLE_MAX_DEGREE, else empty
    table: Vec<Element>,
}

const MUL_TABLE_MAX_DEGREE: u32 = 8;

impl fmt::Debug for GaloisField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GaloisField")
            .field("degree", &self.degree)
            .field("poly", &format_args!("{:#x}", self.poly))
            .finish()
    }
}

impl PartialEq for GaloisField {
    fn eq(&self, other: &Self) -> bool {
        self.degree == other.degree
    }
}

impl Eq for GaloisField {}

impl GaloisField {
    /// Builds GF(2^degree).
    pub fn new(degree: u32) -> Result<Self> {
        if !(1..=MAX_DEGREE).contains(&degree) {
            return Err(Error::Config(format!(
                "field degree must be in 1..={MAX_DEGREE}, got {degree}"
            )));
        }
        let poly = PRIMITIVE_POLYNOMIALS[degree as usize];
        let q = 1usize << degree;
        let order = q - 1;
        let mut exp = vec![0 as Element; 2 * order];
        let mut log = vec![0u32; q];
        let mut x = 1u32;
        for (i, slot) in exp.iter_mut().take(order).enumerate() {
            *slot = x as Element;
            log[x as usize] = i as u32;
            x <<= 1;
            if x & (q as u32) != 0 {
                x ^= poly;
            }
        }
        debug_assert_eq!(x, 1, "reduction polynomial is not primitive");
        for i in order..2 * order {
            exp[i] = exp[i - order];
        }
        let mut field = Self { degree, poly, exp, log, table: Vec::new() };
        if degree <= MUL_TABLE_MAX_DEGREE {
            field.table = (0..q * q).map(|i| field.mul((i / q) as Element, (i % q) as Element)).collect();
        }
        Ok(field)
    }

    /// Builds the field with `size` elements; `size` must be a power of two in [2, 2^16].
    pub fn with_size(size: u32) -> Result<Self> {
        if size < 2 || !size.is_power_of_two() {
            return Err(Error::Config(format!(
                "field size must be a power of two >= 2, got {size}"
            )));
        }
        Self::new(size.trailing_zeros())
    }

    /// Extension degree l.
    pub fn degree(&self) -> u32 {
        self.degree
    }

    /// Field size q = 2^l.
    pub fn size(&self) -> u32 {
        1 << self.degree
    }

    /// Reduction polynomial, including the leading `x^l` term.
    pub fn polynomial(&self) -> u32 {
        self.poly
    }

    fn order(&self) -> u32 {
        self.size() - 1
    }

    /// Whether `a` is a valid element of this field.
    pub fn contains(&self, a: Element) -> bool {
        u32::from(a) < self.size()
    }

    #[inline]
    pub fn add(&self, a: Element, b: Element) -> Element {
        a ^ b
    }

    #[inline]
    pub fn mul(&self, a: Element, b: Element) -> Element {
        if a == 0 || b == 0 {
            return 0;
        }
        self.exp[(self.log[a as usize] + self.log[b as usize]) as usize]
    }

    /// Multiplicative inverse.
    pub fn inv(&self, a: Element) -> Result<Element> {
        if a == 0 {
            return Err(Error::DivisionByZero(self.degree));
        }
        let la = self.log[a as usize];
        Ok(self.exp[((self.order() - la) % self.order()) as usize])
    }

    pub fn div(&self, a: Element, b: Element) -> Result<Element> {
        Ok(self.mul(a, self.inv(b)?))
    }

    pub fn pow(&self, a: Element, e: u64) -> Element {
        if e == 0 {
            return 1;
        }
        if a == 0 {
            return 0;
        }
        let la = u64::from(self.log[a as usize]);
        self.exp[((la * e) % u64::from(self.order())) as usize]
    }

    /// `dst[i] += c * src[i]` for every `i`.
    pub fn mul_add_slice(&self, dst: &mut [Element], src: &[Element], c: Element) {
        debug_assert_eq!(dst.len(), src.len());
        if c == 0 {
            return;
        }
        if c == 1 {
            for (d, &s) in dst.iter_mut().zip(src) {
                *d ^= s;
            }
            return;
        }
        if !self.table.is_empty() {
            let q = self.size() as usize;
            let row = &self.table[c as usize * q..(c as usize + 1) * q];
            for (d, &s) in dst.iter_mut().zip(src) {
                *d ^= row[s as usize];
            }
            return;
        }
        let lc = self.log[c as usize];
        for (d, &s) in dst.iter_mut().zip(src) {
            if s != 0 {
                *d ^= self.exp[(self.log[s as usize] + lc) as usize];
            }
        }
    }

    /// `v[i] *= c` for every `i`.
    pub fn scale_slice(&self, v: &mut [Element], c: Element) {
        if c == 1 {
            return;
        }
        if c == 0 {
            v.fill(0);
            return;
        }
        let lc = self.log[c as usize];
        for x in v.iter_mut() {
            if *x != 0 {
                *x = self.exp[(self.log[*x as usize] + lc) as usize];
            }
        }
    }

    /// Inner product of two equal-length vectors.
    pub fn dot(&self, a: &[Element], b: &[Element]) -> Element {
        a.iter().zip(b).fold(0, |acc, (&x, &y)| acc ^ self.mul(x, y))
    }
}

/// Dense row-major matrix over GF(q).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GfMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Element>,
}

impl GfMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows(rows: &[Vec<Element>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("rows of unequal length".into()));
        }
        Ok(Self { rows: rows.len(), cols, data: rows.concat() })
    }

    /// Builds a matrix whose columns are the given equal-length vectors.
    pub fn from_columns(columns: &[Vec<Element>]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::Dimension("columns of unequal length".into()));
        }
        let mut m = Self::zeros(rows, columns.len());
        for (j, col) in columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Element {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Element) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[Element] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<Element> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    /// Matrix product `self * other`.
    pub fn mul(&self, f: &GaloisField, other: &GfMatrix) -> Result<GfMatrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = GfMatrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            let dst = &mut out.data[r * other.cols..(r + 1) * other.cols];
            for k in 0..self.cols {
                f.mul_add_slice(dst, other.row(k), self.get(r, k));
            }
        }
        Ok(out)
    }

    /// Rank by batch row reduction of a copy.
    pub fn rank(&self, f: &GaloisField) -> usize {
        let mut a = self.clone();
        let mut rank = 0;
        for c in 0..a.cols {
            let Some(p) = (rank..a.rows).find(|&r| a.get(r, c) != 0) else {
                continue;
            };
            a.swap_rows(p, rank);
            let inv = f.inv(a.get(rank, c)).expect("pivot is nonzero");
            let pivot: Vec<Element> = a.row(rank).iter().map(|&x| f.mul(x, inv)).collect();
            for r in (rank + 1)..a.rows {
                let factor = a.get(r, c);
                if factor != 0 {
                    let cols = a.cols;
                    f.mul_add_slice(&mut a.data[r * cols..(r + 1) * cols], &pivot, factor);
                }
            }
            rank += 1;
            if rank == a.rows {
                break;
            }
        }
        rank
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for c in 0..self.cols {
            self.data.swap(a * self.cols + c, b * self.cols + c);
        }
    }
}

/// Incremental Gaussian elimination over a growing set of linear equations
/// `coefficients . unknowns = payload`.
///
/// Each inserted equation is reduced against the stored pivot rows in
/// insertion order, which keeps every stored row zero at the pivot columns
/// of the rows before it. A rank test therefore costs O(unknowns * rank) per
/// equation; back-substitution is deferred to [`IncrementalSolver::solve`].
/// Payloads may be empty when only the rank is of interest.
#[derive(Debug, Clone)]
pub struct IncrementalSolver {
    unknowns: usize,
    payload_len: usize,
    rows: Vec<Vec<Element>>,
    payloads: Vec<Vec<Element>>,
    pivots: Vec<usize>,
    scratch: Vec<Element>,
    scratch_payload: Vec<Element>,
}

impl IncrementalSolver {
    pub fn new(unknowns: usize, payload_len: usize) -> Self {
        Self {
            unknowns,
            payload_len,
            rows: Vec::with_capacity(unknowns),
            payloads: Vec::with_capacity(unknowns),
            pivots: Vec::with_capacity(unknowns),
            scratch: vec![0; unknowns],
            scratch_payload: vec![0; payload_len],
        }
    }

    pub fn unknowns(&self) -> usize {
        self.unknowns
    }

    pub fn payload_len(&self) -> usize {
        self.payload_len
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank() == self.unknowns
    }

    /// Adds one equation. Returns whether it increased the rank.
    pub fn insert(&mut self, f: &GaloisField, coeffs: &[Element], payload: &[Element]) -> Result<bool> {
        if coeffs.len() != self.unknowns {
            return Err(Error::Dimension(format!(
                "equation has {} coefficients, expected {}",
                coeffs.len(),
                self.unknowns
            )));
        }
        if payload.len() != self.payload_len {
            return Err(Error::Dimension(format!(
                "payload has {} symbols, expected {}",
                payload.len(),
                self.payload_len
            )));
        }
        if self.is_full_rank() {
            return Ok(false);
        }
        self.scratch.copy_from_slice(coeffs);
        self.scratch_payload.copy_from_slice(payload);
        for ((row, pay), &p) in self.rows.iter().zip(&self.payloads).zip(&self.pivots) {
            let c = self.scratch[p];
            if c != 0 {
                // stored rows are zero before their pivot
                f.mul_add_slice(&mut self.scratch[p..], &row[p..], c);
                f.mul_add_slice(&mut self.scratch_payload, pay, c);
            }
        }
        let Some(p) = self.scratch.iter().position(|&x| x != 0) else {
            return Ok(false);
        };
        let inv = f.inv(self.scratch[p])?;
        let mut row = self.scratch.clone();
        let mut pay = self.scratch_payload.clone();
        f.scale_slice(&mut row, inv);
        f.scale_slice(&mut pay, inv);
        self.rows.push(row);
        self.payloads.push(pay);
        self.pivots.push(p);
        Ok(true)
    }

    /// Whether `coeffs` lies outside the span of the stored equations.
    pub fn would_increase_rank(&self, f: &GaloisField, coeffs: &[Element]) -> bool {
        if coeffs.len() != self.unknowns || self.is_full_rank() {
            return false;
        }
        let mut v = coeffs.to_vec();
        for (row, &p) in self.rows.iter().zip(&self.pivots) {
            let c = v[p];
            if c != 0 {
                f.mul_add_slice(&mut v[p..], &row[p..], c);
            }
        }
        v.iter().any(|&x| x != 0)
    }

    /// Values of the unknowns, each a payload-length symbol vector.
    /// Requires full rank.
    pub fn solve(&self, f: &GaloisField) -> Result<Vec<Vec<Element>>> {
        if !self.is_full_rank() {
            return Err(Error::State(format!(
                "rank {} < {} unknowns",
                self.rank(),
                self.unknowns
            )));
        }
        let n = self.rank();
        let mut pays = self.payloads.clone();
        // Row i is zero at the pivots of rows j < i; clear pivots of rows j > i
        // working backwards so each row_j is already a unit vector when used.
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                let c = self.rows[i][self.pivots[j]];
                if c != 0 {
                    let (head, tail) = pays.split_at_mut(j);
                    f.mul_add_slice(&mut head[i], &tail[0], c);
                }
            }
        }
        let mut out = vec![Vec::new(); self.unknowns];
        for (pay, &p) in pays.into_iter().zip(&self.pivots) {
            out[p] = pay;
        }
        Ok(out)
    }
}

/// Rank of `coefficients` and, when it equals the number of unknowns, the
/// solution of `coefficients^T . unknowns = rhs`.
///
/// `coefficients` is laid out like a receiver's perceived generator matrix:
/// one row per unknown and one column per received equation. `rhs` holds one
/// symbol vector per column.
pub fn rank_and_solve(
    f: &GaloisField,
    coefficients: &GfMatrix,
    rhs: &[Vec<Element>],
) -> Result<(usize, Option<Vec<Vec<Element>>>)> {
    if rhs.len() != coefficients.cols() {
        return Err(Error::Dimension(format!(
            "{} right-hand sides for {} equations",
            rhs.len(),
            coefficients.cols()
        )));
    }
    let payload_len = rhs.first().map_or(0, Vec::len);
    let mut solver = IncrementalSolver::new(coefficients.rows(), payload_len);
    for (c, b) in rhs.iter().enumerate() {
        solver.insert(f, &coefficients.column(c), b)?;
    }
    let rank = solver.rank();
    let solution = if solver.is_full_rank() { Some(solver.solve(f)?) } else { None };
    Ok((rank, solution))
}
