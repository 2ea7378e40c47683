//! Parity-check codes: Tanner-graph adjacency, alist interchange, syndromes,
//! and GF(2) linear algebra for small-code oracles.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::bits::BitVector;
use crate::error::{Error, Result};

/// Default ceiling on `k` for exhaustive codeword enumeration.
pub const DEFAULT_ENUMERATION_LIMIT: usize = 16;

/// A binary linear code given by a sparse parity-check matrix `H` (m × n).
///
/// Edges of the Tanner graph are numbered check-major: the edges of check `j`
/// occupy `check_edge_range(j)`, in ascending VN order. Every VN keeps the ids
/// of its incident edges in ascending check order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityCheckCode {
    n: usize,
    m: usize,
    rank: usize,
    rows: Vec<Vec<usize>>,
    cols: Vec<Vec<usize>>,
    check_offsets: Vec<usize>,
    edge_vn: Vec<usize>,
    edge_cn: Vec<usize>,
    var_edges: Vec<Vec<usize>>,
}

impl ParityCheckCode {
    /// Builds a code of length `n` from per-check VN lists (0-indexed).
    ///
    /// Each list is sorted; duplicates and out-of-range indices are rejected.
    pub fn from_rows(n: usize, rows: Vec<Vec<usize>>) -> Result<Self> {
        let m = rows.len();
        let mut rows = rows;
        let mut cols = vec![Vec::new(); n];
        for (j, row) in rows.iter_mut().enumerate() {
            row.sort_unstable();
            for w in row.windows(2) {
                if w[0] == w[1] {
                    return Err(Error::InvalidArgument(format!(
                        "check {j} lists VN {} twice",
                        w[0]
                    )));
                }
            }
            for &i in row.iter() {
                if i >= n {
                    return Err(Error::InvalidArgument(format!(
                        "check {j} references VN {i} but n = {n}"
                    )));
                }
                cols[i].push(j);
            }
        }

        let mut check_offsets = Vec::with_capacity(m + 1);
        let mut edge_vn = Vec::new();
        let mut edge_cn = Vec::new();
        let mut var_edges = vec![Vec::new(); n];
        check_offsets.push(0);
        for (j, row) in rows.iter().enumerate() {
            for &i in row {
                var_edges[i].push(edge_vn.len());
                edge_vn.push(i);
                edge_cn.push(j);
            }
            check_offsets.push(edge_vn.len());
        }

        let mut code = ParityCheckCode {
            n,
            m,
            rank: 0,
            rows,
            cols,
            check_offsets,
            edge_vn,
            edge_cn,
            var_edges,
        };
        code.rank = gf2_rank(&code.dense_rows());
        Ok(code)
    }

    /// Builds a code from a dense 0/1 matrix given row by row.
    pub fn from_dense(h: &[Vec<u8>]) -> Result<Self> {
        let n = h.first().map_or(0, Vec::len);
        let rows = h
            .iter()
            .enumerate()
            .map(|(j, row)| {
                if row.len() != n {
                    return Err(Error::LengthMismatch {
                        expected: n,
                        got: row.len(),
                    });
                }
                if row.iter().any(|&b| b > 1) {
                    return Err(Error::InvalidArgument(format!("row {j} is not binary")));
                }
                Ok(row
                    .iter()
                    .enumerate()
                    .filter(|(_, &b)| b == 1)
                    .map(|(i, _)| i)
                    .collect())
            })
            .collect::<Result<Vec<Vec<usize>>>>()?;
        Self::from_rows(n, rows)
    }

    /// Expands a quasi-cyclic base matrix of circulant shifts.
    ///
    /// Entry `-1` is the all-zero block, entry `s ≥ 0` is the `z × z` identity
    /// cyclically shifted so that row `t` of the block has its one in column `(t + s) mod z`.
    pub fn from_qc_base(base: &[Vec<i32>], z: usize) -> Result<Self> {
        let nb = base.first().map_or(0, Vec::len);
        let mut rows = Vec::with_capacity(base.len() * z);
        for (r, brow) in base.iter().enumerate() {
            if brow.len() != nb {
                return Err(Error::LengthMismatch {
                    expected: nb,
                    got: brow.len(),
                });
            }
            for t in 0..z {
                let mut row = Vec::new();
                for (c, &s) in brow.iter().enumerate() {
                    if s < -1 || s >= z as i32 {
                        return Err(Error::InvalidArgument(format!(
                            "base entry ({r}, {c}) = {s} is not a valid shift for z = {z}"
                        )));
                    }
                    if s >= 0 {
                        row.push(c * z + (t + s as usize) % z);
                    }
                }
                rows.push(row);
            }
        }
        Self::from_rows(nb * z, rows)
    }

    /// Parses the alist format (1-indexed, zero padding permitted).
    pub fn parse_alist(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());

        let mut next_line = |what: &str| -> Result<(usize, Vec<usize>)> {
            let (lineno, line) = lines.next().ok_or_else(|| Error::Parse {
                line: text.lines().count() + 1,
                msg: format!("unexpected end of input, expected {what}"),
            })?;
            let nums = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<usize>().map_err(|_| Error::Parse {
                        line: lineno,
                        msg: format!("invalid integer {tok:?} in {what}"),
                    })
                })
                .collect::<Result<Vec<usize>>>()?;
            Ok((lineno, nums))
        };

        let expect_len = |lineno: usize, nums: &[usize], len: usize, what: &str| {
            if nums.len() != len {
                Err(Error::Parse {
                    line: lineno,
                    msg: format!("{what}: expected {len} entries, found {}", nums.len()),
                })
            } else {
                Ok(())
            }
        };

        let (l1, dims) = next_line("header \"n m\"")?;
        expect_len(l1, &dims, 2, "header")?;
        let (n, m) = (dims[0], dims[1]);
        let (l2, maxes) = next_line("maximum degrees")?;
        expect_len(l2, &maxes, 2, "maximum degrees")?;
        let (max_col, max_row) = (maxes[0], maxes[1]);
        let (l3, col_deg) = next_line("column degrees")?;
        expect_len(l3, &col_deg, n, "column degrees")?;
        let (l4, row_deg) = next_line("row degrees")?;
        expect_len(l4, &row_deg, m, "row degrees")?;
        for (lineno, degs, cap, what) in [(l3, &col_deg, max_col, "column"), (l4, &row_deg, max_row, "row")] {
            if let Some(&d) = degs.iter().find(|&&d| d > cap) {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("{what} degree {d} exceeds declared maximum {cap}"),
                });
            }
        }

        let mut read_adjacency =
            |count: usize, degs: &[usize], cap: usize, bound: usize, what: &str| -> Result<Vec<(usize, Vec<usize>)>> {
                (0..count)
                    .map(|idx| {
                        let (lineno, nums) = next_line(what)?;
                        if nums.len() < degs[idx] || nums.len() > cap.max(degs[idx]) {
                            return Err(Error::Parse {
                                line: lineno,
                                msg: format!(
                                    "{what} {}: expected {} entries (max {cap}), found {}",
                                    idx + 1,
                                    degs[idx],
                                    nums.len()
                                ),
                            });
                        }
                        let (live, pad) = nums.split_at(degs[idx]);
                        if pad.iter().any(|&v| v != 0) {
                            return Err(Error::Parse {
                                line: lineno,
                                msg: format!("{what} {}: nonzero entry beyond stated degree", idx + 1),
                            });
                        }
                        let mut list = Vec::with_capacity(live.len());
                        for &v in live {
                            if v == 0 || v > bound {
                                return Err(Error::Parse {
                                    line: lineno,
                                    msg: format!("{what} {}: index {v} out of range 1..={bound}", idx + 1),
                                });
                            }
                            list.push(v - 1);
                        }
                        list.sort_unstable();
                        if list.windows(2).any(|w| w[0] == w[1]) {
                            return Err(Error::Parse {
                                line: lineno,
                                msg: format!("{what} {}: duplicate index", idx + 1),
                            });
                        }
                        Ok((lineno, list))
                    })
                    .collect()
            };

        let col_lists = read_adjacency(n, &col_deg, max_col, m, "column")?;
        let row_lists = read_adjacency(m, &row_deg, max_row, n, "row")?;

        let rows: Vec<Vec<usize>> = row_lists.iter().map(|(_, r)| r.clone()).collect();
        let code = Self::from_rows(n, rows).map_err(|e| Error::Parse {
            line: l1,
            msg: e.to_string(),
        })?;
        for (i, (lineno, list)) in col_lists.iter().enumerate() {
            if code.cols[i] != *list {
                // Report against the first row whose list disagrees with the columns.
                let line = row_lists
                    .iter()
                    .enumerate()
                    .find(|(j, (_, r))| r.contains(&i) != list.contains(j))
                    .map_or(*lineno, |(_, (l, _))| *l);
                return Err(Error::Parse {
                    line,
                    msg: format!("row adjacency is inconsistent with column {} adjacency", i + 1),
                });
            }
        }
        Ok(code)
    }

    /// Serializes to alist, padding each adjacency line with zeros to the maximum degree.
    pub fn to_alist(&self) -> String {
        let max_col = self.cols.iter().map(Vec::len).max().unwrap_or(0);
        let max_row = self.rows.iter().map(Vec::len).max().unwrap_or(0);
        let mut out = String::new();
        let join = |v: &mut dyn Iterator<Item = usize>| {
            v.map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
        };
        writeln!(out, "{} {}", self.n, self.m).unwrap();
        writeln!(out, "{max_col} {max_row}").unwrap();
        writeln!(out, "{}", join(&mut self.cols.iter().map(Vec::len))).unwrap();
        writeln!(out, "{}", join(&mut self.rows.iter().map(Vec::len))).unwrap();
        for (lists, width) in [(&self.cols, max_col), (&self.rows, max_row)] {
            for list in lists {
                let mut entries: Vec<usize> = list.iter().map(|&v| v + 1).collect();
                entries.resize(width, 0);
                writeln!(out, "{}", join(&mut entries.into_iter())).unwrap();
            }
        }
        out
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Effective dimension `n - rank(H)`.
    pub fn k(&self) -> usize {
        self.n - self.rank
    }

    pub fn rate(&self) -> f64 {
        self.k() as f64 / self.n as f64
    }

    /// VN indices of check `j`.
    pub fn row(&self, j: usize) -> &[usize] {
        &self.rows[j]
    }

    /// Check indices of VN `i`.
    pub fn col(&self, i: usize) -> &[usize] {
        &self.cols[i]
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn cols(&self) -> &[Vec<usize>] {
        &self.cols
    }

    pub fn num_edges(&self) -> usize {
        self.edge_vn.len()
    }

    pub fn check_edge_range(&self, j: usize) -> std::ops::Range<usize> {
        self.check_offsets[j]..self.check_offsets[j + 1]
    }

    /// Edge ids incident to VN `i`, in ascending check order.
    pub fn var_edges(&self, i: usize) -> &[usize] {
        &self.var_edges[i]
    }

    pub fn edge_vn(&self, e: usize) -> usize {
        self.edge_vn[e]
    }

    pub fn edge_cn(&self, e: usize) -> usize {
        self.edge_cn[e]
    }

    /// Degree histograms `(vn_degree -> count, cn_degree -> count)`.
    pub fn degree_profile(&self) -> (BTreeMap<usize, usize>, BTreeMap<usize, usize>) {
        let hist = |lists: &[Vec<usize>]| {
            let mut h = BTreeMap::new();
            for l in lists {
                *h.entry(l.len()).or_insert(0) += 1;
            }
            h
        };
        (hist(&self.cols), hist(&self.rows))
    }

    /// Hex SHA-256 prefix of the canonical alist serialization.
    pub fn identity_hash(&self) -> String {
        let digest = Sha256::digest(self.to_alist().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn syndrome(&self, v: &BitVector) -> Result<BitVector> {
        self.check_len(v.len())?;
        Ok(self.syndrome_unchecked(v.as_slice()))
    }

    pub(crate) fn syndrome_unchecked(&self, bits: &[u8]) -> BitVector {
        self.rows
            .iter()
            .map(|row| row.iter().fold(0u8, |acc, &i| acc ^ bits[i]) == 1)
            .collect()
    }

    pub fn is_codeword(&self, v: &BitVector) -> Result<bool> {
        self.check_len(v.len())?;
        Ok(self.is_codeword_unchecked(v.as_slice()))
    }

    pub(crate) fn is_codeword_unchecked(&self, bits: &[u8]) -> bool {
        self.rows
            .iter()
            .all(|row| row.iter().fold(0u8, |acc, &i| acc ^ bits[i]) == 0)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: len,
            });
        }
        Ok(())
    }

    fn dense_rows(&self) -> Vec<Vec<u64>> {
        let words = self.n.div_ceil(64);
        self.rows
            .iter()
            .map(|row| {
                let mut r = vec![0u64; words];
                for &i in row {
                    r[i / 64] |= 1 << (i % 64);
                }
                r
            })
            .collect()
    }

    /// A basis of the code (null space of `H` over GF(2)), one row per dimension.
    pub fn generator(&self) -> Generator {
        let mut a = self.dense_rows();
        let pivots = gf2_rref(&mut a, self.n);
        let bit = |row: &[u64], c: usize| (row[c / 64] >> (c % 64)) & 1 == 1;
        let mut is_pivot = vec![false; self.n];
        for &p in &pivots {
            is_pivot[p] = true;
        }
        let basis = (0..self.n)
            .filter(|&f| !is_pivot[f])
            .map(|f| {
                let mut v = BitVector::zeros(self.n);
                v.set(f, true);
                for (r, &p) in pivots.iter().enumerate() {
                    if bit(&a[r], f) {
                        v.set(p, true);
                    }
                }
                v
            })
            .collect();
        Generator { n: self.n, basis }
    }

    /// All `2^k` codewords. Fails when `k > limit`.
    pub fn enumerate_codewords(&self, limit: usize) -> Result<Vec<BitVector>> {
        let k = self.k();
        if k > limit {
            return Err(Error::EnumerationLimit { k, limit });
        }
        let g = self.generator();
        let mut out = Vec::with_capacity(1 << k);
        // Gray-code walk: each step flips one basis vector in or out.
        let mut cur = BitVector::zeros(self.n);
        out.push(cur.clone());
        for step in 1u64..(1u64 << k) {
            cur.xor_assign(&g.basis[step.trailing_zeros() as usize]);
            out.push(cur.clone());
        }
        Ok(out)
    }

    /// Maximum-likelihood codeword for received values `y` by exhaustive search.
    ///
    /// Minimizes `||y - (-1)^c||²`; ties go to the lexicographically smallest codeword.
    pub fn brute_force_mld(&self, y: &[f64], limit: usize) -> Result<BitVector> {
        self.check_len(y.len())?;
        let codewords = self.enumerate_codewords(limit)?;
        Ok(Self::closest_codeword(&codewords, y))
    }

    /// Closest entry of `codewords` to `y` under the same metric and tie-break as
    /// [`ParityCheckCode::brute_force_mld`]. Reuse the enumeration across many frames.
    pub fn closest_codeword(codewords: &[BitVector], y: &[f64]) -> BitVector {
        let mut best: Option<(f64, &BitVector)> = None;
        for c in codewords {
            let d = squared_distance(y, c);
            best = match best {
                Some((bd, bc)) if bd < d || (bd == d && bc <= c) => Some((bd, bc)),
                _ => Some((d, c)),
            };
        }
        best.map(|(_, c)| c.clone()).expect("codebook is never empty")
    }
}

/// `||y - (-1)^c||²`.
pub fn squared_distance(y: &[f64], c: &BitVector) -> f64 {
    y.iter()
        .zip(c.iter())
        .map(|(&yi, ci)| {
            let xi = if ci == 0 { 1.0 } else { -1.0 };
            (yi - xi) * (yi - xi)
        })
        .sum()
}

/// Basis of a binary linear code.
#[derive(Debug, Clone)]
pub struct Generator {
    n: usize,
    basis: Vec<BitVector>,
}

impl Generator {
    pub fn k(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[BitVector] {
        &self.basis
    }

    /// Encodes `message` (length k) as the XOR of the selected basis vectors.
    pub fn encode(&self, message: &BitVector) -> Result<BitVector> {
        if message.len() != self.k() {
            return Err(Error::LengthMismatch {
                expected: self.k(),
                got: message.len(),
            });
        }
        let mut c = BitVector::zeros(self.n);
        for (bit, row) in message.iter().zip(&self.basis) {
            if bit == 1 {
                c.xor_assign(row);
            }
        }
        Ok(c)
    }
}

/// Reduces `a` to reduced row echelon form in place; returns pivot columns per row.
fn gf2_rref(a: &mut [Vec<u64>], ncols: usize) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        if r == a.len() {
            break;
        }
        let (w, mask) = (c / 64, 1u64 << (c % 64));
        let Some(p) = (r..a.len()).find(|&i| a[i][w] & mask != 0) else {
            continue;
        };
        a.swap(r, p);
        let pivot_row = a[r].clone();
        for (i, row) in a.iter_mut().enumerate() {
            if i != r && row[w] & mask != 0 {
                for (x, y) in row.iter_mut().zip(&pivot_row) {
                    *x ^= y;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

fn gf2_rank(rows: &[Vec<u64>]) -> usize {
    let ncols = rows.first().map_or(0, |r| r.len() * 64);
    let mut a = rows.to_vec();
    gf2_rref(&mut a, ncols).len()
}
