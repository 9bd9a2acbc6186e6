//! Indexing of the full tensor-product space `(C^d)^{n}`; site 0 is the most significant digit.

use crate::error::Result;
use crate::linalg::{checked_dim, C64, ONE, ZERO};
use crate::model::LocalOp;

#[derive(Clone, Debug)]
pub struct StateSpace {
    d: usize,
    n: usize,
    dim: usize,
    strides: Vec<usize>,
}

impl StateSpace {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        let dim = checked_dim(d, n)?;
        let strides = (0..n).map(|s| d.pow((n - 1 - s) as u32)).collect();
        Ok(StateSpace { d, n, dim, strides })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n_sites(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn stride(&self, site: usize) -> usize {
        self.strides[site]
    }

    pub fn digit(&self, i: usize, site: usize) -> usize {
        (i / self.strides[site]) % self.d
    }

    /// The product vacuum, index 0 in the canonical frame.
    pub fn vacuum(&self) -> Vec<C64> {
        let mut v = vec![ZERO; self.dim];
        v[0] = ONE;
        v
    }

    /// Sites carrying a nonzero digit in configuration `i`, ascending.
    pub fn support(&self, i: usize) -> Vec<usize> {
        (0..self.n).filter(|&s| self.digit(i, s) != 0).collect()
    }

    /// Local configuration of `i` on `sites`, first site most significant.
    pub fn local_config(&self, i: usize, sites: &[usize]) -> usize {
        sites.iter().fold(0, |acc, &s| acc * self.d + self.digit(i, s))
    }

    /// Contribution of a local configuration to the full index.
    pub fn config_offset(&self, sites: &[usize], mut c: usize) -> usize {
        let mut off = 0;
        for &s in sites.iter().rev() {
            off += (c % self.d) * self.strides[s];
            c /= self.d;
        }
        off
    }

    /// Calls `f(j, value)` for every nonzero `(op e_i)_j`.
    pub fn column_entries(&self, op: &LocalOp, i: usize, mut f: impl FnMut(usize, C64)) {
        let c = self.local_config(i, op.sites());
        let base = i - self.config_offset(op.sites(), c);
        for &(r, v) in op.column(c) {
            f(base + self.config_offset(op.sites(), r), v);
        }
    }

    /// `y += coeff * op x`.
    pub fn apply_local_add(&self, op: &LocalOp, x: &[C64], coeff: C64, y: &mut [C64]) {
        let sites = op.sites();
        let k = sites.len();
        let nloc = self.d.pow(k as u32);
        let offsets: Vec<usize> = (0..nloc).map(|c| self.config_offset(sites, c)).collect();
        self.for_each_zero_on(sites, |base| {
            for (c, &oc) in offsets.iter().enumerate() {
                let xv = x[base + oc];
                if xv == ZERO {
                    continue;
                }
                let xv = xv * coeff;
                for &(r, v) in op.column(c) {
                    y[base + offsets[r]] += v * xv;
                }
            }
        });
    }

    pub fn apply_local(&self, op: &LocalOp, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; self.dim];
        self.apply_local_add(op, x, ONE, &mut y);
        y
    }

    /// Visits every index whose digits on `sites` are all zero.
    pub fn for_each_zero_on(&self, sites: &[usize], mut f: impl FnMut(usize)) {
        let free: Vec<usize> = (0..self.n).filter(|s| !sites.contains(s)).collect();
        if self.d == 2 {
            let mask: usize = sites.iter().map(|&s| self.strides[s]).sum();
            let full = self.dim - 1;
            // enumerate submasks of the complement in increasing order
            let comp = full & !mask;
            let mut i = 0usize;
            loop {
                f(i);
                if i == comp {
                    break;
                }
                i = ((i | mask) + 1) & comp;
            }
            return;
        }
        let mut digits = vec![0usize; free.len()];
        let mut idx = 0usize;
        loop {
            f(idx);
            let mut k = free.len();
            loop {
                if k == 0 {
                    return;
                }
                k -= 1;
                let s = free[k];
                if digits[k] + 1 < self.d {
                    digits[k] += 1;
                    idx += self.strides[s];
                    break;
                }
                idx -= digits[k] * self.strides[s];
                digits[k] = 0;
            }
        }
    }
}
