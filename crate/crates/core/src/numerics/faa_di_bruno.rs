//! Coefficients of the higher-order chain rule
//!
//! `D^r(f∘g) = Σ_k c_{k,r} f^{(|k|)}(g) Π_i (g^{(i)})^{k_i}`
//!
//! summed over `k = (k_1, …, k_r)` with `Σ i·k_i = r`, where
//! `c_{k,r} = r! / (k_1!⋯k_r! · 1!^{k_1}⋯r!^{k_r})`.

use crate::error::{Error, Result};

pub const MAX_FDB_ORDER: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaaDiBrunoEntry {
    /// `k_i` = number of factors `D^i g`.
    pub multiplicities: Vec<u32>,
    pub coefficient: u64,
}

impl FaaDiBrunoEntry {
    /// `|k| = Σ k_i`, the order of the outer derivative.
    pub fn outer_order(&self) -> usize {
        self.multiplicities.iter().map(|&k| k as usize).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaaDiBrunoTable {
    pub order: usize,
    /// Sorted by multiplicity vector, descending lexicographically.
    pub entries: Vec<FaaDiBrunoEntry>,
}

fn factorial(n: u64) -> u64 {
    (1..=n).product()
}

pub fn faa_di_bruno_table(r: usize) -> Result<FaaDiBrunoTable> {
    if r == 0 || r > MAX_FDB_ORDER {
        return Err(Error::UnsupportedOrder {
            order: r,
            max: MAX_FDB_ORDER,
        });
    }
    let mut entries = Vec::new();
    let mut k = vec![0u32; r];
    collect(r, r, &mut k, &mut entries);
    entries.sort_by(|a, b| b.multiplicities.cmp(&a.multiplicities));
    Ok(FaaDiBrunoTable { order: r, entries })
}

// Fill k_part..k_1 so that Σ i·k_i = remaining.
fn collect(part: usize, remaining: usize, k: &mut Vec<u32>, out: &mut Vec<FaaDiBrunoEntry>) {
    if part == 1 {
        k[0] = remaining as u32;
        out.push(entry(k));
        k[0] = 0;
        return;
    }
    for m in 0..=remaining / part {
        k[part - 1] = m as u32;
        collect(part - 1, remaining - m * part, k, out);
    }
    k[part - 1] = 0;
}

fn entry(k: &[u32]) -> FaaDiBrunoEntry {
    let r: u64 = k
        .iter()
        .enumerate()
        .map(|(i, &ki)| (i as u64 + 1) * ki as u64)
        .sum();
    let mut denom = 1u64;
    for (i, &ki) in k.iter().enumerate() {
        denom *= factorial(ki as u64) * factorial(i as u64 + 1).pow(ki);
    }
    FaaDiBrunoEntry {
        multiplicities: k.to_vec(),
        coefficient: factorial(r) / denom,
    }
}

impl FaaDiBrunoTable {
    /// Σ c_{k,r}: the chain rule for `exp∘g` at a point where every
    /// derivative of both factors is 1, i.e. the number of set partitions.
    pub fn coefficient_sum(&self) -> u64 {
        self.entries.iter().map(|e| e.coefficient).sum()
    }

    /// `D^r(f∘g)` for scalar functions, from `outer[j] = f^{(j)}(g(t))` and
    /// `inner[i] = g^{(i)}(t)` (index 0 unused in `inner`).
    pub fn compose(&self, outer: &[f64], inner: &[f64]) -> f64 {
        self.entries
            .iter()
            .map(|e| {
                let prod: f64 = e
                    .multiplicities
                    .iter()
                    .enumerate()
                    .map(|(i, &ki)| inner[i + 1].powi(ki as i32))
                    .product();
                e.coefficient as f64 * outer[e.outer_order()] * prod
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_order_is_plain_chain_rule() {
        let t = faa_di_bruno_table(1).unwrap();
        assert_eq!(
            t.entries,
            vec![FaaDiBrunoEntry {
                multiplicities: vec![1],
                coefficient: 1
            }]
        );
    }

    #[test]
    fn third_order_table() {
        let t = faa_di_bruno_table(3).unwrap();
        let got: Vec<(Vec<u32>, u64)> = t
            .entries
            .iter()
            .map(|e| (e.multiplicities.clone(), e.coefficient))
            .collect();
        assert_eq!(
            got,
            vec![(vec![3, 0, 0], 1), (vec![1, 1, 0], 3), (vec![0, 0, 1], 1)]
        );
    }

    #[test]
    fn out_of_range_orders() {
        assert!(faa_di_bruno_table(0).is_err());
        assert!(faa_di_bruno_table(9).is_err());
        assert_eq!(faa_di_bruno_table(8).unwrap().coefficient_sum(), 4140);
    }

    #[test]
    fn composes_sin_of_square() {
        // h(t) = sin(t²), h''' = -8t³cos(t²) - 12t sin(t²)
        let t0: f64 = 0.7;
        let g = t0 * t0;
        let outer = [g.sin(), g.cos(), -g.sin(), -g.cos()];
        let inner = [g, 2.0 * t0, 2.0, 0.0];
        let table = faa_di_bruno_table(3).unwrap();
        let expect = -8.0 * t0.powi(3) * g.cos() - 12.0 * t0 * g.sin();
        assert!((table.compose(&outer, &inner) - expect).abs() < 1e-13);
    }
}
