//! Cayley-Sylvester dimensions and products of generators.

use rayon::prelude::*;

use crate::error::Result;
use crate::registry::Registry;
use crate::sl2::SemiInvariant;

/// A power series in `T` with integer coefficients, truncated after
/// `T^bound`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeriesPoly {
    coeffs: Vec<i128>,
}

impl SeriesPoly {
    pub fn one(bound: usize) -> Self {
        let mut coeffs = vec![0; bound + 1];
        coeffs[0] = 1;
        SeriesPoly { coeffs }
    }

    pub fn bound(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, n: usize) -> i128 {
        self.coeffs.get(n).copied().unwrap_or(0)
    }

    /// Multiplies by `1 - T^k`.
    pub fn mul_one_minus(&mut self, k: usize) {
        for n in (k..self.coeffs.len()).rev() {
            self.coeffs[n] -= self.coeffs[n - k];
        }
    }

    /// Multiplies by `1/(1 - T^k) = 1 + T^k + T^2k + ...`.
    pub fn div_one_minus(&mut self, k: usize) {
        assert!(k > 0, "1/(1 - T^0) is undefined");
        for n in k..self.coeffs.len() {
            self.coeffs[n] += self.coeffs[n - k];
        }
    }
}

/// The generating series `prod_{k=1..i} (1 - T^(d+k)) / (1 - T^k)`,
/// truncated at `bound`. Its coefficient of `T^w` counts multisets of size
/// `i` from `{0..d}` with sum `w`.
pub fn gaussian_series(d: u32, i: u32, bound: usize) -> SeriesPoly {
    let mut s = SeriesPoly::one(bound);
    for k in 1..=i as usize {
        s.mul_one_minus(d as usize + k);
        s.div_one_minus(k);
    }
    s
}

/// Dimension of the space of covariants of degree `i` and order `j` of the
/// binary form of degree `d`.
pub fn cs_dim(d: u32, i: u32, j: u32) -> u64 {
    let di = d as u64 * i as u64;
    if j as u64 > di || (di - j as u64) % 2 != 0 {
        return 0;
    }
    let w = ((di - j as u64) / 2) as usize;
    // (1 - T) times the Gaussian series gives N(w) - N(w-1) directly.
    let mut s = gaussian_series(d, i, w);
    s.mul_one_minus(1);
    let c = s.coeff(w);
    debug_assert!(c >= 0);
    c as u64
}

/// Exponent vector of a product: `(registry index, exponent)` pairs in
/// increasing index order.
pub type ProductExponents = Vec<(usize, u32)>;

/// Shape counts for a knapsack over `(degree, order)`: the number of
/// multisets of the given generator shapes with total degree `i` and total
/// order `j`.
pub fn count_products(shapes: &[(u32, u32)], i: u32, j: u32) -> u64 {
    // Group equal shapes: n generators of one shape give
    // binom(n + e - 1, e) multisets of size e.
    let mut groups: Vec<((u32, u32), u64)> = Vec::new();
    for &s in shapes {
        if s.0 == 0 || s.0 > i {
            continue;
        }
        match groups.iter_mut().find(|g| g.0 == s) {
            Some(g) => g.1 += 1,
            None => groups.push((s, 1)),
        }
    }
    let (ni, nj) = (i as usize + 1, j as usize + 1);
    let mut dp = vec![0u128; ni * nj];
    dp[0] = 1;
    for &((gd, go), n) in &groups {
        let mut next = vec![0u128; ni * nj];
        for a in 0..ni {
            for b in 0..nj {
                let v = dp[a * nj + b];
                if v == 0 {
                    continue;
                }
                let mut e = 0u64;
                let mut multisets: u128 = 1;
                loop {
                    let (da, db) = (a + (e * gd as u64) as usize, b + (e * go as u64) as usize);
                    if da >= ni || db >= nj {
                        break;
                    }
                    next[da * nj + db] += v * multisets;
                    // binom(n+e, e+1) = binom(n+e-1, e) * (n+e) / (e+1)
                    multisets = multisets * (n + e) as u128 / (e + 1) as u128;
                    e += 1;
                    if go == 0 && gd == 0 {
                        break;
                    }
                }
            }
        }
        dp = next;
    }
    dp[i as usize * nj + j as usize] as u64
}

/// All exponent vectors over `shapes` with total degree `i` and total order
/// `j`, in lexicographic order of the exponent vectors read from the first
/// generator, larger exponents first.
pub fn product_exponents(shapes: &[(u32, u32)], i: u32, j: u32) -> Vec<ProductExponents> {
    let n = shapes.len();
    let (ni, nj) = (i as usize + 1, j as usize + 1);
    // reach[k][(a,b)]: (a,b) is a sum of shapes[k..].
    let mut reach = vec![vec![false; ni * nj]; n + 1];
    reach[n][0] = true;
    for k in (0..n).rev() {
        let (gd, go) = (shapes[k].0 as usize, shapes[k].1 as usize);
        let (head, tail) = reach.split_at_mut(k + 1);
        let cur = &mut head[k];
        let after = &tail[0];
        for a in 0..ni {
            for b in 0..nj {
                if !after[a * nj + b] {
                    continue;
                }
                let (mut x, mut y) = (a, b);
                while x < ni && y < nj {
                    cur[x * nj + y] = true;
                    if gd == 0 && go == 0 {
                        break;
                    }
                    x += gd;
                    y += go;
                }
            }
        }
    }
    let mut out = Vec::new();
    let mut stack = Vec::new();
    fn dfs(
        k: usize,
        a: usize,
        b: usize,
        shapes: &[(u32, u32)],
        reach: &[Vec<bool>],
        nj: usize,
        stack: &mut Vec<(usize, u32)>,
        out: &mut Vec<ProductExponents>,
    ) {
        if a == 0 && b == 0 {
            out.push(stack.clone());
            return;
        }
        if k == shapes.len() || !reach[k][a * nj + b] {
            return;
        }
        let (gd, go) = (shapes[k].0 as usize, shapes[k].1 as usize);
        let mut emax = a / gd;
        if go > 0 {
            emax = emax.min(b / go);
        }
        for e in (1..=emax).rev() {
            let (ra, rb) = (a - e * gd, b - e * go);
            if reach[k + 1][ra * nj + rb] {
                stack.push((k, e as u32));
                dfs(k + 1, ra, rb, shapes, reach, nj, stack, out);
                stack.pop();
            }
        }
        dfs(k + 1, a, b, shapes, reach, nj, stack, out);
    }
    if i > 0 {
        dfs(
            0, i as usize, j as usize, shapes, &reach, nj, &mut stack, &mut out,
        );
    }
    out
}

/// Generators usable as factors of a degree-`i` product, with their
/// registry indices.
fn factor_shapes(registry: &Registry, i: u32) -> (Vec<usize>, Vec<(u32, u32)>) {
    registry
        .generators_below(i)
        .map(|(k, r)| (k, r.shape()))
        .unzip()
}

/// Number of products of at least two generators with degree `i` and order
/// `j`.
pub fn sigma_count(registry: &Registry, i: u32, j: u32) -> Result<u64> {
    registry.require_complete_below(i)?;
    let (_, shapes) = factor_shapes(registry, i);
    Ok(count_products(&shapes, i, j))
}

/// The products counted by [`sigma_count`], as exponent vectors over
/// registry indices, in deterministic order.
pub fn enumerate_product_exponents(
    registry: &Registry,
    i: u32,
    j: u32,
) -> Result<Vec<ProductExponents>> {
    registry.require_complete_below(i)?;
    let (idx, shapes) = factor_shapes(registry, i);
    Ok(product_exponents(&shapes, i, j)
        .into_iter()
        .map(|v| v.into_iter().map(|(k, e)| (idx[k], e)).collect())
        .collect())
}

/// Evaluates one exponent vector.
pub fn product_value(registry: &Registry, exps: &ProductExponents) -> Result<SemiInvariant> {
    let mut acc: Option<SemiInvariant> = None;
    for &(k, e) in exps {
        let rec = &registry.records()[k];
        let v = rec.value.as_ref().ok_or_else(|| {
            crate::Error::InvalidInput(format!("product uses opaque record `{}`", rec.name))
        })?;
        let p = v.pow(e);
        acc = Some(match acc {
            None => p,
            Some(a) => a.mul(&p),
        });
    }
    acc.ok_or_else(|| crate::Error::InvalidInput("empty product".into()))
}

/// The product polynomials counted by [`sigma_count`], in the order of
/// [`enumerate_product_exponents`].
pub fn enumerate_products(registry: &Registry, i: u32, j: u32) -> Result<Vec<SemiInvariant>> {
    let exps = enumerate_product_exponents(registry, i, j)?;
    exps.par_iter()
        .map(|e| product_value(registry, e))
        .collect()
}

/// Human-readable name of a product, e.g. `t^2*dv1`.
pub fn product_name(registry: &Registry, exps: &ProductExponents) -> String {
    exps.iter()
        .map(|&(k, e)| {
            let n = &registry.records()[k].name;
            if e == 1 {
                n.clone()
            } else {
                format!("{n}^{e}")
            }
        })
        .collect::<Vec<_>>()
        .join("*")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sl2::FormContext;

    #[test]
    fn series_geometric_division() {
        let mut s = SeriesPoly::one(6);
        s.div_one_minus(2);
        assert_eq!(
            (0..=6).map(|n| s.coeff(n)).collect::<Vec<_>>(),
            [1, 0, 1, 0, 1, 0, 1]
        );
        s.mul_one_minus(2);
        assert_eq!(s, SeriesPoly::one(6));
    }

    #[test]
    fn cs_dim_edge_cases() {
        assert_eq!(cs_dim(7, 1, 7), 1);
        assert_eq!(cs_dim(7, 2, 15), 0);
        assert_eq!(cs_dim(7, 2, 16), 0);
        assert_eq!(cs_dim(7, 2, 14), 1);
        assert_eq!(cs_dim(2, 2, 0), 1);
        assert_eq!(cs_dim(4, 3, 0), 1);
    }

    #[test]
    fn knapsack_small() {
        // t (1,7), dv1 (2,6), dv2 (2,2), dv3 (2,10)
        let shapes = [(1, 7), (2, 6), (2, 2), (2, 10)];
        assert_eq!(count_products(&shapes, 2, 14), 1);
        assert_eq!(count_products(&shapes, 2, 20), 0);
        let v = product_exponents(&shapes, 4, 12);
        assert_eq!(v.len() as u64, count_products(&shapes, 4, 12));
        assert_eq!(v, vec![vec![(1, 2)], vec![(2, 1), (3, 1)]]);
        assert_eq!(count_products(&[], 5, 3), 0);
    }

    #[test]
    fn registry_products_need_completeness() {
        let ctx = FormContext::new(7).unwrap();
        let reg = Registry::new(&ctx);
        assert_eq!(sigma_count(&reg, 2, 14).unwrap(), 1);
        let p = enumerate_products(&reg, 2, 14).unwrap();
        assert_eq!(p[0].zform(), &"t^2".parse().unwrap());
        assert!(sigma_count(&reg, 3, 21).is_err());
    }
}
