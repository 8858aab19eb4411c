//! Truncated multivariate jets over `f64`.
//!
//! A jet context fixes a list of infinitesimal symbols, each with its own
//! truncation order. Directional derivatives use order-1 symbols (one per
//! nesting level), homogeneity projections use a single order-k symbol, and
//! polynomial reconstruction over a vector base uses one higher-order symbol
//! per coordinate. Arithmetic is exact modulo the truncation ideal, so a
//! mixed coefficient read off a jet is the corresponding Taylor coefficient
//! of the evaluated expression up to f64 roundoff; no finite differencing
//! is involved.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

/// Shared list of per-symbol truncation orders.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JetCtx {
    caps: Arc<Vec<u8>>,
}

impl JetCtx {
    pub fn new(caps: Vec<u8>) -> Self {
        JetCtx { caps: Arc::new(caps) }
    }

    /// Context with `n` order-1 symbols.
    pub fn first_order(n: usize) -> Self {
        JetCtx::new(vec![1; n])
    }

    /// Context with no symbols; jets degenerate to plain numbers.
    pub fn scalar() -> Self {
        JetCtx::new(Vec::new())
    }

    pub fn num_symbols(&self) -> usize {
        self.caps.len()
    }

    pub fn cap(&self, i: usize) -> u8 {
        self.caps[i]
    }

    /// Upper bound for the nilpotency order of value-zero jets.
    pub fn max_total_degree(&self) -> usize {
        self.caps.iter().map(|&c| c as usize).sum()
    }

    pub fn constant(&self, v: f64) -> Jet {
        let mut terms = BTreeMap::new();
        if v != 0.0 {
            terms.insert(vec![0u8; self.caps.len()], v);
        }
        Jet {
            ctx: self.clone(),
            terms,
        }
    }

    pub fn zero(&self) -> Jet {
        Jet {
            ctx: self.clone(),
            terms: BTreeMap::new(),
        }
    }

    /// `value + symbol_i`.
    pub fn var(&self, value: f64, i: usize) -> Jet {
        assert!(i < self.caps.len(), "symbol index out of range");
        assert!(self.caps[i] >= 1);
        let mut terms = BTreeMap::new();
        if value != 0.0 {
            terms.insert(vec![0u8; self.caps.len()], value);
        }
        let mut e = vec![0u8; self.caps.len()];
        e[i] = 1;
        terms.insert(e, 1.0);
        Jet {
            ctx: self.clone(),
            terms,
        }
    }

    pub fn symbol(&self, i: usize) -> Jet {
        self.var(0.0, i)
    }

    /// New context with one extra symbol of the given truncation order
    /// appended after the existing ones.
    pub fn extend(&self, cap: u8) -> JetCtx {
        let mut caps = (*self.caps).clone();
        caps.push(cap);
        JetCtx::new(caps)
    }

    /// Context with the last symbol removed.
    pub fn shrink(&self) -> JetCtx {
        assert!(!self.caps.is_empty(), "cannot shrink an empty context");
        let mut caps = (*self.caps).clone();
        caps.pop();
        JetCtx::new(caps)
    }
}

/// Truncated Taylor polynomial in the context's symbols.
#[derive(Clone, PartialEq)]
pub struct Jet {
    ctx: JetCtx,
    terms: BTreeMap<Vec<u8>, f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(e, c)| {
                let mono: Vec<String> = e
                    .iter()
                    .enumerate()
                    .filter(|(_, &x)| x > 0)
                    .map(|(i, &x)| {
                        if x == 1 {
                            format!("s{i}")
                        } else {
                            format!("s{i}^{x}")
                        }
                    })
                    .collect();
                if mono.is_empty() {
                    format!("{c}")
                } else {
                    format!("{c}*{}", mono.join("*"))
                }
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

impl Jet {
    pub fn ctx(&self) -> &JetCtx {
        &self.ctx
    }

    pub fn value(&self) -> f64 {
        let key = vec![0u8; self.ctx.caps.len()];
        self.terms.get(&key).copied().unwrap_or(0.0)
    }

    /// Taylor coefficient of the monomial with the given exponents.
    pub fn coeff(&self, exps: &[u8]) -> f64 {
        assert_eq!(exps.len(), self.ctx.caps.len());
        self.terms.get(exps).copied().unwrap_or(0.0)
    }

    /// Coefficient of the product of the listed order-1 symbols
    /// (the mixed first partial derivative in those directions).
    pub fn mixed(&self, symbols: &[usize]) -> f64 {
        let mut exps = vec![0u8; self.ctx.caps.len()];
        for &s in symbols {
            exps[s] += 1;
        }
        self.coeff(&exps)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    fn check_ctx(&self, rhs: &Jet) {
        debug_assert!(
            Arc::ptr_eq(&self.ctx.caps, &rhs.ctx.caps) || self.ctx.caps == rhs.ctx.caps,
            "jets from different contexts"
        );
    }

    pub fn add(&self, rhs: &Jet) -> Jet {
        self.check_ctx(rhs);
        let mut terms = self.terms.clone();
        for (e, c) in &rhs.terms {
            let entry = terms.entry(e.clone()).or_insert(0.0);
            *entry += c;
            if *entry == 0.0 {
                terms.remove(e);
            }
        }
        Jet {
            ctx: self.ctx.clone(),
            terms,
        }
    }

    pub fn sub(&self, rhs: &Jet) -> Jet {
        self.add(&rhs.neg())
    }

    pub fn neg(&self) -> Jet {
        let terms = self.terms.iter().map(|(e, c)| (e.clone(), -c)).collect();
        Jet {
            ctx: self.ctx.clone(),
            terms,
        }
    }

    pub fn scale(&self, s: f64) -> Jet {
        if s == 0.0 {
            return self.ctx.zero();
        }
        let terms = self.terms.iter().map(|(e, c)| (e.clone(), c * s)).collect();
        Jet {
            ctx: self.ctx.clone(),
            terms,
        }
    }

    pub fn mul(&self, rhs: &Jet) -> Jet {
        self.check_ctx(rhs);
        let caps = &*self.ctx.caps;
        let mut terms: BTreeMap<Vec<u8>, f64> = BTreeMap::new();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &rhs.terms {
                let mut e = vec![0u8; caps.len()];
                let mut fits = true;
                for i in 0..caps.len() {
                    let s = ea[i] + eb[i];
                    if s > caps[i] {
                        fits = false;
                        break;
                    }
                    e[i] = s;
                }
                if !fits {
                    continue;
                }
                *terms.entry(e).or_insert(0.0) += ca * cb;
            }
        }
        terms.retain(|_, c| *c != 0.0);
        Jet {
            ctx: self.ctx.clone(),
            terms,
        }
    }

    /// Integer power by repeated multiplication.
    pub fn powi(&self, k: u32) -> Jet {
        let mut acc = self.ctx.constant(1.0);
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    /// Nilpotent part (constant term removed).
    fn nilpotent(&self) -> Jet {
        let mut terms = self.terms.clone();
        terms.remove(&vec![0u8; self.ctx.caps.len()]);
        Jet {
            ctx: self.ctx.clone(),
            terms,
        }
    }

    /// Compose with an analytic function given by its derivative tower:
    /// `derivs(m, c)` must return the m-th derivative at the point `c`.
    pub fn compose(&self, derivs: impl Fn(usize, f64) -> f64) -> Jet {
        let c = self.value();
        let n = self.nilpotent();
        let mut acc = self.ctx.constant(derivs(0, c));
        let mut pow = self.ctx.constant(1.0);
        let mut fact = 1.0;
        for m in 1..=self.ctx.max_total_degree() {
            pow = pow.mul(&n);
            if pow.is_zero() {
                break;
            }
            fact *= m as f64;
            acc = acc.add(&pow.scale(derivs(m, c) / fact));
        }
        acc
    }

    pub fn sin(&self) -> Jet {
        self.compose(|m, c| match m % 4 {
            0 => c.sin(),
            1 => c.cos(),
            2 => -c.sin(),
            _ => -c.cos(),
        })
    }

    pub fn cos(&self) -> Jet {
        self.compose(|m, c| match m % 4 {
            0 => c.cos(),
            1 => -c.sin(),
            2 => -c.cos(),
            _ => c.sin(),
        })
    }

    pub fn exp(&self) -> Jet {
        self.compose(|_, c| c.exp())
    }

    /// Multiplicative inverse; the constant term must be nonzero.
    pub fn inv(&self) -> Jet {
        let c = self.value();
        assert!(c != 0.0, "jet inverse with zero constant term");
        self.compose(|m, c| {
            // d^m/dt^m (1/t) = (-1)^m m! / t^(m+1); the factorial cancels
            // against compose's 1/m!, so return it explicitly.
            let mut d = 1.0 / c;
            for j in 1..=m {
                d *= -(j as f64) / c;
            }
            d
        })
    }

    pub fn div(&self, rhs: &Jet) -> Jet {
        self.mul(&rhs.inv())
    }

    /// Reinterpret in a context that has this jet's symbols as a prefix.
    pub fn lift(&self, target: &JetCtx) -> Jet {
        let k = self.ctx.num_symbols();
        assert!(
            target.num_symbols() >= k && (0..k).all(|i| target.cap(i) == self.ctx.cap(i)),
            "lift target must extend the source context"
        );
        let pad = target.num_symbols() - k;
        let terms = self
            .terms
            .iter()
            .map(|(e, c)| {
                let mut e2 = e.clone();
                e2.extend(std::iter::repeat(0u8).take(pad));
                (e2, *c)
            })
            .collect();
        Jet {
            ctx: target.clone(),
            terms,
        }
    }

    /// Taylor coefficient of `(last symbol)^power` as a jet in the remaining
    /// symbols.
    pub fn extract_last(&self, power: u8) -> Jet {
        let k = self.ctx.num_symbols();
        assert!(k >= 1, "no symbol to extract");
        assert!(power <= self.ctx.cap(k - 1), "power exceeds truncation order");
        let target = self.ctx.shrink();
        let mut terms = BTreeMap::new();
        for (e, c) in &self.terms {
            if e[k - 1] == power {
                terms.insert(e[..k - 1].to_vec(), *c);
            }
        }
        Jet {
            ctx: target,
            terms,
        }
    }

    /// Two-argument arctangent. The angle offset is split off so that only a
    /// nilpotent argument is fed to the series, keeping the constant branch
    /// of atan2 intact.
    pub fn atan2(y: &Jet, x: &Jet) -> Jet {
        y.check_ctx(x);
        let x0 = x.value();
        let y0 = y.value();
        assert!(
            x0 != 0.0 || y0 != 0.0,
            "atan2 at the origin has no jet expansion"
        );
        let base = y0.atan2(x0);
        // atan2(y,x) - atan2(y0,x0) = atan((x0 y - y0 x)/(x0 x + y0 y))
        let num = y.scale(x0).sub(&x.scale(y0));
        let den = x.scale(x0).add(&y.scale(y0));
        let u = num.div(&den);
        // u is nilpotent, so the series terminates.
        let mut acc = y.ctx().constant(base);
        let mut pow = u.clone();
        let mut k = 1usize;
        loop {
            if pow.is_zero() {
                break;
            }
            let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
            if k % 2 == 1 {
                acc = acc.add(&pow.scale(sign / k as f64));
            }
            if k > y.ctx().max_total_degree() {
                break;
            }
            pow = pow.mul(&u);
            k += 1;
        }
        acc
    }
}

/// Matrix with jet entries.
#[derive(Clone, Debug, PartialEq)]
pub struct JetMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Jet>,
}

impl JetMatrix {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Jet) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        JetMatrix { rows, cols, data }
    }

    pub fn zeros(ctx: &JetCtx, rows: usize, cols: usize) -> Self {
        JetMatrix::from_fn(rows, cols, |_, _| ctx.zero())
    }

    pub fn identity(ctx: &JetCtx, n: usize) -> Self {
        JetMatrix::from_fn(n, n, |r, c| ctx.constant(if r == c { 1.0 } else { 0.0 }))
    }

    pub fn from_f64(ctx: &JetCtx, m: &[Vec<f64>]) -> Self {
        JetMatrix::from_fn(m.len(), m[0].len(), |r, c| ctx.constant(m[r][c]))
    }

    pub fn at(&self, r: usize, c: usize) -> &Jet {
        &self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Jet) {
        self.data[r * self.cols + c] = v;
    }

    pub fn ctx(&self) -> &JetCtx {
        self.data[0].ctx()
    }

    pub fn add(&self, rhs: &JetMatrix) -> JetMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        JetMatrix::from_fn(self.rows, self.cols, |r, c| self.at(r, c).add(rhs.at(r, c)))
    }

    pub fn sub(&self, rhs: &JetMatrix) -> JetMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        JetMatrix::from_fn(self.rows, self.cols, |r, c| self.at(r, c).sub(rhs.at(r, c)))
    }

    pub fn mul(&self, rhs: &JetMatrix) -> JetMatrix {
        assert_eq!(self.cols, rhs.rows, "matrix dimension mismatch");
        JetMatrix::from_fn(self.rows, rhs.cols, |r, c| {
            let mut acc = self.ctx().zero();
            for k in 0..self.cols {
                acc = acc.add(&self.at(r, k).mul(rhs.at(k, c)));
            }
            acc
        })
    }

    pub fn scale(&self, s: &Jet) -> JetMatrix {
        JetMatrix::from_fn(self.rows, self.cols, |r, c| self.at(r, c).mul(s))
    }

    pub fn scale_f64(&self, s: f64) -> JetMatrix {
        JetMatrix::from_fn(self.rows, self.cols, |r, c| self.at(r, c).scale(s))
    }

    pub fn transpose(&self) -> JetMatrix {
        JetMatrix::from_fn(self.cols, self.rows, |r, c| self.at(c, r).clone())
    }

    pub fn apply(&self, v: &[Jet]) -> Vec<Jet> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|r| {
                let mut acc = self.ctx().zero();
                for c in 0..self.cols {
                    acc = acc.add(&self.at(r, c).mul(&v[c]));
                }
                acc
            })
            .collect()
    }

    pub fn trace(&self) -> Jet {
        assert_eq!(self.rows, self.cols);
        let mut acc = self.ctx().zero();
        for i in 0..self.rows {
            acc = acc.add(self.at(i, i));
        }
        acc
    }

    /// Determinant by cofactor expansion; fine for the small sizes used here.
    pub fn det(&self) -> Jet {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        match n {
            0 => self.ctx().constant(1.0),
            1 => self.at(0, 0).clone(),
            _ => {
                let mut acc = self.ctx().zero();
                for c in 0..n {
                    let minor = JetMatrix::from_fn(n - 1, n - 1, |i, j| {
                        let jj = if j < c { j } else { j + 1 };
                        self.at(i + 1, jj).clone()
                    });
                    let term = self.at(0, c).mul(&minor.det());
                    acc = if c % 2 == 0 {
                        acc.add(&term)
                    } else {
                        acc.sub(&term)
                    };
                }
                acc
            }
        }
    }

    pub fn lift(&self, target: &JetCtx) -> JetMatrix {
        JetMatrix::from_fn(self.rows, self.cols, |r, c| self.at(r, c).lift(target))
    }

    /// Largest absolute coefficient over all entries.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|j| j.max_abs()).fold(0.0, f64::max)
    }

    pub fn value_matrix(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|r| (0..self.cols).map(|c| self.at(r, c).value()).collect())
            .collect()
    }

    /// Inverse: invert the constant part numerically, then kill the
    /// nilpotent remainder with a terminating Neumann series.
    pub fn inverse(&self) -> JetMatrix {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let ctx = self.ctx().clone();
        let a0inv = invert_f64(&self.value_matrix())
            .expect("jet matrix with singular constant part");
        let a0inv = JetMatrix::from_f64(&ctx, &a0inv);
        // self = A0 + N  =>  self^-1 = (I + A0^-1 N)^-1 A0^-1
        let m = a0inv.mul(self); // I + A0^-1 N
        let nil = m.sub(&JetMatrix::identity(&ctx, n));
        let mut series = JetMatrix::identity(&ctx, n);
        let mut pow = JetMatrix::identity(&ctx, n);
        for _ in 0..ctx.max_total_degree() {
            pow = pow.mul(&nil).scale_f64(-1.0);
            if pow.data.iter().all(|j| j.is_zero()) {
                break;
            }
            series = series.add(&pow);
        }
        series.mul(&a0inv)
    }

    /// Matrix exponential by scaling and squaring with a Taylor series.
    /// For nilpotent matrices the series terminates and the result is exact
    /// to roundoff; otherwise terms are summed until they fall below 1e-19
    /// of the running magnitude.
    pub fn expm(&self) -> JetMatrix {
        assert_eq!(self.rows, self.cols);
        let ctx = self.ctx().clone();
        let norm = self.max_abs() * self.rows as f64;
        let mut squarings = 0u32;
        let mut scaled = self.clone();
        if norm > 0.5 {
            squarings = (norm / 0.5).log2().ceil().max(0.0) as u32;
            scaled = self.scale_f64(0.5f64.powi(squarings as i32));
        }
        let mut acc = JetMatrix::identity(&ctx, self.rows);
        let mut term = JetMatrix::identity(&ctx, self.rows);
        for m in 1..=40 {
            term = term.mul(&scaled).scale_f64(1.0 / m as f64);
            if term.data.iter().all(|j| j.is_zero()) {
                break;
            }
            acc = acc.add(&term);
            if term.max_abs() < 1e-19 {
                break;
            }
        }
        for _ in 0..squarings {
            acc = acc.mul(&acc);
        }
        acc
    }
}

/// Plain f64 matrix inverse via Gauss-Jordan with partial pivoting.
pub fn invert_f64(m: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&a_, &b_| {
            a[a_][col]
                .abs()
                .partial_cmp(&a[b_][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[piv][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, piv);
        inv.swap(col, piv);
        let d = a[col][col];
        for j in 0..n {
            a[col][j] /= d;
            inv[col][j] /= d;
        }
        for r in 0..n {
            if r != col {
                let f = a[r][col];
                if f != 0.0 {
                    for j in 0..n {
                        a[r][j] -= f * a[col][j];
                        inv[r][j] -= f * inv[col][j];
                    }
                }
            }
        }
    }
    Some(inv)
}

/// Taylor-coefficient extraction with truncation checking.
///
/// Returns the coefficient of the given exponent multi-index, or an error if
/// the monomial exceeds a symbol's truncation order (where the coefficient
/// would be meaningless rather than zero).
pub fn jet_extract(j: &Jet, monomial: &[u8]) -> Result<f64, crate::error::Error> {
    let ctx = j.ctx();
    if monomial.len() != ctx.num_symbols() {
        return Err(crate::error::Error::Dim(format!(
            "monomial has {} exponents, context has {} symbols",
            monomial.len(),
            ctx.num_symbols()
        )));
    }
    for (i, &e) in monomial.iter().enumerate() {
        if e > ctx.cap(i) {
            return Err(crate::error::Error::Truncation(format!(
                "exponent {} of symbol {} exceeds truncation order {}",
                e,
                i,
                ctx.cap(i)
            )));
        }
    }
    Ok(j.coeff(monomial))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_derivative_of_product() {
        let ctx = JetCtx::first_order(2);
        let x = ctx.var(2.0, 0);
        let y = ctx.var(3.0, 1);
        let f = x.mul(&y); // xy: d2/dxdy = 1, value 6
        assert_eq!(f.value(), 6.0);
        assert_eq!(f.mixed(&[0, 1]), 1.0);
        assert_eq!(f.mixed(&[0]), 3.0);
        assert_eq!(f.mixed(&[1]), 2.0);
    }

    #[test]
    fn order1_symbols_square_to_zero() {
        let ctx = JetCtx::first_order(1);
        let e = ctx.symbol(0);
        assert!(e.mul(&e).is_zero());
    }

    #[test]
    fn sin_third_order_coefficient() {
        // sin(lambda): coefficient of lambda^3 is -1/6.
        let ctx = JetCtx::new(vec![3]);
        let l = ctx.symbol(0);
        let s = l.sin();
        assert!((s.coeff(&[1]) - 1.0).abs() < 1e-15);
        assert!((s.coeff(&[3]) + 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(s.coeff(&[2]), 0.0);
        assert!((jet_extract(&s, &[3]).unwrap() + 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn extraction_checks_truncation() {
        let ctx = JetCtx::first_order(2);
        let j = ctx.var(0.0, 0).mul(&ctx.var(0.0, 1)).add(&ctx.var(0.0, 0));
        assert_eq!(jet_extract(&j, &[1, 1]).unwrap(), 1.0);
        assert_eq!(jet_extract(&j, &[1, 0]).unwrap(), 1.0);
        assert!(jet_extract(&j, &[2, 0]).is_err());
        assert!(jet_extract(&j, &[1]).is_err());
    }

    #[test]
    fn lift_and_extract_round_trip() {
        let ctx = JetCtx::first_order(2);
        let base = ctx.var(0.4, 0).mul(&ctx.var(1.5, 1));
        let big = ctx.extend(2);
        let lam = big.symbol(2);
        // (x*y) * (1 + lam)^2: lambda^2 coefficient recovers x*y.
        let lifted = base.lift(&big);
        let f = lifted.mul(&lam.add(&big.constant(1.0)).powi(2));
        let back = f.extract_last(2);
        assert_eq!(back.ctx().num_symbols(), 2);
        assert!(back.sub(&base).max_abs() < 1e-15);
        assert!(f.extract_last(1).sub(&base.scale(2.0)).max_abs() < 1e-15);
        assert!(f.extract_last(0).sub(&base).max_abs() < 1e-15);
    }

    #[test]
    fn composition_around_nonzero_point() {
        let ctx = JetCtx::new(vec![2]);
        let x = ctx.var(0.7, 0);
        let s = x.sin();
        assert!((s.value() - 0.7f64.sin()).abs() < 1e-15);
        assert!((s.coeff(&[1]) - 0.7f64.cos()).abs() < 1e-15);
        assert!((s.coeff(&[2]) + 0.7f64.sin() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn division_and_inverse() {
        let ctx = JetCtx::new(vec![2]);
        let x = ctx.var(2.0, 0);
        let inv = x.inv();
        // 1/(2+e) = 1/2 - e/4 + e^2/8
        assert!((inv.value() - 0.5).abs() < 1e-15);
        assert!((inv.coeff(&[1]) + 0.25).abs() < 1e-15);
        assert!((inv.coeff(&[2]) - 0.125).abs() < 1e-15);
        let one = x.mul(&inv);
        assert!((one.value() - 1.0).abs() < 1e-15);
        assert!(one.coeff(&[1]).abs() < 1e-15);
        assert!(one.coeff(&[2]).abs() < 1e-15);
    }

    #[test]
    fn atan2_jet_derivative() {
        // theta(t) = atan2(sin(a+t), cos(a+t)) should have d theta/dt = 1.
        for a in [0.3, 2.0, -2.5, 3.1] {
            let ctx = JetCtx::new(vec![2]);
            let t = ctx.symbol(0);
            let ang = t.add(&ctx.constant(a));
            let th = Jet::atan2(&ang.sin(), &ang.cos());
            let diff = (th.value() - a).rem_euclid(2.0 * std::f64::consts::PI);
            assert!(diff.min(2.0 * std::f64::consts::PI - diff) < 1e-12);
            assert!((th.coeff(&[1]) - 1.0).abs() < 1e-12, "a={a}");
            assert!(th.coeff(&[2]).abs() < 1e-12);
        }
    }

    #[test]
    fn expm_rotation_block() {
        // exp of a 2x2 rotation generator scaled by t gives cos/sin entries.
        let ctx = JetCtx::first_order(1);
        let t = 0.9;
        let gen = JetMatrix::from_fn(2, 2, |r, c| match (r, c) {
            (0, 1) => ctx.constant(-t),
            (1, 0) => ctx.constant(t),
            _ => ctx.constant(0.0),
        });
        let m = gen.expm();
        assert!((m.at(0, 0).value() - t.cos()).abs() < 1e-14);
        assert!((m.at(1, 0).value() - t.sin()).abs() < 1e-14);
    }

    #[test]
    fn expm_nilpotent_exact() {
        let ctx = JetCtx::scalar();
        // Strictly upper triangular 3x3: exp = I + N + N^2/2 exactly.
        let n = JetMatrix::from_fn(3, 3, |r, c| {
            ctx.constant(if c > r { (r + c) as f64 } else { 0.0 })
        });
        let e = n.expm();
        assert_eq!(e.at(0, 1).value(), 1.0);
        assert_eq!(e.at(1, 2).value(), 3.0);
        // (0,2) entry: n02 + n01*n12/1 * 1/2 * 2!... direct: 2 + (1*3)/2
        assert!((e.at(0, 2).value() - (2.0 + 1.5)).abs() < 1e-15);
    }

    #[test]
    fn matrix_inverse_with_jets() {
        let ctx = JetCtx::first_order(1);
        let e = ctx.symbol(0);
        let m = JetMatrix::from_fn(2, 2, |r, c| match (r, c) {
            (0, 0) => ctx.constant(2.0),
            (0, 1) => e.clone(),
            (1, 0) => ctx.constant(0.0),
            _ => ctx.constant(1.0),
        });
        let inv = m.inverse();
        let prod = m.mul(&inv);
        for r in 0..2 {
            for c in 0..2 {
                let want = if r == c { 1.0 } else { 0.0 };
                assert!((prod.at(r, c).value() - want).abs() < 1e-14);
                assert!(prod.at(r, c).max_abs() - prod.at(r, c).value().abs() < 1e-14);
            }
        }
    }

    #[test]
    fn det_and_trace() {
        let ctx = JetCtx::scalar();
        let m = JetMatrix::from_f64(&ctx, &[vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert!((m.det().value() + 2.0).abs() < 1e-15);
        assert!((m.trace().value() - 5.0).abs() < 1e-15);
    }
}
