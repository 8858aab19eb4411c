//! Bigraded complex of forms with symmetric-power coefficients over a
//! linear base.
//!
//! Elements of bidegree `(p, q)` are ladders `(c_0, c_1, …)`: each `c_k`
//! eats `p − k` algebra directions and returns a `(q − k)`-form on the
//! base with values in `S^k g* ⊗ C`. Values are stored on constant basis
//! sections only; evaluation on function-multiplied sections is derived
//! from the ladder rule
//! `c_k(f·u_1, … | ·) = f c_k(u_1, … | ·) + df ∧ c_{k+1}(u_2, … | u_1, ·)`
//! (see [`WeilElement::eval_first_scaled`]). The differential
//! [`weil_differential`] combines the coefficient differential of the
//! section action with contractions against the anchor, and
//! [`weil_wedge`] gives the right module structure over constant forms on
//! the algebra.
//!
//! Base coefficients are polynomial with a hard total-degree cap; any
//! operation that would overflow the cap reports a truncation error
//! instead of dropping terms.

use std::collections::BTreeMap;

use crate::error::Error;
use crate::lie::{LieAlgebra, Representation};
use crate::perm::unshuffles;
use crate::scalar::Scalar;
use crate::tensor::{alt_tuples, sym_tuples, AltSymTensor};

/// Default total polynomial degree cap for base coefficients.
pub const DEFAULT_POLY_CAP: usize = 6;

/// Sorts a strictly-increasing candidate key, returning the permutation
/// sign; `None` when an index repeats (the term vanishes).
fn sort_signed(idx: &[usize]) -> Option<(Vec<usize>, i64)> {
    let mut v = idx.to_vec();
    let mut sign = 1i64;
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if v.windows(2).any(|w| w[0] == w[1]) {
        return None;
    }
    Some((v, sign))
}

/// Exterior form on `ℝ^{n_m}` with polynomial coefficients and values in
/// a coordinate space. Terms are keyed by a strictly increasing 1-based
/// slot tuple and an exponent vector of length `n_m`; the total exponent
/// degree is capped, and writes past the cap fail loudly.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyForm<S: Scalar> {
    pub n_m: usize,
    /// Form degree.
    pub r: usize,
    pub value_dim: usize,
    pub degree_cap: usize,
    coeffs: BTreeMap<(Vec<usize>, Vec<u8>), Vec<S>>,
}

impl<S: Scalar> PolyForm<S> {
    pub fn zero(n_m: usize, r: usize, value_dim: usize, degree_cap: usize) -> Self {
        PolyForm {
            n_m,
            r,
            value_dim,
            degree_cap,
            coeffs: BTreeMap::new(),
        }
    }

    /// Adds `value · x^expo dx^idx`. The slot tuple is canonicalized with
    /// its permutation sign; repeated slots contribute nothing.
    pub fn add_term(&mut self, idx: &[usize], expo: &[u8], value: &[S]) -> Result<(), Error> {
        if idx.len() != self.r {
            return Err(Error::Dim(format!(
                "expected {} form slots, got {}",
                self.r,
                idx.len()
            )));
        }
        if idx.iter().any(|&i| i == 0 || i > self.n_m) {
            return Err(Error::Dim("form slot out of range".into()));
        }
        if expo.len() != self.n_m {
            return Err(Error::Dim("exponent vector length mismatch".into()));
        }
        if value.len() != self.value_dim {
            return Err(Error::Dim("value length mismatch".into()));
        }
        let total: usize = expo.iter().map(|&e| e as usize).sum();
        if total > self.degree_cap {
            return Err(Error::Truncation(format!(
                "polynomial degree {total} exceeds the cap {}",
                self.degree_cap
            )));
        }
        let (key, sign) = match sort_signed(idx) {
            Some(ks) => ks,
            None => return Ok(()),
        };
        let slot = self
            .coeffs
            .entry((key, expo.to_vec()))
            .or_insert_with(|| vec![S::zero(); self.value_dim]);
        for (s, v) in slot.iter_mut().zip(value) {
            *s += S::from_int(sign) * v.clone();
        }
        if slot.iter().all(|s| s.is_zero()) {
            let key = (sort_signed(idx).unwrap().0, expo.to_vec());
            self.coeffs.remove(&key);
        }
        Ok(())
    }

    /// Coefficient at a (possibly unsorted) slot tuple; resolves signs and
    /// returns zeros for absent terms.
    pub fn coeff(&self, idx: &[usize], expo: &[u8]) -> Vec<S> {
        match sort_signed(idx) {
            None => vec![S::zero(); self.value_dim],
            Some((key, sign)) => match self.coeffs.get(&(key, expo.to_vec())) {
                None => vec![S::zero(); self.value_dim],
                Some(v) => v
                    .iter()
                    .map(|x| S::from_int(sign) * x.clone())
                    .collect(),
            },
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(Vec<usize>, Vec<u8>), &Vec<S>)> {
        self.coeffs.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs
            .values()
            .flat_map(|v| v.iter().map(|x| x.approx_f64().abs()))
            .fold(0.0, f64::max)
    }

    fn same_shape(&self, rhs: &Self) -> Result<(), Error> {
        if self.n_m != rhs.n_m || self.r != rhs.r || self.value_dim != rhs.value_dim {
            return Err(Error::Dim("form shape mismatch".into()));
        }
        Ok(())
    }

    pub fn add(&self, rhs: &Self) -> Result<Self, Error> {
        self.same_shape(rhs)?;
        let mut out = self.clone();
        out.degree_cap = self.degree_cap.max(rhs.degree_cap);
        for ((idx, expo), v) in rhs.terms() {
            out.add_term(idx, expo, v)?;
        }
        Ok(out)
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self, Error> {
        self.add(&rhs.neg())
    }

    pub fn neg(&self) -> Self {
        self.map_values(|x| -x.clone())
    }

    pub fn scale(&self, s: &S) -> Self {
        if s.is_zero() {
            return PolyForm::zero(self.n_m, self.r, self.value_dim, self.degree_cap);
        }
        self.map_values(|x| s.clone() * x.clone())
    }

    fn map_values(&self, f: impl Fn(&S) -> S) -> Self {
        let mut out = PolyForm::zero(self.n_m, self.r, self.value_dim, self.degree_cap);
        for (key, v) in self.coeffs.iter() {
            let w: Vec<S> = v.iter().map(&f).collect();
            if w.iter().all(|x| x.is_zero()) {
                continue;
            }
            out.coeffs.insert(key.clone(), w);
        }
        out
    }

    /// Applies a constant matrix (rows over the scalar) to every value.
    pub fn apply_matrix(&self, m: &[Vec<S>]) -> Result<Self, Error> {
        if m.iter().any(|row| row.len() != self.value_dim) {
            return Err(Error::Dim("matrix width mismatch".into()));
        }
        let mut out = PolyForm::zero(self.n_m, self.r, m.len(), self.degree_cap);
        for ((idx, expo), v) in self.terms() {
            let w: Vec<S> = m
                .iter()
                .map(|row| {
                    let mut acc = S::zero();
                    for (a, b) in row.iter().zip(v) {
                        acc += a.clone() * b.clone();
                    }
                    acc
                })
                .collect();
            out.add_term(idx, expo, &w)?;
        }
        Ok(out)
    }

    /// Wedge with a scalar-valued left factor (covers multiplication by a
    /// polynomial when `self.r == 0`).
    pub fn wedge(&self, rhs: &PolyForm<S>) -> Result<PolyForm<S>, Error> {
        if self.n_m != rhs.n_m {
            return Err(Error::Dim("wedge over different bases".into()));
        }
        if self.value_dim != 1 {
            return Err(Error::Dim("left wedge factor must be scalar-valued".into()));
        }
        let cap = self.degree_cap.max(rhs.degree_cap);
        let mut out = PolyForm::zero(self.n_m, self.r + rhs.r, rhs.value_dim, cap);
        for ((ia, ea), va) in self.terms() {
            for ((ib, eb), vb) in rhs.terms() {
                let mut idx = ia.clone();
                idx.extend_from_slice(ib);
                let expo: Vec<u8> = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
                let w: Vec<S> = vb.iter().map(|x| va[0].clone() * x.clone()).collect();
                out.add_term(&idx, &expo, &w)?;
            }
        }
        Ok(out)
    }

    /// Exterior derivative; lowers polynomial degree by one, so it never
    /// overflows the cap.
    pub fn exterior_derivative(&self) -> Self {
        let mut out = PolyForm::zero(self.n_m, self.r + 1, self.value_dim, self.degree_cap);
        for ((idx, expo), v) in self.terms() {
            for i in 0..self.n_m {
                if expo[i] == 0 {
                    continue;
                }
                let mut e2 = expo.clone();
                e2[i] -= 1;
                let mut key = vec![i + 1];
                key.extend_from_slice(idx);
                let w: Vec<S> = v
                    .iter()
                    .map(|x| S::from_int(expo[i] as i64) * x.clone())
                    .collect();
                out.add_term(&key, &e2, &w).expect("degree decreases");
            }
        }
        out
    }

    /// Contraction with the linear vector field `x ↦ Ax`; raises the
    /// polynomial degree by one and reports cap overflow.
    pub fn contract_linear(&self, a: &[Vec<S>]) -> Result<Self, Error> {
        if self.r == 0 {
            return Err(Error::Dim("cannot contract a 0-form".into()));
        }
        if a.len() != self.n_m || a.iter().any(|row| row.len() != self.n_m) {
            return Err(Error::Dim("vector field matrix must be square".into()));
        }
        let mut out = PolyForm::zero(self.n_m, self.r - 1, self.value_dim, self.degree_cap);
        for ((idx, expo), v) in self.terms() {
            for (t, &slot) in idx.iter().enumerate() {
                let sign = if t % 2 == 0 { 1 } else { -1 };
                let rest: Vec<usize> = idx
                    .iter()
                    .enumerate()
                    .filter(|(pos, _)| *pos != t)
                    .map(|(_, &s)| s)
                    .collect();
                for j in 0..self.n_m {
                    let coef = a[slot - 1][j].clone();
                    if coef.is_zero() {
                        continue;
                    }
                    let mut e2 = expo.clone();
                    e2[j] += 1;
                    let w: Vec<S> = v
                        .iter()
                        .map(|x| S::from_int(sign) * coef.clone() * x.clone())
                        .collect();
                    out.add_term(&rest, &e2, &w)?;
                }
            }
        }
        Ok(out)
    }

    /// Lie derivative along the linear vector field `x ↦ Ax`; preserves
    /// both the form degree and the polynomial degree.
    pub fn lie_linear(&self, a: &[Vec<S>]) -> Result<Self, Error> {
        if a.len() != self.n_m || a.iter().any(|row| row.len() != self.n_m) {
            return Err(Error::Dim("vector field matrix must be square".into()));
        }
        let mut out = PolyForm::zero(self.n_m, self.r, self.value_dim, self.degree_cap);
        for ((idx, expo), v) in self.terms() {
            // derivative of the coefficient polynomial
            for i in 0..self.n_m {
                if expo[i] == 0 {
                    continue;
                }
                for j in 0..self.n_m {
                    let coef = a[i][j].clone();
                    if coef.is_zero() {
                        continue;
                    }
                    let mut e2 = expo.clone();
                    e2[i] -= 1;
                    e2[j] += 1;
                    let w: Vec<S> = v
                        .iter()
                        .map(|x| S::from_int(expo[i] as i64) * coef.clone() * x.clone())
                        .collect();
                    out.add_term(idx, &e2, &w).expect("degree preserved");
                }
            }
            // derivative of the slot covectors
            for (t, &slot) in idx.iter().enumerate() {
                for j in 0..self.n_m {
                    let coef = a[slot - 1][j].clone();
                    if coef.is_zero() {
                        continue;
                    }
                    let mut key = idx.clone();
                    key[t] = j + 1;
                    let w: Vec<S> = v.iter().map(|x| coef.clone() * x.clone()).collect();
                    out.add_term(&key, expo, &w).expect("degree preserved");
                }
            }
        }
        Ok(out)
    }

    /// Directional derivative of a scalar polynomial along `x ↦ Ax`.
    pub fn directional(&self, a: &[Vec<S>]) -> Result<Self, Error> {
        if self.r != 0 {
            return Err(Error::Dim("directional derivative expects a 0-form".into()));
        }
        self.exterior_derivative().contract_linear(a)
    }
}

/// Base data for the complex: a Lie algebra acting on `ℝ^{n_m}` by linear
/// vector fields `ρ(e_i) = (x ↦ A_i x)` together with a linear action on
/// the coefficient space `C`. The constructor verifies both bracket
/// relations, in the convention each family actually composes in: fields
/// satisfy `[x ↦ Ax, x ↦ Bx] = (x ↦ (BA − AB)x)`, so the anchor matrices
/// of a morphism obey `A_j A_i − A_i A_j = Σ c^k_{ij} A_k`, while the
/// coefficient matrices obey the plain commutator relation.
#[derive(Clone, Debug)]
pub struct LinearActionBase<S: Scalar> {
    pub algebra: LieAlgebra,
    pub n_m: usize,
    pub dim_c: usize,
    /// One `n_m x n_m` matrix per basis direction.
    pub anchor: Vec<Vec<Vec<S>>>,
    /// One `dim_c x dim_c` matrix per basis direction.
    pub rho: Vec<Vec<Vec<S>>>,
}

fn mat_shape_ok<S: Scalar>(ms: &[Vec<Vec<S>>], n: usize, size: usize) -> bool {
    ms.len() == n && ms.iter().all(|m| m.len() == size && m.iter().all(|r| r.len() == size))
}

fn mat_mul<S: Scalar>(a: &[Vec<S>], b: &[Vec<S>]) -> Vec<Vec<S>> {
    let size = a.len();
    (0..size)
        .map(|r| {
            (0..size)
                .map(|c| {
                    let mut acc = S::zero();
                    for k in 0..size {
                        acc += a[r][k].clone() * b[k][c].clone();
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

/// Largest violation of the bracket relations by a family of matrices.
/// As linear maps the bracket is `AB − BA`; as the linear vector fields
/// `x ↦ Ax` composition reverses, so the field bracket is `BA − AB`.
fn bracket_residual<S: Scalar>(algebra: &LieAlgebra, ms: &[Vec<Vec<S>>], as_fields: bool) -> f64 {
    let n = algebra.n;
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            let ab = mat_mul(&ms[i], &ms[j]);
            let ba = mat_mul(&ms[j], &ms[i]);
            let size = ms[i].len();
            for r in 0..size {
                for c in 0..size {
                    let mut acc = if as_fields {
                        ba[r][c].clone() - ab[r][c].clone()
                    } else {
                        ab[r][c].clone() - ba[r][c].clone()
                    };
                    for m in 0..n {
                        let coef = algebra.structure_constant(i, j, m);
                        if !coef.is_zero() {
                            acc = acc - S::from_rat(coef) * ms[m][r][c].clone();
                        }
                    }
                    worst = worst.max(acc.approx_f64().abs());
                }
            }
        }
    }
    worst
}

impl<S: Scalar> LinearActionBase<S> {
    pub fn new(
        algebra: LieAlgebra,
        n_m: usize,
        anchor: Vec<Vec<Vec<S>>>,
        rho: Vec<Vec<Vec<S>>>,
    ) -> Result<Self, Error> {
        let n = algebra.n;
        if !mat_shape_ok(&anchor, n, n_m) {
            return Err(Error::Dim(format!(
                "anchor needs {n} matrices of size {n_m}"
            )));
        }
        if rho.is_empty() || rho.len() != n {
            return Err(Error::Dim(format!("need {n} coefficient matrices")));
        }
        let dim_c = rho[0].len();
        if !mat_shape_ok(&rho, n, dim_c) {
            return Err(Error::Dim("coefficient matrices must be square".into()));
        }
        let base = LinearActionBase {
            algebra,
            n_m,
            dim_c,
            anchor,
            rho,
        };
        if base.morphism_residual() > 1e-9 {
            return Err(Error::Domain(
                "anchor or coefficient matrices do not represent the bracket".into(),
            ));
        }
        Ok(base)
    }

    /// Base over a single point: no anchor, coefficients from an exact
    /// representation.
    pub fn point(rep: &Representation) -> Self {
        let n = rep.algebra.n;
        let rho = rep
            .rho
            .iter()
            .map(|m| {
                (0..rep.dim_c)
                    .map(|r| (0..rep.dim_c).map(|c| S::from_rat(m.at(r, c))).collect())
                    .collect()
            })
            .collect();
        LinearActionBase {
            algebra: rep.algebra.clone(),
            n_m: 0,
            dim_c: rep.dim_c,
            anchor: vec![Vec::new(); n],
            rho,
        }
    }

    /// Largest violation of the bracket conditions: the anchor must be a
    /// morphism into vector fields, the coefficient matrices into linear
    /// maps.
    pub fn morphism_residual(&self) -> f64 {
        bracket_residual(&self.algebra, &self.anchor, true)
            .max(bracket_residual(&self.algebra, &self.rho, false))
    }
}

/// Element of the bigraded complex: the ladder `(c_0, …, c_{min(p,q)})`
/// stored on constant basis sections. Keys are `(k, u-tuple, v-tuple)`
/// with the u-tuple strictly increasing (signs resolved on access) and
/// the v-tuple weakly increasing.
#[derive(Clone, Debug, PartialEq)]
pub struct WeilElement<S: Scalar> {
    pub p: usize,
    pub q: usize,
    /// Algebra dimension.
    pub n: usize,
    pub n_m: usize,
    pub dim_c: usize,
    pub degree_cap: usize,
    comps: BTreeMap<(usize, Vec<usize>, Vec<usize>), PolyForm<S>>,
}

impl<S: Scalar> WeilElement<S> {
    pub fn zero(n: usize, n_m: usize, dim_c: usize, p: usize, q: usize, degree_cap: usize) -> Self {
        WeilElement {
            p,
            q,
            n,
            n_m,
            dim_c,
            degree_cap,
            comps: BTreeMap::new(),
        }
    }

    /// Adds `form` to the `k`-th ladder rung at the given slots. The
    /// u-tuple is canonicalized with its sign and the v-tuple sorted.
    pub fn add_component(
        &mut self,
        k: usize,
        us: &[usize],
        vs: &[usize],
        form: PolyForm<S>,
    ) -> Result<(), Error> {
        if k > self.p.min(self.q) {
            return Err(Error::Dim(format!("rung {k} exceeds min(p, q)")));
        }
        if us.len() != self.p - k || vs.len() != k {
            return Err(Error::Dim("slot counts do not match the rung".into()));
        }
        if us.iter().chain(vs).any(|&i| i == 0 || i > self.n) {
            return Err(Error::Dim("basis index out of range".into()));
        }
        if form.n_m != self.n_m || form.r != self.q - k || form.value_dim != self.dim_c {
            return Err(Error::Dim("rung form has the wrong shape".into()));
        }
        let (ukey, sign) = match sort_signed(us) {
            Some(ks) => ks,
            None => return Ok(()),
        };
        let mut vkey = vs.to_vec();
        vkey.sort_unstable();
        let signed = form.scale(&S::from_int(sign));
        if signed.is_zero() {
            return Ok(());
        }
        let key = (k, ukey, vkey);
        match self.comps.get(&key) {
            None => {
                self.comps.insert(key, signed);
            }
            Some(existing) => {
                let sum = existing.add(&signed)?;
                if sum.is_zero() {
                    self.comps.remove(&key);
                } else {
                    self.comps.insert(key, sum);
                }
            }
        }
        Ok(())
    }

    /// Value of the `k`-th rung at (possibly unsorted) slots; zero for
    /// absent keys, repeated u-slots, or rungs past the ladder.
    pub fn component(&self, k: usize, us: &[usize], vs: &[usize]) -> PolyForm<S> {
        if k > self.q {
            panic!("rung exceeds q");
        }
        let zero = PolyForm::zero(self.n_m, self.q - k, self.dim_c, self.degree_cap);
        if k > self.p.min(self.q) || us.len() != self.p - k || vs.len() != k {
            return zero;
        }
        let (ukey, sign) = match sort_signed(us) {
            Some(ks) => ks,
            None => return zero,
        };
        let mut vkey = vs.to_vec();
        vkey.sort_unstable();
        match self.comps.get(&(k, ukey, vkey)) {
            None => zero,
            Some(form) => form.scale(&S::from_int(sign)),
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(usize, Vec<usize>, Vec<usize>), &PolyForm<S>)> {
        self.comps.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.comps.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.values().map(|f| f.max_abs()).fold(0.0, f64::max)
    }

    fn same_shape(&self, rhs: &Self) -> Result<(), Error> {
        if self.p != rhs.p
            || self.q != rhs.q
            || self.n != rhs.n
            || self.n_m != rhs.n_m
            || self.dim_c != rhs.dim_c
        {
            return Err(Error::Dim("element shape mismatch".into()));
        }
        Ok(())
    }

    pub fn add(&self, rhs: &Self) -> Result<Self, Error> {
        self.same_shape(rhs)?;
        let mut out = self.clone();
        out.degree_cap = self.degree_cap.max(rhs.degree_cap);
        for ((k, us, vs), form) in rhs.terms() {
            out.add_component(*k, us, vs, form.clone())?;
        }
        Ok(out)
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self, Error> {
        self.add(&rhs.neg())
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for form in out.comps.values_mut() {
            *form = form.neg();
        }
        out
    }

    pub fn scale(&self, s: &S) -> Self {
        let mut out = WeilElement::zero(self.n, self.n_m, self.dim_c, self.p, self.q, self.degree_cap);
        if s.is_zero() {
            return out;
        }
        for (key, form) in self.comps.iter() {
            out.comps.insert(key.clone(), form.scale(s));
        }
        out
    }

    /// Derived evaluation of the `k`-th rung on a function-multiplied
    /// first section `f·e_a` followed by constant basis sections:
    /// `f c_k(e_a, rest | vs) + df ∧ c_{k+1}(rest | a, vs)`.
    pub fn eval_first_scaled(
        &self,
        k: usize,
        f: &PolyForm<S>,
        a: usize,
        rest: &[usize],
        vs: &[usize],
    ) -> Result<PolyForm<S>, Error> {
        if f.r != 0 || f.value_dim != 1 || f.n_m != self.n_m {
            return Err(Error::Dim("scaling factor must be a scalar polynomial".into()));
        }
        if k > self.p.min(self.q) || rest.len() + 1 != self.p - k || vs.len() != k {
            return Err(Error::Dim("slot counts do not match the rung".into()));
        }
        let mut us = vec![a];
        us.extend_from_slice(rest);
        let mut out = f.wedge(&self.component(k, &us, vs))?;
        if k + 1 <= self.q {
            let mut vplus = vec![a];
            vplus.extend_from_slice(vs);
            let anomaly = f
                .exterior_derivative()
                .wedge(&self.component(k + 1, rest, &vplus))?;
            out = out.add(&anomaly)?;
        }
        Ok(out)
    }
}

/// Action of the basis direction `e_i` (0-based `i`) on the value of one
/// ladder rung at fixed slots: Lie derivative along the anchor field,
/// coefficient action, and bracket substitution into each v-slot.
fn act_on_component<S: Scalar>(
    base: &LinearActionBase<S>,
    i: usize,
    k: usize,
    c: &WeilElement<S>,
    us: &[usize],
    vs: &[usize],
) -> Result<PolyForm<S>, Error> {
    let inner = c.component(k, us, vs);
    let mut out = inner.lie_linear(&base.anchor[i])?;
    out = out.add(&inner.apply_matrix(&base.rho[i])?)?;
    for (t, &vt) in vs.iter().enumerate() {
        for m in 0..base.algebra.n {
            let coef = base.algebra.structure_constant(i, vt - 1, m);
            if coef.is_zero() {
                continue;
            }
            let mut swapped = vs.to_vec();
            swapped[t] = m + 1;
            out = out.sub(&c.component(k, us, &swapped).scale(&S::from_rat(coef)))?;
        }
    }
    Ok(out)
}

/// Action of a basis direction on a whole element, rung by rung. With
/// empty u-tuples (`p = k`) this is the coefficient module action whose
/// representation property is covered by tests.
pub fn module_action<S: Scalar>(
    base: &LinearActionBase<S>,
    i: usize,
    x: &WeilElement<S>,
) -> Result<WeilElement<S>, Error> {
    if i >= base.algebra.n || x.n != base.algebra.n || x.n_m != base.n_m || x.dim_c != base.dim_c {
        return Err(Error::Dim("direction or element does not match the base".into()));
    }
    let mut out = WeilElement::zero(x.n, x.n_m, x.dim_c, x.p, x.q, x.degree_cap);
    for ((k, us, vs), _) in x.terms() {
        out.add_component(*k, us, vs, act_on_component(base, i, *k, x, us, vs)?)?;
    }
    Ok(out)
}

/// Differential of the bigraded complex. The `k`-th rung of the output
/// combines, with an overall sign `(−1)^k`, the coefficient differential
/// of the `k`-th input rung (section action plus bracket insertions) and
/// minus the anchor contraction of the `(k−1)`-th rung through each
/// v-slot. The square vanishes identically; for a point base only the
/// top rung survives and the differential reduces to `(−1)^q` times the
/// coefficient differential with values in `S^q g* ⊗ C`.
pub fn weil_differential<S: Scalar>(
    c: &WeilElement<S>,
    base: &LinearActionBase<S>,
) -> Result<WeilElement<S>, Error> {
    if c.n != base.algebra.n || c.n_m != base.n_m || c.dim_c != base.dim_c {
        return Err(Error::Dim("element does not match the base".into()));
    }
    let (p, q, n) = (c.p, c.q, c.n);
    let mut out = WeilElement::zero(n, c.n_m, c.dim_c, p + 1, q, c.degree_cap);
    for k in 0..=(p + 1).min(q) {
        for us in alt_tuples(n, p + 1 - k) {
            for vs in sym_tuples(n, k) {
                let mut acc = PolyForm::zero(c.n_m, q - k, c.dim_c, c.degree_cap);
                if k <= p.min(q) {
                    // section-action part of the coefficient differential
                    for a in 0..us.len() {
                        let sign = if a % 2 == 0 { 1 } else { -1 };
                        let sub: Vec<usize> = us
                            .iter()
                            .enumerate()
                            .filter(|(pos, _)| *pos != a)
                            .map(|(_, &i)| i)
                            .collect();
                        let acted = act_on_component(base, us[a] - 1, k, c, &sub, &vs)?;
                        acc = acc.add(&acted.scale(&S::from_int(sign)))?;
                    }
                    // bracket insertions into the first u-slot
                    for a in 0..us.len() {
                        for b in a + 1..us.len() {
                            let sign = if (a + b) % 2 == 0 { 1 } else { -1 };
                            let rest: Vec<usize> = us
                                .iter()
                                .enumerate()
                                .filter(|(pos, _)| *pos != a && *pos != b)
                                .map(|(_, &i)| i)
                                .collect();
                            for m in 0..n {
                                let coef =
                                    base.algebra.structure_constant(us[a] - 1, us[b] - 1, m);
                                if coef.is_zero() {
                                    continue;
                                }
                                let mut slot_key = vec![m + 1];
                                slot_key.extend_from_slice(&rest);
                                let inner = c.component(k, &slot_key, &vs);
                                if inner.is_zero() {
                                    continue;
                                }
                                let s = S::from_int(sign) * S::from_rat(coef);
                                acc = acc.add(&inner.scale(&s))?;
                            }
                        }
                    }
                }
                // anchor contraction of the previous rung
                if k >= 1 && k - 1 <= p.min(q) {
                    for t in 0..k {
                        let rest_v: Vec<usize> = vs
                            .iter()
                            .enumerate()
                            .filter(|(pos, _)| *pos != t)
                            .map(|(_, &i)| i)
                            .collect();
                        let inner = c.component(k - 1, &us, &rest_v);
                        if inner.is_zero() {
                            continue;
                        }
                        acc = acc.sub(&inner.contract_linear(&base.anchor[vs[t] - 1])?)?;
                    }
                }
                if k % 2 == 1 {
                    acc = acc.neg();
                }
                if !acc.is_zero() {
                    out.add_component(k, &us, &vs, acc)?;
                }
            }
        }
    }
    Ok(out)
}

/// Right module action of a constant form on the algebra:
/// `(c ∧ β)_k(w | ·) = Σ_σ sgn(σ) c_k(w_{σ first} | ·) β(w_{σ second})`
/// over the `(p − k, p')`-unshuffles.
pub fn weil_wedge<S: Scalar>(
    c: &WeilElement<S>,
    beta: &AltSymTensor<S>,
) -> Result<WeilElement<S>, Error> {
    if beta.k != 0 || beta.value_dim != 1 || beta.alt_dim != c.n {
        return Err(Error::Dim(
            "module factor must be a scalar form on the algebra".into(),
        ));
    }
    let (p, q, n, pp) = (c.p, c.q, c.n, beta.p);
    let mut out = WeilElement::zero(n, c.n_m, c.dim_c, p + pp, q, c.degree_cap);
    for k in 0..=p.min(q) {
        for w in alt_tuples(n, p + pp - k) {
            for vs in sym_tuples(n, k) {
                let mut acc = PolyForm::zero(c.n_m, q - k, c.dim_c, c.degree_cap);
                for sp in unshuffles(p - k, pp) {
                    let first: Vec<usize> =
                        sp.sigma[..p - k].iter().map(|&i| w[i - 1]).collect();
                    let second: Vec<usize> =
                        sp.sigma[p - k..].iter().map(|&i| w[i - 1]).collect();
                    let bval = beta.coeff(&second, &[]).remove(0);
                    if bval.is_zero() {
                        continue;
                    }
                    let ck = c.component(k, &first, &vs);
                    if ck.is_zero() {
                        continue;
                    }
                    acc = acc.add(&ck.scale(&(S::from_int(sp.sign as i64) * bval)))?;
                }
                if !acc.is_zero() {
                    out.add_component(k, &w, &vs, acc)?;
                }
            }
        }
    }
    Ok(out)
}

/// Residual report for the `p = 1` closedness question: the per-rung
/// sizes of the differential of a `(1, q)` element. A zero report is
/// exactly the Spencer-operator condition on the pair `(c_0, c_1)`.
#[derive(Clone, Debug)]
pub struct SpencerReport<S: Scalar> {
    /// The full differential, for inspection.
    pub differential: WeilElement<S>,
    /// Max magnitude per output rung `k = 0, 1, …`.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
}

/// Computes the differential of a `(1, q)` element and summarizes each
/// output rung.
pub fn spencer_check<S: Scalar>(
    c: &WeilElement<S>,
    base: &LinearActionBase<S>,
) -> Result<SpencerReport<S>, Error> {
    if c.p != 1 {
        return Err(Error::Dim("expected an element with one algebra slot".into()));
    }
    let d = weil_differential(c, base)?;
    let rungs = 2.min(c.q) + 1;
    let mut residuals = vec![0.0f64; rungs];
    for ((k, _, _), form) in d.terms() {
        residuals[*k] = residuals[*k].max(form.max_abs());
    }
    let max_residual = residuals.iter().cloned().fold(0.0, f64::max);
    Ok(SpencerReport {
        differential: d,
        residuals,
        max_residual,
    })
}
