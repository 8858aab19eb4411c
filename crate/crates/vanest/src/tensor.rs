//! Sparse alternating/symmetric tensors with values in a coefficient space.
//!
//! An [`AltSymTensor`] stores a multilinear map that is alternating in its
//! first `p` slots and symmetric in the next `k` slots.  Coefficients are kept
//! only at canonical keys: a strictly increasing tuple for the alternating
//! part and a weakly increasing tuple for the symmetric part.  Non-canonical
//! access resolves through the permutation sign.
//!
//! The two slot families may range over spaces of different dimensions
//! (`alt_dim` and `sym_dim`); the common case `alt_dim == sym_dim` recovers a
//! tensor over a single vector space.

use std::collections::BTreeMap;

use crate::error::Error;
use crate::perm::{sort_alternating, unshuffles};
use crate::scalar::Scalar;

/// Canonical key: (strictly increasing alt tuple, weakly increasing sym tuple),
/// indices 1-based.
pub type TensorKey = (Vec<usize>, Vec<usize>);

/// All strictly increasing `p`-tuples with entries in `1..=n`, in
/// lexicographic order.
pub fn alt_tuples(n: usize, p: usize) -> Vec<Vec<usize>> {
    if p > n {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (1..=p).collect();
    loop {
        out.push(cur.clone());
        // advance to the next combination
        let mut i = p;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < n - (p - 1 - i) {
                cur[i] += 1;
                for j in i + 1..p {
                    cur[j] = cur[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// All weakly increasing `k`-tuples with entries in `1..=n`, in lexicographic
/// order.
pub fn sym_tuples(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    if n == 0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut cur = vec![1usize; k];
    loop {
        out.push(cur.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < n {
                cur[i] += 1;
                for j in i + 1..k {
                    cur[j] = cur[i];
                }
                break;
            }
        }
    }
}

/// Determinant of a small square matrix of scalars, by minor expansion.
pub fn det_s<S: Scalar>(m: &[Vec<S>]) -> S {
    let n = m.len();
    if n == 0 {
        return S::one();
    }
    if n == 1 {
        return m[0][0].clone();
    }
    let mut acc = S::zero();
    for j in 0..n {
        if m[0][j].is_zero() {
            continue;
        }
        let minor: Vec<Vec<S>> = m[1..]
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(c, _)| *c != j)
                    .map(|(_, v)| v.clone())
                    .collect()
            })
            .collect();
        let term = m[0][j].clone() * det_s(&minor);
        if j % 2 == 0 {
            acc += term;
        } else {
            acc += -term;
        }
    }
    acc
}

/// Permanent of a small square matrix of scalars, by minor expansion.
pub fn perm_s<S: Scalar>(m: &[Vec<S>]) -> S {
    let n = m.len();
    if n == 0 {
        return S::one();
    }
    if n == 1 {
        return m[0][0].clone();
    }
    let mut acc = S::zero();
    for j in 0..n {
        if m[0][j].is_zero() {
            continue;
        }
        let minor: Vec<Vec<S>> = m[1..]
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(c, _)| *c != j)
                    .map(|(_, v)| v.clone())
                    .collect()
            })
            .collect();
        acc += m[0][j].clone() * perm_s(&minor);
    }
    acc
}

/// Element of Λ^p V* ⊗ S^k U* ⊗ W with dim V = `alt_dim`, dim U = `sym_dim`,
/// dim W = `value_dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct AltSymTensor<S: Scalar> {
    /// Alternating degree.
    pub p: usize,
    /// Symmetric degree.
    pub k: usize,
    /// Dimension of the space fed to the alternating slots.
    pub alt_dim: usize,
    /// Dimension of the space fed to the symmetric slots.
    pub sym_dim: usize,
    /// Dimension of the coefficient space.
    pub value_dim: usize,
    coeffs: BTreeMap<TensorKey, Vec<S>>,
}

impl<S: Scalar> AltSymTensor<S> {
    /// The zero tensor of the given shape.
    pub fn zero(p: usize, k: usize, alt_dim: usize, sym_dim: usize, value_dim: usize) -> Self {
        AltSymTensor {
            p,
            k,
            alt_dim,
            sym_dim,
            value_dim,
            coeffs: BTreeMap::new(),
        }
    }

    /// Pure alternating tensor over a single space (k = 0, scalar values).
    pub fn alternating(p: usize, n: usize) -> Self {
        Self::zero(p, 0, n, n, 1)
    }

    fn check_key(&self, alt: &[usize], sym: &[usize]) -> Result<(), Error> {
        if alt.len() != self.p || sym.len() != self.k {
            return Err(Error::Dim(format!(
                "key arity ({},{}) does not match tensor degree ({},{})",
                alt.len(),
                sym.len(),
                self.p,
                self.k
            )));
        }
        if alt.iter().any(|&i| i == 0 || i > self.alt_dim) {
            return Err(Error::Dim(format!("alt index out of 1..={}", self.alt_dim)));
        }
        if sym.iter().any(|&j| j == 0 || j > self.sym_dim) {
            return Err(Error::Dim(format!("sym index out of 1..={}", self.sym_dim)));
        }
        Ok(())
    }

    /// Adds `value · (e^alt ⊗ s^sym)` to the tensor, canonicalizing the key.
    /// A repeated alternating index contributes nothing.
    pub fn add_term(&mut self, alt: &[usize], sym: &[usize], value: &[S]) -> Result<(), Error> {
        self.check_key(alt, sym)?;
        if value.len() != self.value_dim {
            return Err(Error::Dim(format!(
                "value length {} != value_dim {}",
                value.len(),
                self.value_dim
            )));
        }
        let (sorted_alt, sign) = match sort_alternating(alt) {
            Some(x) => x,
            None => return Ok(()),
        };
        let mut sorted_sym = sym.to_vec();
        sorted_sym.sort_unstable();
        let key = (sorted_alt, sorted_sym);
        let entry = self
            .coeffs
            .entry(key.clone())
            .or_insert_with(|| vec![S::zero(); self.value_dim]);
        for (slot, v) in entry.iter_mut().zip(value) {
            if sign > 0 {
                *slot += v.clone();
            } else {
                *slot += -v.clone();
            }
        }
        if entry.iter().all(|v| v.is_zero()) {
            self.coeffs.remove(&key);
        }
        Ok(())
    }

    /// Scalar-valued convenience form of [`AltSymTensor::add_term`].
    pub fn add_scalar_term(&mut self, alt: &[usize], sym: &[usize], value: S) -> Result<(), Error> {
        self.add_term(alt, sym, &[value])
    }

    /// Coefficient at a (possibly non-canonical) key; the alternating sign is
    /// resolved on access.
    pub fn coeff(&self, alt: &[usize], sym: &[usize]) -> Vec<S> {
        let zero = vec![S::zero(); self.value_dim];
        let (sorted_alt, sign) = match sort_alternating(alt) {
            Some(x) => x,
            None => return zero,
        };
        let mut sorted_sym = sym.to_vec();
        sorted_sym.sort_unstable();
        match self.coeffs.get(&(sorted_alt, sorted_sym)) {
            Some(v) if sign > 0 => v.clone(),
            Some(v) => v.iter().map(|x| -x.clone()).collect(),
            None => zero,
        }
    }

    /// Iterator over stored canonical keys and their coefficients.
    pub fn terms(&self) -> impl Iterator<Item = (&TensorKey, &Vec<S>)> {
        self.coeffs.iter()
    }

    /// True when no nonzero coefficient is stored.
    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Largest coefficient magnitude, for float-valued tolerance checks.
    pub fn max_abs(&self) -> f64 {
        self.coeffs
            .values()
            .flat_map(|v| v.iter().map(|x| x.approx_f64().abs()))
            .fold(0.0, f64::max)
    }

    fn check_shape(&self, rhs: &Self) -> Result<(), Error> {
        if self.p != rhs.p
            || self.k != rhs.k
            || self.alt_dim != rhs.alt_dim
            || self.sym_dim != rhs.sym_dim
            || self.value_dim != rhs.value_dim
        {
            return Err(Error::Dim("tensor shape mismatch".into()));
        }
        Ok(())
    }

    /// Sum of two tensors of identical shape.
    pub fn add(&self, rhs: &Self) -> Result<Self, Error> {
        self.check_shape(rhs)?;
        let mut out = self.clone();
        for ((alt, sym), v) in rhs.coeffs.iter() {
            out.add_term(alt, sym, v)?;
        }
        Ok(out)
    }

    /// Difference of two tensors of identical shape.
    pub fn sub(&self, rhs: &Self) -> Result<Self, Error> {
        self.add(&rhs.neg())
    }

    /// Negation.
    pub fn neg(&self) -> Self {
        self.map_values(|v| -v.clone())
    }

    /// Multiplies every coefficient by `s`.
    pub fn scale(&self, s: &S) -> Self {
        self.map_values(|v| v.clone() * s.clone())
    }

    fn map_values(&self, f: impl Fn(&S) -> S) -> Self {
        let mut out = Self::zero(self.p, self.k, self.alt_dim, self.sym_dim, self.value_dim);
        for (key, v) in self.coeffs.iter() {
            let mapped: Vec<S> = v.iter().map(&f).collect();
            if mapped.iter().any(|x| !x.is_zero()) {
                out.coeffs.insert(key.clone(), mapped);
            }
        }
        out
    }

    /// Evaluates the multilinear map on `p` alternating-slot vectors and `k`
    /// symmetric-slot vectors.  The result lies in the coefficient space.
    ///
    /// On basis tuples this returns the stored coefficient; on a repeated sym
    /// tuple `(j,…,j)` the basis tensor `s^{(j,…,j)}` evaluates to the plain
    /// monomial, so polynomial coefficients read off without multinomial
    /// factors.
    pub fn eval(&self, alt_args: &[Vec<S>], sym_args: &[Vec<S>]) -> Result<Vec<S>, Error> {
        if alt_args.len() != self.p || sym_args.len() != self.k {
            return Err(Error::Dim("argument count mismatch".into()));
        }
        for u in alt_args {
            if u.len() != self.alt_dim {
                return Err(Error::Dim("alt argument dimension mismatch".into()));
            }
        }
        for c in sym_args {
            if c.len() != self.sym_dim {
                return Err(Error::Dim("sym argument dimension mismatch".into()));
            }
        }
        let mut fact = 1u64;
        for i in 1..=self.k as u64 {
            fact *= i;
        }
        let inv_fact = S::from_ratio(1, fact as i64);
        let mut out = vec![S::zero(); self.value_dim];
        for ((alt, sym), w) in self.coeffs.iter() {
            let dm: Vec<Vec<S>> = alt_args
                .iter()
                .map(|u| alt.iter().map(|&i| u[i - 1].clone()).collect())
                .collect();
            let d = det_s(&dm);
            if d.is_zero() {
                continue;
            }
            let pm: Vec<Vec<S>> = sym_args
                .iter()
                .map(|c| sym.iter().map(|&j| c[j - 1].clone()).collect())
                .collect();
            let pfac = perm_s(&pm) * inv_fact.clone();
            if pfac.is_zero() {
                continue;
            }
            let factor = d * pfac;
            for (slot, v) in out.iter_mut().zip(w) {
                *slot += factor.clone() * v.clone();
            }
        }
        Ok(out)
    }

    /// Canonical basis keys for the shape, alt-major then sym.
    pub fn basis_keys(&self) -> Vec<TensorKey> {
        let mut out = Vec::new();
        for alt in alt_tuples(self.alt_dim, self.p) {
            for sym in sym_tuples(self.sym_dim, self.k) {
                out.push((alt.clone(), sym));
            }
        }
        out
    }

    /// Flattens the coefficients into a vector following [`Self::basis_keys`]
    /// order, `value_dim` entries per key.
    pub fn flatten(&self) -> Vec<S> {
        let mut out = Vec::new();
        for (alt, sym) in self.basis_keys() {
            out.extend(self.coeff(&alt, &sym));
        }
        out
    }

    /// Rebuilds a tensor from a flat coefficient vector in
    /// [`Self::basis_keys`] order.
    pub fn from_flat(
        p: usize,
        k: usize,
        alt_dim: usize,
        sym_dim: usize,
        value_dim: usize,
        data: &[S],
    ) -> Result<Self, Error> {
        let mut out = Self::zero(p, k, alt_dim, sym_dim, value_dim);
        let keys = out.basis_keys();
        if data.len() != keys.len() * value_dim {
            return Err(Error::Dim("flat data length mismatch".into()));
        }
        for (idx, (alt, sym)) in keys.iter().enumerate() {
            let chunk = &data[idx * value_dim..(idx + 1) * value_dim];
            out.add_term(alt, sym, chunk)?;
        }
        Ok(out)
    }
}

/// Exterior product.  The symmetric slots and coefficient space of `a` are
/// carried along; `b` must be purely alternating and one side must have
/// scalar values.
///
/// The convention is the determinant one, without `1/p!p'!` factors:
/// `(a∧b)(u_1,…,u_{p+p'}) = Σ_σ sgn(σ) a(u_{σ(1)},…) b(u_{σ(p+1)},…)` over
/// `(p,p')`-unshuffles σ.
pub fn wedge<S: Scalar>(a: &AltSymTensor<S>, b: &AltSymTensor<S>) -> Result<AltSymTensor<S>, Error> {
    if a.alt_dim != b.alt_dim {
        return Err(Error::Dim(format!(
            "wedge over different spaces: {} vs {}",
            a.alt_dim, b.alt_dim
        )));
    }
    if b.k != 0 {
        return Err(Error::Dim("right wedge factor must have sym degree 0".into()));
    }
    if a.value_dim != 1 && b.value_dim != 1 {
        return Err(Error::Dim("one wedge factor must be scalar-valued".into()));
    }
    let value_dim = a.value_dim.max(b.value_dim);
    let mut out = AltSymTensor::zero(a.p + b.p, a.k, a.alt_dim, a.sym_dim.max(b.sym_dim), value_dim);
    for ((ia, sym), wa) in a.coeffs.iter() {
        for ((ib, _), wb) in b.coeffs.iter() {
            let mut merged = ia.clone();
            merged.extend_from_slice(ib);
            let value: Vec<S> = if a.value_dim == 1 {
                wb.iter().map(|x| wa[0].clone() * x.clone()).collect()
            } else {
                wa.iter().map(|x| x.clone() * wb[0].clone()).collect()
            };
            out.add_term(&merged, sym, &value)?;
        }
    }
    Ok(out)
}

/// Evaluates `a∧b` through the unshuffle sum directly, as an independent
/// cross-check of the key-merge implementation.
pub fn wedge_eval_unshuffled<S: Scalar>(
    a: &AltSymTensor<S>,
    b: &AltSymTensor<S>,
    args: &[Vec<S>],
) -> Result<Vec<S>, Error> {
    if args.len() != a.p + b.p {
        return Err(Error::Dim("argument count mismatch".into()));
    }
    let value_dim = a.value_dim.max(b.value_dim);
    let mut out = vec![S::zero(); value_dim];
    for sp in unshuffles(a.p, b.p) {
        let left: Vec<Vec<S>> = (0..a.p).map(|i| args[sp.sigma[i] - 1].clone()).collect();
        let right: Vec<Vec<S>> = (0..b.p)
            .map(|i| args[sp.sigma[a.p + i] - 1].clone())
            .collect();
        let va = a.eval(&left, &[])?;
        let vb = b.eval(&right, &[])?;
        let term: Vec<S> = if a.value_dim == 1 {
            vb.iter().map(|x| va[0].clone() * x.clone()).collect()
        } else {
            va.iter().map(|x| x.clone() * vb[0].clone()).collect()
        };
        for (slot, t) in out.iter_mut().zip(term) {
            if sp.sign > 0 {
                *slot += t;
            } else {
                *slot += -t;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rat;
    use proptest::prelude::*;

    fn rat(n: i64, d: i64) -> Rat {
        Rat::from_ratio(n, d)
    }

    fn basis_vec(n: usize, i: usize) -> Vec<Rat> {
        let mut v = vec![Rat::zero(); n];
        v[i - 1] = Rat::one();
        v
    }

    #[test]
    fn tuple_enumeration_counts() {
        assert_eq!(alt_tuples(4, 2).len(), 6);
        assert_eq!(alt_tuples(3, 3), vec![vec![1, 2, 3]]);
        assert_eq!(alt_tuples(3, 0), vec![Vec::<usize>::new()]);
        assert_eq!(sym_tuples(2, 3).len(), 4);
        assert_eq!(sym_tuples(3, 2).len(), 6);
    }

    #[test]
    fn basis_wedge_in_three_dims() {
        let mut e1 = AltSymTensor::<Rat>::alternating(1, 3);
        e1.add_scalar_term(&[1], &[], Rat::one()).unwrap();
        let mut e2 = AltSymTensor::<Rat>::alternating(1, 3);
        e2.add_scalar_term(&[2], &[], Rat::one()).unwrap();
        let w = wedge(&e1, &e2).unwrap();
        assert_eq!(w.coeff(&[1, 2], &[]), vec![Rat::one()]);
        assert_eq!(w.coeff(&[2, 1], &[]), vec![-Rat::one()]);
        assert_eq!(w.coeff(&[1, 3], &[]), vec![Rat::zero()]);
    }

    #[test]
    fn odd_square_vanishes() {
        let mut a = AltSymTensor::<Rat>::alternating(1, 4);
        a.add_scalar_term(&[1], &[], rat(2, 3)).unwrap();
        a.add_scalar_term(&[3], &[], rat(-1, 2)).unwrap();
        a.add_scalar_term(&[4], &[], rat(5, 1)).unwrap();
        assert!(wedge(&a, &a).unwrap().is_zero());
    }

    #[test]
    fn wedge_matches_two_slot_antisymmetrization() {
        let mut a = AltSymTensor::<Rat>::alternating(1, 4);
        let mut b = AltSymTensor::<Rat>::alternating(1, 4);
        for i in 1..=4 {
            a.add_scalar_term(&[i], &[], rat(i as i64, 3)).unwrap();
            b.add_scalar_term(&[i], &[], rat(7 - i as i64, 2)).unwrap();
        }
        let w = wedge(&a, &b).unwrap();
        let u = vec![rat(1, 1), rat(2, 1), rat(-1, 3), rat(0, 1)];
        let v = vec![rat(3, 2), rat(-1, 1), rat(4, 1), rat(1, 5)];
        let lhs = w.eval(&[u.clone(), v.clone()], &[]).unwrap();
        let au = a.eval(&[u.clone()], &[]).unwrap()[0].clone();
        let av = a.eval(&[v.clone()], &[]).unwrap()[0].clone();
        let bu = b.eval(&[u], &[]).unwrap()[0].clone();
        let bv = b.eval(&[v], &[]).unwrap()[0].clone();
        assert_eq!(lhs[0], au * bv - av * bu);
    }

    #[test]
    fn eval_on_basis_tuples_recovers_coefficients() {
        let mut t = AltSymTensor::<Rat>::zero(2, 2, 3, 2, 1);
        t.add_scalar_term(&[1, 3], &[1, 2], rat(5, 7)).unwrap();
        t.add_scalar_term(&[2, 1], &[2, 2], rat(-3, 4)).unwrap();
        for alt in alt_tuples(3, 2) {
            for sym in sym_tuples(2, 2) {
                let alt_args: Vec<Vec<Rat>> = alt.iter().map(|&i| basis_vec(3, i)).collect();
                let sym_args: Vec<Vec<Rat>> = sym.iter().map(|&j| basis_vec(2, j)).collect();
                let got = t.eval(&alt_args, &sym_args).unwrap()[0].clone();
                let expect = t.coeff(&alt, &sym)[0].clone();
                // a basis sym tuple with multiplicities m_j evaluates its own
                // key to ∏ m_j!/k!: 1 on the diagonal, 1/2 for distinct pairs
                if sym[0] != sym[1] {
                    assert_eq!(got, expect.clone() * rat(1, 2));
                } else {
                    assert_eq!(got, expect);
                }
            }
        }
    }

    #[test]
    fn diagonal_sym_evaluation_is_the_monomial() {
        // tensor s^{(1,1)} over dim-2 sym space: value on (c,c) must be c_1^2
        let mut t = AltSymTensor::<Rat>::zero(0, 2, 1, 2, 1);
        t.add_scalar_term(&[], &[1, 1], Rat::one()).unwrap();
        let c = vec![rat(3, 1), rat(5, 1)];
        let got = t.eval(&[], &[c.clone(), c]).unwrap()[0].clone();
        assert_eq!(got, rat(9, 1));
        // and s^{(1,2)} on the diagonal is the mixed monomial c_1 c_2
        let mut m = AltSymTensor::<Rat>::zero(0, 2, 1, 2, 1);
        m.add_scalar_term(&[], &[1, 2], Rat::one()).unwrap();
        let c = vec![rat(3, 1), rat(5, 1)];
        let got = m.eval(&[], &[c.clone(), c]).unwrap()[0].clone();
        assert_eq!(got, rat(15, 1));
    }

    #[test]
    fn slot_swaps_alternate_and_symmetrize() {
        let mut t = AltSymTensor::<Rat>::zero(2, 2, 3, 3, 2);
        t.add_term(&[1, 2], &[1, 3], &[rat(1, 2), rat(3, 1)]).unwrap();
        t.add_term(&[2, 3], &[2, 2], &[rat(-2, 5), rat(1, 7)]).unwrap();
        let u = vec![rat(1, 1), rat(-1, 2), rat(2, 3)];
        let v = vec![rat(0, 1), rat(4, 1), rat(-1, 5)];
        let c = vec![rat(2, 1), rat(1, 3), rat(-1, 1)];
        let d = vec![rat(-1, 2), rat(1, 1), rat(3, 4)];
        let base = t.eval(&[u.clone(), v.clone()], &[c.clone(), d.clone()]).unwrap();
        let alt_swap = t.eval(&[v.clone(), u.clone()], &[c.clone(), d.clone()]).unwrap();
        let sym_swap = t.eval(&[u, v], &[d, c]).unwrap();
        for i in 0..2 {
            assert_eq!(alt_swap[i], -base[i].clone());
            assert_eq!(sym_swap[i], base[i].clone());
        }
    }

    #[test]
    fn dense_oracle_matches_sparse_evaluation() {
        // brute-force multilinear expansion through all basis tuples, n = 3
        let mut t = AltSymTensor::<Rat>::zero(2, 1, 3, 3, 1);
        t.add_scalar_term(&[1, 2], &[3], rat(2, 3)).unwrap();
        t.add_scalar_term(&[1, 3], &[1], rat(-1, 4)).unwrap();
        t.add_scalar_term(&[2, 3], &[2], rat(7, 5)).unwrap();
        let u = vec![rat(1, 2), rat(3, 1), rat(-2, 1)];
        let v = vec![rat(5, 1), rat(-1, 3), rat(1, 1)];
        let c = vec![rat(2, 7), rat(1, 1), rat(4, 3)];
        let mut dense = Rat::zero();
        for i in 1..=3usize {
            for j in 1..=3usize {
                for l in 1..=3usize {
                    let coeff = t
                        .eval(&[basis_vec(3, i), basis_vec(3, j)], &[basis_vec(3, l)])
                        .unwrap()[0]
                        .clone();
                    dense += coeff
                        * u[i - 1].clone()
                        * v[j - 1].clone()
                        * c[l - 1].clone();
                }
            }
        }
        let sparse = t.eval(&[u, v], &[c]).unwrap()[0].clone();
        assert_eq!(dense, sparse);
    }

    #[test]
    fn unshuffled_evaluation_agrees_with_key_merge() {
        let mut a = AltSymTensor::<Rat>::alternating(2, 4);
        a.add_scalar_term(&[1, 3], &[], rat(1, 2)).unwrap();
        a.add_scalar_term(&[2, 4], &[], rat(-3, 1)).unwrap();
        let mut b = AltSymTensor::<Rat>::alternating(1, 4);
        b.add_scalar_term(&[2], &[], rat(5, 3)).unwrap();
        b.add_scalar_term(&[1], &[], rat(1, 1)).unwrap();
        let w = wedge(&a, &b).unwrap();
        let args = vec![
            vec![rat(1, 1), rat(0, 1), rat(2, 1), rat(-1, 1)],
            vec![rat(0, 1), rat(1, 3), rat(1, 1), rat(2, 1)],
            vec![rat(-2, 1), rat(1, 1), rat(0, 1), rat(1, 2)],
        ];
        let via_merge = w.eval(&args, &[]).unwrap();
        let via_unshuffle = wedge_eval_unshuffled(&a, &b, &args).unwrap();
        assert_eq!(via_merge, via_unshuffle);
    }

    #[test]
    fn flatten_round_trip() {
        let mut t = AltSymTensor::<Rat>::zero(1, 2, 3, 2, 2);
        t.add_term(&[2], &[1, 2], &[rat(1, 3), rat(-2, 1)]).unwrap();
        t.add_term(&[3], &[2, 2], &[rat(0, 1), rat(4, 7)]).unwrap();
        let flat = t.flatten();
        let back = AltSymTensor::from_flat(1, 2, 3, 2, 2, &flat).unwrap();
        assert_eq!(t, back);
    }

    fn small_rat() -> impl Strategy<Value = Rat> {
        (-6i64..7, 1i64..5).prop_map(|(n, d)| Rat::from_ratio(n, d))
    }

    fn random_alt(p: usize, n: usize) -> impl Strategy<Value = AltSymTensor<Rat>> {
        let keys = alt_tuples(n, p);
        let len = keys.len();
        proptest::collection::vec(small_rat(), len).prop_map(move |cs| {
            let mut t = AltSymTensor::alternating(p, n);
            for (key, c) in keys.iter().zip(cs) {
                t.add_scalar_term(key, &[], c).unwrap();
            }
            t
        })
    }

    proptest! {
        #[test]
        fn wedge_graded_anticommutativity(
            a in random_alt(1, 4),
            b in random_alt(2, 4),
        ) {
            // p = 1, p' = 2: a∧b = (−1)^{pp'} b∧a = b∧a
            let ab = wedge(&a, &b).unwrap();
            let ba = wedge(&b, &a).unwrap();
            prop_assert_eq!(ab, ba);
        }

        #[test]
        fn wedge_odd_odd_anticommutes(
            a in random_alt(1, 4),
            b in random_alt(1, 4),
        ) {
            let ab = wedge(&a, &b).unwrap();
            let ba = wedge(&b, &a).unwrap();
            prop_assert_eq!(ab, ba.neg());
        }

        #[test]
        fn wedge_is_bilinear(
            a in random_alt(1, 3),
            b in random_alt(1, 3),
            c in random_alt(2, 3),
            s in small_rat(),
        ) {
            let lhs = wedge(&a.scale(&s).add(&b).unwrap(), &c).unwrap();
            let rhs = wedge(&a, &c).unwrap().scale(&s).add(&wedge(&b, &c).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }
    }
}
