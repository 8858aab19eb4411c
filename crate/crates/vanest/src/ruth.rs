//! Two-term representations up to homotopy.
//!
//! The groupoid-side data is a pair of quasi-actions on coefficient spaces
//! `E` and `C`, a linear map `∂: C → E`, and a curvature-like correction
//! `Ω` assigned to composable pairs. Out of this the dual bundle
//! `𝒱 = s*E* ⊕ t*C*` becomes a groupoid over `C*`, and normalized cochains
//! on its nerve correspond to pairs of `E`- and `C`-valued group cochains
//! through the pairing map [`psi`].
//!
//! The algebra-side mirror replaces the quasi-actions by connection
//! matrices and `Ω` by a `Hom(E, C)`-valued curvature 2-form. Cochains
//! here are pairs of forms ([`OmegaElement`], with `C` sitting in degree
//! −1), and the differential [`ruth_differential_alg`] is pinned to the
//! evaluation model on the dual fibration: homogeneity-one functions of
//! the fiber, with the Koszul differential of the extended space `g ⊕ E*`
//! ([`ruth_model_differential`]). Differentiating a group model at the
//! unit ([`differentiate_model`]) lands in algebra-side data that must
//! pass the exact `D² = 0` check.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::group::{
    catalog_group, simplicial_delta, torus_weights_action, Cochain, MatrixGroup, QuasiAction,
    ValueSpace,
};
use crate::jet::{Jet, JetCtx, JetMatrix};
use crate::lie::{GradedCochain, GradedMix, LieAlgebra, Representation};
use crate::linalg::QMatrix;
use crate::scalar::{Rat, Scalar};
use crate::tensor::{alt_tuples, wedge, AltSymTensor};

/// Quasi-action of composable pairs by `Hom(E, C)` matrices.
pub type PairAction = Arc<dyn Fn(&JetMatrix, &JetMatrix) -> JetMatrix + Send + Sync>;

/// Groupoid-side data of a 2-term representation up to homotopy.
///
/// `delta_e`/`delta_c` need not be multiplicative; `omega2` absorbs the
/// failure. `partial` maps `C` to `E` (a `dim_e x dim_c` matrix), and
/// `omega2(g1, g2)` maps `E` to `C` (a `dim_c x dim_e` matrix). Unit laws
/// are expected: both quasi-actions are the identity at the group unit and
/// `omega2` vanishes when either argument is the unit.
#[derive(Clone)]
pub struct Ruth2TermGrp {
    pub group: MatrixGroup,
    pub dim_e: usize,
    pub dim_c: usize,
    pub delta_e: QuasiAction,
    pub delta_c: QuasiAction,
    pub partial: Vec<Vec<f64>>,
    pub omega2: PairAction,
}

impl Ruth2TermGrp {
    pub fn new(
        group: MatrixGroup,
        dim_e: usize,
        dim_c: usize,
        delta_e: QuasiAction,
        delta_c: QuasiAction,
        partial: Vec<Vec<f64>>,
        omega2: PairAction,
    ) -> Result<Self, Error> {
        if partial.len() != dim_e || partial.iter().any(|row| row.len() != dim_c) {
            return Err(Error::Dim(format!(
                "partial must be a {dim_e} x {dim_c} matrix"
            )));
        }
        Ok(Ruth2TermGrp {
            group,
            dim_e,
            dim_c,
            delta_e,
            delta_c,
            partial,
            omega2,
        })
    }

    /// Ordinary representation case: `E = 0`, so the groupoid is the action
    /// groupoid of the quasi-action on `C*`.
    pub fn action(group: MatrixGroup, dim_c: usize, delta_c: QuasiAction) -> Self {
        let size = group.size;
        Ruth2TermGrp {
            group,
            dim_e: 0,
            dim_c,
            delta_e: Arc::new(move |g: &JetMatrix| {
                debug_assert_eq!(g.rows, size);
                JetMatrix::from_fn(0, 0, |_, _| unreachable!())
            }),
            delta_c,
            partial: Vec::new(),
            omega2: Arc::new(move |_: &JetMatrix, _: &JetMatrix| {
                JetMatrix::from_fn(0, 0, |_, _| unreachable!())
            }),
        }
    }

    /// Largest violation of the unit laws at the group identity, probed
    /// against the supplied sample points.
    pub fn unit_law_residual(&self, samples: &[Vec<Vec<f64>>]) -> f64 {
        let ctx = JetCtx::scalar();
        let e = self.group.identity(&ctx);
        let mut worst = 0.0f64;
        let dc = (self.delta_c)(&e);
        worst = worst.max(dc.sub(&JetMatrix::identity(&ctx, self.dim_c)).max_abs());
        if self.dim_e > 0 {
            let de = (self.delta_e)(&e);
            worst = worst.max(de.sub(&JetMatrix::identity(&ctx, self.dim_e)).max_abs());
            for m in samples {
                let g = JetMatrix::from_f64(&ctx, m);
                worst = worst.max((self.omega2)(&e, &g).max_abs());
                worst = worst.max((self.omega2)(&g, &e).max_abs());
            }
        }
        worst
    }
}

/// Algebra-side data of a 2-term representation up to homotopy: a two-term
/// complex `∂: C → E` with `C` in degree −1 and `E` in degree 0,
/// connection matrices for both spaces, and a `Hom(E, C)`-valued curvature
/// 2-form absorbing the failure of the connections to be flat.
///
/// The constructor enforces one thing only: the operator
/// [`ruth_differential_alg`] squares to zero. The classical coherence
/// equations (`∂` parallel, both curvatures matching the correction, the
/// Bianchi identity) are exactly what that unfolds to.
#[derive(Clone, Debug)]
pub struct Ruth2TermAlg {
    pub algebra: LieAlgebra,
    pub dim_e: usize,
    pub dim_c: usize,
    /// `dim_e x dim_c` matrix of the degree-1 map `C → E`.
    pub partial: QMatrix,
    /// `∇^E` matrices, one `dim_e x dim_e` entry per basis direction.
    pub nabla_e: Vec<QMatrix>,
    /// `∇^C` matrices, one `dim_c x dim_c` entry per basis direction.
    pub nabla_c: Vec<QMatrix>,
    /// Curvature 2-form; each coefficient vector flattens a
    /// `dim_c x dim_e` matrix row-major, entry `c·dim_e + a` being row `c`,
    /// column `a`.
    pub curvature: AltSymTensor<Rat>,
}

impl Ruth2TermAlg {
    pub fn new(
        algebra: LieAlgebra,
        dim_e: usize,
        dim_c: usize,
        partial: QMatrix,
        nabla_e: Vec<QMatrix>,
        nabla_c: Vec<QMatrix>,
        curvature: AltSymTensor<Rat>,
    ) -> Result<Self, Error> {
        let n = algebra.n;
        if partial.rows != dim_e || partial.cols != dim_c {
            return Err(Error::Dim(format!("partial must be {dim_e} x {dim_c}")));
        }
        if nabla_e.len() != n || nabla_e.iter().any(|m| m.rows != dim_e || m.cols != dim_e) {
            return Err(Error::Dim(format!(
                "nabla_e needs {n} matrices of size {dim_e}"
            )));
        }
        if nabla_c.len() != n || nabla_c.iter().any(|m| m.rows != dim_c || m.cols != dim_c) {
            return Err(Error::Dim(format!(
                "nabla_c needs {n} matrices of size {dim_c}"
            )));
        }
        if curvature.p != 2
            || curvature.k != 0
            || curvature.alt_dim != n
            || curvature.value_dim != dim_c * dim_e
        {
            return Err(Error::Dim(
                "curvature must be a 2-form with Hom(E, C) values".into(),
            ));
        }
        let alg = Ruth2TermAlg {
            algebra,
            dim_e,
            dim_c,
            partial,
            nabla_e,
            nabla_c,
            curvature,
        };
        alg.check_square_zero()?;
        Ok(alg)
    }

    /// Ordinary representation placed in degree −1: `E = 0` and `∇^C` the
    /// action matrices.
    pub fn degree_minus_one(rep: &Representation) -> Self {
        let n = rep.algebra.n;
        Ruth2TermAlg {
            algebra: rep.algebra.clone(),
            dim_e: 0,
            dim_c: rep.dim_c,
            partial: QMatrix::zeros(0, rep.dim_c),
            nabla_e: vec![QMatrix::zeros(0, 0); n],
            nabla_c: rep.rho.clone(),
            curvature: AltSymTensor::zero(2, 0, n, n, 0),
        }
    }

    /// Ordinary representation placed in degree 0: `C = 0` and `∇^E` the
    /// action matrices.
    pub fn degree_zero(rep: &Representation) -> Self {
        let n = rep.algebra.n;
        Ruth2TermAlg {
            algebra: rep.algebra.clone(),
            dim_e: rep.dim_c,
            dim_c: 0,
            partial: QMatrix::zeros(rep.dim_c, 0),
            nabla_e: rep.rho.clone(),
            nabla_c: vec![QMatrix::zeros(0, 0); n],
            curvature: AltSymTensor::zero(2, 0, n, n, 0),
        }
    }

    /// Curvature matrix `R(e_i, e_j)` at 1-based basis indices.
    pub fn curvature_matrix(&self, i: usize, j: usize) -> QMatrix {
        let v = self.curvature.coeff(&[i, j], &[]);
        QMatrix::from_fn(self.dim_c, self.dim_e, |c, a| v[c * self.dim_e + a].clone())
    }

    /// The square of the differential is tensorial in its argument, so
    /// vanishing on the degree −1 and degree 0 coordinate elements forces
    /// all four coherence identities and hence `D² = 0` in every degree.
    fn check_square_zero(&self) -> Result<(), Error> {
        let mut probes = Vec::new();
        for c in 0..self.dim_c {
            let mut v = vec![Rat::int(0); self.dim_c];
            v[c] = Rat::int(1);
            probes.push(OmegaElement::fiber_constant(self, &v)?);
        }
        for a in 0..self.dim_e {
            let mut om = OmegaElement::zero(self, 0)?;
            let mut v = vec![Rat::int(0); self.dim_e];
            v[a] = Rat::int(1);
            om.omega_e.add_term(&[], &[], &v)?;
            probes.push(om);
        }
        for om in &probes {
            let dd = ruth_differential_alg(self, &ruth_differential_alg(self, om)?)?;
            if !dd.is_zero() {
                return Err(Error::Domain(
                    "differential does not square to zero for this data".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Element of the two-term algebra complex in degree `p`: an `E`-valued
/// `p`-form and a `C`-valued `(p+1)`-form over the algebra. Degree −1 is
/// allowed and consists of the constant `C` half alone.
///
/// Both halves must be built with the algebra dimension in the (unused)
/// symmetric slot space, as [`AltSymTensor::zero`] with `sym_dim = alt_dim`
/// does.
#[derive(Clone, Debug, PartialEq)]
pub struct OmegaElement {
    pub p: i32,
    /// `E`-valued `p`-form; an identically zero degree-0 placeholder when
    /// `p = −1`.
    pub omega_e: AltSymTensor<Rat>,
    /// `C`-valued `(p+1)`-form.
    pub omega_c: AltSymTensor<Rat>,
}

impl OmegaElement {
    /// Zero element of degree `p ≥ −1`.
    pub fn zero(alg: &Ruth2TermAlg, p: i32) -> Result<Self, Error> {
        if p < -1 {
            return Err(Error::Dim("degree below -1".into()));
        }
        let n = alg.algebra.n;
        Ok(OmegaElement {
            p,
            omega_e: AltSymTensor::zero(p.max(0) as usize, 0, n, n, alg.dim_e),
            omega_c: AltSymTensor::zero((p + 1) as usize, 0, n, n, alg.dim_c),
        })
    }

    /// Wraps a validated pair of halves.
    pub fn new(
        alg: &Ruth2TermAlg,
        p: i32,
        omega_e: AltSymTensor<Rat>,
        omega_c: AltSymTensor<Rat>,
    ) -> Result<Self, Error> {
        if p < -1 {
            return Err(Error::Dim("degree below -1".into()));
        }
        if p == -1 && !omega_e.is_zero() {
            return Err(Error::Dim("degree -1 has no E half".into()));
        }
        let n = alg.algebra.n;
        if omega_e.p != p.max(0) as usize
            || omega_e.k != 0
            || omega_e.alt_dim != n
            || omega_e.sym_dim != n
            || omega_e.value_dim != alg.dim_e
        {
            return Err(Error::Dim("E half has the wrong shape".into()));
        }
        if omega_c.p != (p + 1) as usize
            || omega_c.k != 0
            || omega_c.alt_dim != n
            || omega_c.sym_dim != n
            || omega_c.value_dim != alg.dim_c
        {
            return Err(Error::Dim("C half has the wrong shape".into()));
        }
        Ok(OmegaElement { p, omega_e, omega_c })
    }

    /// Degree −1 element from a constant fiber vector.
    pub fn fiber_constant(alg: &Ruth2TermAlg, c: &[Rat]) -> Result<Self, Error> {
        let mut om = OmegaElement::zero(alg, -1)?;
        om.omega_c.add_term(&[], &[], c)?;
        Ok(om)
    }

    pub fn is_zero(&self) -> bool {
        self.omega_e.is_zero() && self.omega_c.is_zero()
    }

    pub fn max_abs(&self) -> f64 {
        self.omega_e.max_abs().max(self.omega_c.max_abs())
    }

    pub fn add(&self, rhs: &Self) -> Result<Self, Error> {
        if self.p != rhs.p {
            return Err(Error::Dim("degree mismatch".into()));
        }
        Ok(OmegaElement {
            p: self.p,
            omega_e: self.omega_e.add(&rhs.omega_e)?,
            omega_c: self.omega_c.add(&rhs.omega_c)?,
        })
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self, Error> {
        self.add(&rhs.neg())
    }

    pub fn neg(&self) -> Self {
        OmegaElement {
            p: self.p,
            omega_e: self.omega_e.neg(),
            omega_c: self.omega_c.neg(),
        }
    }

    pub fn scale(&self, s: &Rat) -> Self {
        OmegaElement {
            p: self.p,
            omega_e: self.omega_e.scale(s),
            omega_c: self.omega_c.scale(s),
        }
    }

    /// Right module action of scalar forms on the algebra: wedges both
    /// halves by `gamma` and shifts the degree by `gamma.p`.
    pub fn wedge_form(
        &self,
        alg: &Ruth2TermAlg,
        gamma: &AltSymTensor<Rat>,
    ) -> Result<Self, Error> {
        let n = alg.algebra.n;
        if gamma.k != 0 || gamma.value_dim != 1 || gamma.alt_dim != n {
            return Err(Error::Dim(
                "module factor must be a scalar form on the algebra".into(),
            ));
        }
        let p = self.p + gamma.p as i32;
        let omega_c = wedge(&self.omega_c, gamma)?;
        let omega_e = if self.p == -1 {
            AltSymTensor::zero(p.max(0) as usize, 0, n, n, alg.dim_e)
        } else {
            wedge(&self.omega_e, gamma)?
        };
        OmegaElement::new(alg, p, omega_e, omega_c)
    }
}

/// Covariant exterior differential of a vector-valued form for an
/// arbitrary list of connection matrices (no flatness assumed):
///
/// `(d_∇α)(u_1,…,u_{p+1}) = Σ_i (−1)^{i+1} ∇_{u_i} α(…,û_i,…)
///  + Σ_{i<j} (−1)^{i+j} α([u_i,u_j], …,û_i,…,û_j,…)`.
///
/// With flat matrices this is the coefficient differential of the
/// corresponding representation; in general its square is the curvature
/// acting by the wedge.
pub fn covariant_differential(
    algebra: &LieAlgebra,
    nabla: &[QMatrix],
    alpha: &AltSymTensor<Rat>,
) -> Result<AltSymTensor<Rat>, Error> {
    let n = algebra.n;
    if alpha.k != 0 {
        return Err(Error::Dim(
            "covariant differential expects no symmetric slots".into(),
        ));
    }
    if alpha.alt_dim != n {
        return Err(Error::Dim(
            "form degree space does not match the algebra".into(),
        ));
    }
    let dim = alpha.value_dim;
    if nabla.len() != n || nabla.iter().any(|m| m.rows != dim || m.cols != dim) {
        return Err(Error::Dim(
            "connection matrices do not match the value space".into(),
        ));
    }
    let p = alpha.p;
    let mut out = AltSymTensor::zero(p + 1, 0, n, alpha.sym_dim, dim);
    for key in alt_tuples(n, p + 1) {
        let mut value = vec![Rat::int(0); dim];
        for a in 0..p + 1 {
            let sign = if a % 2 == 0 { 1 } else { -1 };
            let sub: Vec<usize> = key
                .iter()
                .enumerate()
                .filter(|(pos, _)| *pos != a)
                .map(|(_, &i)| i)
                .collect();
            let inner = alpha.coeff(&sub, &[]);
            if inner.iter().all(|x| x.is_zero()) {
                continue;
            }
            let acted = nabla[key[a] - 1].mul_vec(&inner);
            for (slot, v) in value.iter_mut().zip(acted) {
                *slot += Rat::int(sign) * v;
            }
        }
        for a in 0..p + 1 {
            for b in a + 1..p + 1 {
                let sign = if (a + b) % 2 == 0 { 1 } else { -1 };
                let rest: Vec<usize> = key
                    .iter()
                    .enumerate()
                    .filter(|(pos, _)| *pos != a && *pos != b)
                    .map(|(_, &i)| i)
                    .collect();
                for m in 0..n {
                    let coeff = algebra.structure_constant(key[a] - 1, key[b] - 1, m);
                    if coeff.is_zero() {
                        continue;
                    }
                    let mut slot_key = vec![m + 1];
                    slot_key.extend_from_slice(&rest);
                    let inner = alpha.coeff(&slot_key, &[]);
                    for (slot, v) in value.iter_mut().zip(inner) {
                        *slot += Rat::int(sign) * coeff.clone() * v;
                    }
                }
            }
        }
        out.add_term(&key, &[], &value)?;
    }
    Ok(out)
}

/// Applies a constant matrix to every coefficient vector of a form.
fn matrix_apply_form(m: &QMatrix, alpha: &AltSymTensor<Rat>) -> AltSymTensor<Rat> {
    debug_assert_eq!(m.cols, alpha.value_dim);
    let mut out = AltSymTensor::zero(alpha.p, alpha.k, alpha.alt_dim, alpha.sym_dim, m.rows);
    for ((alt, sym), w) in alpha.terms() {
        out.add_term(alt, sym, &m.mul_vec(w)).expect("canonical key");
    }
    out
}

/// Wedge of the curvature with an `E`-valued form, contracting values:
/// `(R ∧ ω)(u_1,…,u_{p+2}) = Σ_σ sgn(σ) R(u_{σ(1)}, u_{σ(2)}) ω(u_{σ(3)},…)`
/// over the (2, p)-unshuffles, realized by key merging.
fn curvature_wedge(
    alg: &Ruth2TermAlg,
    omega_e: &AltSymTensor<Rat>,
) -> Result<AltSymTensor<Rat>, Error> {
    let n = alg.algebra.n;
    let mut out = AltSymTensor::zero(omega_e.p + 2, 0, n, omega_e.sym_dim, alg.dim_c);
    for ((rkey, _), rval) in alg.curvature.terms() {
        for ((okey, _), oval) in omega_e.terms() {
            let mut value = vec![Rat::int(0); alg.dim_c];
            for c in 0..alg.dim_c {
                for a in 0..alg.dim_e {
                    value[c] += rval[c * alg.dim_e + a].clone() * oval[a].clone();
                }
            }
            let mut merged = rkey.clone();
            merged.extend_from_slice(okey);
            out.add_term(&merged, &[], &value)?;
        }
    }
    Ok(out)
}

/// Differential of the two-term algebra complex:
///
/// `D(ω)_E = d_{∇^E} ω_E + ∂ ∘ ω_C`,
/// `D(ω)_C = −d_{∇^C} ω_C + R ∧ ω_E`,
///
/// the unique degree-1 operator matching the sign-reversed Koszul
/// differential of the evaluation model (equality with
/// `ev ∘ (−d) ∘ ev⁻¹` is covered by tests). In degree −1 this reads
/// `D(0, c) = (∂c, −d_{∇^C} c)`.
pub fn ruth_differential_alg(
    alg: &Ruth2TermAlg,
    omega: &OmegaElement,
) -> Result<OmegaElement, Error> {
    OmegaElement::new(alg, omega.p, omega.omega_e.clone(), omega.omega_c.clone())?;
    let pc = matrix_apply_form(&alg.partial, &omega.omega_c);
    let dc = covariant_differential(&alg.algebra, &alg.nabla_c, &omega.omega_c)?;
    if omega.p == -1 {
        return OmegaElement::new(alg, 0, pc, dc.neg());
    }
    let de = covariant_differential(&alg.algebra, &alg.nabla_e, &omega.omega_e)?;
    let oe = de.add(&pc)?;
    let oc = dc.neg().add(&curvature_wedge(alg, &omega.omega_e)?)?;
    OmegaElement::new(alg, omega.p + 1, oe, oc)
}

/// Matrix of [`ruth_differential_alg`] at degree `p` in flat coordinates
/// (`E` half first, then `C` half, each in canonical basis-key order).
pub fn ruth_matrix(alg: &Ruth2TermAlg, p: i32) -> Result<QMatrix, Error> {
    let n = alg.algebra.n;
    let zin = OmegaElement::zero(alg, p)?;
    let e_len = if p >= 0 { zin.omega_e.flatten().len() } else { 0 };
    let c_len = zin.omega_c.flatten().len();
    let zout = OmegaElement::zero(alg, p + 1)?;
    let dout = zout.omega_e.flatten().len() + zout.omega_c.flatten().len();
    let mut m = QMatrix::zeros(dout, e_len + c_len);
    for col in 0..e_len + c_len {
        let mut fe = vec![Rat::int(0); zin.omega_e.flatten().len()];
        let mut fc = vec![Rat::int(0); c_len];
        if col < e_len {
            fe[col] = Rat::int(1);
        } else {
            fc[col - e_len] = Rat::int(1);
        }
        let omega_e =
            AltSymTensor::from_flat(p.max(0) as usize, 0, n, n, alg.dim_e, &fe)?;
        let omega_c = AltSymTensor::from_flat((p + 1) as usize, 0, n, n, alg.dim_c, &fc)?;
        let image = ruth_differential_alg(alg, &OmegaElement { p, omega_e, omega_c })?;
        let mut flat = image.omega_e.flatten();
        flat.extend(image.omega_c.flatten());
        for (row, v) in flat.into_iter().enumerate() {
            if !v.is_zero() {
                m.set(row, col, v);
            }
        }
    }
    Ok(m)
}

/// Cohomology dimensions of the two-term complex from exact ranks, one
/// entry per degree `−1..=n` (entry `i` is degree `i − 1`).
pub fn ruth_cohomology_dims(alg: &Ruth2TermAlg) -> Result<Vec<usize>, Error> {
    let n = alg.algebra.n as i32;
    let mut out = Vec::new();
    let mut prev_rank = 0usize;
    for p in -1..=n {
        let d = ruth_matrix(alg, p)?;
        let rank = d.rank();
        out.push(d.cols - rank - prev_rank);
        prev_rank = rank;
    }
    Ok(out)
}

/// Rebuilds a scalar form on the algebra as a form on the extended space
/// `g ⊕ E*` of the evaluation model (indices `1..=n` for `g`,
/// `n+1..=n+dim_e` for `E*`), ready to wedge with model functions.
pub fn model_lift_form(
    alg: &Ruth2TermAlg,
    gamma: &AltSymTensor<Rat>,
) -> Result<GradedCochain, Error> {
    let n = alg.algebra.n;
    if gamma.k != 0 || gamma.value_dim != 1 || gamma.alt_dim != n {
        return Err(Error::Dim("expected a scalar form on the algebra".into()));
    }
    let mut out = AltSymTensor::zero(gamma.p, 0, n + alg.dim_e, alg.dim_c, 1);
    for ((alt, _), w) in gamma.terms() {
        out.add_term(alt, &[], w)?;
    }
    Ok(out)
}

/// Realizes a homogeneity-one function on the evaluation model as a pair
/// of forms. The piece linear in the fiber gives the `C` half directly,
/// and the piece linear in the `E*` slots gives the `E` half through
/// `⟨ω_E(u_1,…,u_p), η⟩ = α(Υ_η, χ_{u_1}, …, χ_{u_p})`.
pub fn ruth_ev(alg: &Ruth2TermAlg, mix: &GradedMix) -> Result<OmegaElement, Error> {
    let n = alg.algebra.n;
    if mix.n != n + alg.dim_e || mix.dim_c != alg.dim_c {
        return Err(Error::Dim("mix does not live on the model space".into()));
    }
    let mut om = OmegaElement::zero(alg, mix.p as i32 - 1)?;
    for (k, gc) in mix.pieces.iter() {
        match k {
            1 => {
                for ((alt, sym), w) in gc.terms() {
                    if alt.iter().any(|&i| i > n) {
                        return Err(Error::Domain(
                            "homogeneity above one: fiber slot next to an E* slot".into(),
                        ));
                    }
                    let mut value = vec![Rat::int(0); alg.dim_c];
                    value[sym[0] - 1] = w[0].clone();
                    om.omega_c.add_term(alt, &[], &value)?;
                }
            }
            0 => {
                for ((alt, _), w) in gc.terms() {
                    if alt.iter().filter(|&&i| i > n).count() != 1 {
                        return Err(Error::Domain(
                            "constant piece is not linear in the E* slots".into(),
                        ));
                    }
                    // canonical keys are sorted, so the single E* index is last
                    let a = alt[alt.len() - 1] - n;
                    let sign = if (alt.len() - 1) % 2 == 0 {
                        Rat::int(1)
                    } else {
                        Rat::int(-1)
                    };
                    let mut value = vec![Rat::int(0); alg.dim_e];
                    value[a - 1] = sign * w[0].clone();
                    om.omega_e.add_term(&alt[..alt.len() - 1], &[], &value)?;
                }
            }
            _ => {
                return Err(Error::Domain(
                    "homogeneity above one: fiber degree at least two".into(),
                ))
            }
        }
    }
    Ok(om)
}

/// Inverse of [`ruth_ev`]: the model function of a form pair.
pub fn ruth_ev_inverse(alg: &Ruth2TermAlg, omega: &OmegaElement) -> Result<GradedMix, Error> {
    OmegaElement::new(alg, omega.p, omega.omega_e.clone(), omega.omega_c.clone())?;
    let n = alg.algebra.n;
    let ext = n + alg.dim_e;
    let mp = (omega.p + 1) as usize;
    let mut mix = GradedMix::new(mp, ext, alg.dim_c);
    let mut lin = AltSymTensor::zero(mp, 1, ext, alg.dim_c, 1);
    for ((alt, _), w) in omega.omega_c.terms() {
        for c in 0..alg.dim_c {
            if !w[c].is_zero() {
                lin.add_term(alt, &[c + 1], &[w[c].clone()])?;
            }
        }
    }
    mix.add_piece(lin)?;
    if omega.p >= 0 {
        let mut cst = AltSymTensor::zero(mp, 0, ext, alg.dim_c, 1);
        for ((alt, _), w) in omega.omega_e.terms() {
            for a in 0..alg.dim_e {
                if !w[a].is_zero() {
                    let mut key = vec![n + a + 1];
                    key.extend_from_slice(alt);
                    cst.add_term(&key, &[], &[w[a].clone()])?;
                }
            }
        }
        mix.add_piece(cst)?;
    }
    Ok(mix)
}

/// Koszul differential of the evaluation model: the extended space
/// `g ⊕ E*` acting on polynomial functions of the `C*` fiber. Algebra
/// directions act through `∇^C` and bracket among themselves into the
/// structure constants plus a fiber-linear `E*` part given by the
/// curvature; an `E*` direction acts by the constant `−⟨η, ∂·⟩` and
/// brackets with algebra directions through the transpose of `∇^E`.
///
/// Conjugating its negative by [`ruth_ev`] reproduces
/// [`ruth_differential_alg`].
pub fn ruth_model_differential(alg: &Ruth2TermAlg, mix: &GradedMix) -> Result<GradedMix, Error> {
    let n = alg.algebra.n;
    let ext = n + alg.dim_e;
    if mix.n != ext || mix.dim_c != alg.dim_c {
        return Err(Error::Dim("mix does not live on the model space".into()));
    }
    let mut out = GradedMix::new(mix.p + 1, ext, alg.dim_c);
    for (&k, gc) in mix.pieces.iter() {
        let mut same = AltSymTensor::zero(mix.p + 1, k, ext, alg.dim_c, 1);
        let mut lower = AltSymTensor::zero(mix.p + 1, k.saturating_sub(1), ext, alg.dim_c, 1);
        let mut higher = AltSymTensor::zero(mix.p + 1, k + 1, ext, alg.dim_c, 1);
        for ((alt, sym), w) in gc.terms() {
            let wv = w[0].clone();
            // action of algebra directions: derivation through ∇^C
            for i in 1..=n {
                for (t, &ct) in sym.iter().enumerate() {
                    for cp in 0..alg.dim_c {
                        let entry = alg.nabla_c[i - 1].at(cp, ct - 1);
                        if entry.is_zero() {
                            continue;
                        }
                        let mut key = vec![i];
                        key.extend_from_slice(alt);
                        let mut s2 = sym.to_vec();
                        s2[t] = cp + 1;
                        same.add_term(&key, &s2, &[wv.clone() * entry.clone()])?;
                    }
                }
            }
            // action of E* directions: constant −⟨η, ∂·⟩ per polynomial slot
            for a in 1..=alg.dim_e {
                for (t, &ct) in sym.iter().enumerate() {
                    let entry = alg.partial.at(a - 1, ct - 1);
                    if entry.is_zero() {
                        continue;
                    }
                    let mut key = vec![n + a];
                    key.extend_from_slice(alt);
                    let mut s2 = sym.to_vec();
                    s2.remove(t);
                    lower.add_term(&key, &s2, &[-(wv.clone() * entry.clone())])?;
                }
            }
            // bracket insertions: −e^x ∧ e^y ∧ ι_{[x,y]} over extended pairs
            for (t, &slot) in alt.iter().enumerate() {
                let tsign = if t % 2 == 0 { Rat::int(1) } else { Rat::int(-1) };
                let rest: Vec<usize> = alt
                    .iter()
                    .enumerate()
                    .filter(|(pos, _)| *pos != t)
                    .map(|(_, &x)| x)
                    .collect();
                if slot <= n {
                    for b in 1..=n {
                        for bp in b + 1..=n {
                            let c = alg.algebra.structure_constant(b - 1, bp - 1, slot - 1);
                            if c.is_zero() {
                                continue;
                            }
                            let mut key = vec![b, bp];
                            key.extend_from_slice(&rest);
                            same.add_term(&key, sym, &[-(tsign.clone() * c.clone() * wv.clone())])?;
                        }
                    }
                } else {
                    let a = slot - n;
                    // fiber-linear part of an algebra-algebra bracket
                    for b in 1..=n {
                        for bp in b + 1..=n {
                            let rv = alg.curvature.coeff(&[b, bp], &[]);
                            for cp in 0..alg.dim_c {
                                let entry = rv[cp * alg.dim_e + (a - 1)].clone();
                                if entry.is_zero() {
                                    continue;
                                }
                                let mut key = vec![b, bp];
                                key.extend_from_slice(&rest);
                                let mut s2 = sym.to_vec();
                                s2.push(cp + 1);
                                higher.add_term(&key, &s2, &[-(tsign.clone() * entry * wv.clone())])?;
                            }
                        }
                    }
                    // mixed bracket through the transpose of ∇^E
                    for b in 1..=n {
                        for ap in 1..=alg.dim_e {
                            let entry = alg.nabla_e[b - 1].at(ap - 1, a - 1);
                            if entry.is_zero() {
                                continue;
                            }
                            let mut key = vec![b, n + ap];
                            key.extend_from_slice(&rest);
                            same.add_term(&key, sym, &[tsign.clone() * entry.clone() * wv.clone()])?;
                        }
                    }
                }
            }
        }
        out.add_piece(same)?;
        out.add_piece(lower)?;
        out.add_piece(higher)?;
    }
    Ok(out)
}

/// Pair of group cochains representing a fiberwise-linear cochain on the
/// dual fibration: `μ_E` on `p` slots with values in `E`, `μ_C` on `p + 1`
/// slots with values in `C`.
#[derive(Clone)]
pub struct RuthCochain {
    pub p: usize,
    pub dim_e: usize,
    pub dim_c: usize,
    mu_e: Arc<dyn Fn(&JetCtx, &[JetMatrix]) -> Vec<Jet> + Send + Sync>,
    mu_c: Arc<dyn Fn(&JetCtx, &[JetMatrix]) -> Vec<Jet> + Send + Sync>,
}

impl RuthCochain {
    pub fn new(
        p: usize,
        dim_e: usize,
        dim_c: usize,
        mu_e: impl Fn(&JetCtx, &[JetMatrix]) -> Vec<Jet> + Send + Sync + 'static,
        mu_c: impl Fn(&JetCtx, &[JetMatrix]) -> Vec<Jet> + Send + Sync + 'static,
    ) -> Self {
        RuthCochain {
            p,
            dim_e,
            dim_c,
            mu_e: Arc::new(mu_e),
            mu_c: Arc::new(mu_c),
        }
    }

    /// `E` half, on `p` slots.
    pub fn eval_e(&self, ctx: &JetCtx, gs: &[JetMatrix]) -> Vec<Jet> {
        assert_eq!(gs.len(), self.p, "E half takes p slots");
        let out = (self.mu_e)(ctx, gs);
        assert_eq!(out.len(), self.dim_e, "E half has dim_e components");
        out
    }

    /// `C` half, on `p + 1` slots.
    pub fn eval_c(&self, ctx: &JetCtx, gs: &[JetMatrix]) -> Vec<Jet> {
        assert_eq!(gs.len(), self.p + 1, "C half takes p + 1 slots");
        let out = (self.mu_c)(ctx, gs);
        assert_eq!(out.len(), self.dim_c, "C half has dim_c components");
        out
    }

    pub fn neg(&self) -> Self {
        let me = self.mu_e.clone();
        let mc = self.mu_c.clone();
        RuthCochain {
            p: self.p,
            dim_e: self.dim_e,
            dim_c: self.dim_c,
            mu_e: Arc::new(move |ctx, gs| me(ctx, gs).iter().map(|j| j.neg()).collect()),
            mu_c: Arc::new(move |ctx, gs| mc(ctx, gs).iter().map(|j| j.neg()).collect()),
        }
    }
}

/// Pairing map from cochain pairs to fiberwise-linear cochains on the dual
/// fibration:
///
/// `Ψ(μ)(ξ; g_1,…,g_{p+1}; η_1,…,η_{p+1})
///   = ⟨η_1, μ_E(g_2,…,g_{p+1})⟩ + ⟨ξ, μ_C(g_1,…,g_{p+1})⟩`.
///
/// The image is exactly the fiberwise-linear cochains that read none of
/// the `η` blocks past the first and whose `η_1` pairing does not depend
/// on the first arrow (the conditions measured by
/// [`crate::group::is_vb_cochain`]).
pub fn psi(model: &Arc<Ruth2TermGrp>, mu: &RuthCochain) -> Result<Cochain, Error> {
    if mu.dim_e != model.dim_e || mu.dim_c != model.dim_c {
        return Err(Error::Dim(
            "cochain pair does not match the model fibers".into(),
        ));
    }
    let mu = mu.clone();
    let dim_c = model.dim_c;
    let dim_e = model.dim_e;
    Ok(Cochain::fiber(
        mu.p + 1,
        model.clone(),
        "psi",
        move |ctx, gs, fib| {
            let mut acc = ctx.zero();
            let vc = (mu.mu_c)(ctx, gs);
            for (x, m) in fib[..dim_c].iter().zip(vc.iter()) {
                acc = acc.add(&x.mul(m));
            }
            if dim_e > 0 {
                let ve = (mu.mu_e)(ctx, &gs[1..]);
                for (h, m) in fib[dim_c..dim_c + dim_e].iter().zip(ve.iter()) {
                    acc = acc.add(&h.mul(m));
                }
            }
            acc
        },
    ))
}

/// Extracts the cochain pair of a fiberwise-linear cochain: the `C` half
/// reads the `ξ` pairing at `η = 0` and the `E` half reads the `η_1`
/// pairing with the first slot parked at the unit.
pub fn psi_inverse(model: &Arc<Ruth2TermGrp>, phi: &Cochain) -> Result<RuthCochain, Error> {
    match &phi.space {
        ValueSpace::Fiber { model: m }
            if m.dim_e == model.dim_e && m.dim_c == model.dim_c => {}
        _ => {
            return Err(Error::Dim(
                "expected a fiber-valued cochain over the model".into(),
            ))
        }
    }
    if phi.p == 0 {
        return Err(Error::Dim("cochain pairs start at fiber degree one".into()));
    }
    let p = phi.p - 1;
    let dim_c = model.dim_c;
    let dim_e = model.dim_e;
    let fib_len = dim_c + phi.p * dim_e;
    let phi_c = phi.clone();
    let mu_c = move |ctx: &JetCtx, gs: &[JetMatrix]| -> Vec<Jet> {
        (0..dim_c)
            .map(|c| {
                let mut fib = vec![ctx.zero(); fib_len];
                fib[c] = ctx.constant(1.0);
                phi_c.eval_unchecked(ctx, gs, &fib).remove(0)
            })
            .collect()
    };
    let phi_e = phi.clone();
    let group = model.group.clone();
    let mu_e = move |ctx: &JetCtx, gs: &[JetMatrix]| -> Vec<Jet> {
        let mut whole = vec![group.identity(ctx)];
        whole.extend_from_slice(gs);
        (0..dim_e)
            .map(|a| {
                let mut fib = vec![ctx.zero(); fib_len];
                fib[dim_c + a] = ctx.constant(1.0);
                phi_e.eval_unchecked(ctx, &whole, &fib).remove(0)
            })
            .collect()
    };
    Ok(RuthCochain::new(p, dim_e, dim_c, mu_e, mu_c))
}

/// Group-side differential `D = −Ψ⁻¹ ∘ δ ∘ Ψ`. For genuine pairs `δ ∘ Ψ`
/// lands back in the image of `Ψ`, so the conjugation loses nothing;
/// [`ruth_image_residual`] measures the defect directly.
pub fn ruth_differential_grp(
    model: &Arc<Ruth2TermGrp>,
    mu: &RuthCochain,
) -> Result<RuthCochain, Error> {
    let dphi = simplicial_delta(&psi(model, mu)?);
    Ok(psi_inverse(model, &dphi)?.neg())
}

/// Largest sampled deviation of `δ(Ψμ)` from the image of `Ψ`, probed by
/// re-expanding through `Ψ ∘ Ψ⁻¹`.
pub fn ruth_image_residual(
    model: &Arc<Ruth2TermGrp>,
    mu: &RuthCochain,
    samples: usize,
    seed: u64,
) -> Result<f64, Error> {
    let dphi = simplicial_delta(&psi(model, mu)?);
    let back = psi(model, &psi_inverse(model, &dphi)?)?;
    let ctx = JetCtx::scalar();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let gs: Vec<JetMatrix> = (0..dphi.p)
            .map(|_| JetMatrix::from_f64(&ctx, &model.group.random_point(&mut rng)))
            .collect();
        let fib: Vec<Jet> = (0..model.dim_c + dphi.p * model.dim_e)
            .map(|_| ctx.constant(rng.gen_range(-1.0..1.0)))
            .collect();
        let a = dphi.eval_unchecked(&ctx, &gs, &fib);
        let b = back.eval_unchecked(&ctx, &gs, &fib);
        worst = worst.max(a[0].sub(&b[0]).max_abs());
    }
    Ok(worst)
}

/// Checks that both halves of a pair vanish whenever any slot is the
/// unit, sampling the remaining slots.
pub fn check_normalized_ruth(
    mu: &RuthCochain,
    group: &MatrixGroup,
    samples: usize,
    tol: f64,
    seed: u64,
) -> (bool, f64) {
    let ctx = JetCtx::scalar();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for half in 0..2 {
        let arity = if half == 0 { mu.p } else { mu.p + 1 };
        if arity == 0 {
            continue;
        }
        for slot in 0..arity {
            for _ in 0..samples.div_ceil(arity) {
                let gs: Vec<JetMatrix> = (0..arity)
                    .map(|i| {
                        if i == slot {
                            group.identity(&ctx)
                        } else {
                            JetMatrix::from_f64(&ctx, &group.random_point(&mut rng))
                        }
                    })
                    .collect();
                let vals = if half == 0 {
                    mu.eval_e(&ctx, &gs)
                } else {
                    mu.eval_c(&ctx, &gs)
                };
                for v in vals {
                    worst = worst.max(v.max_abs());
                }
            }
        }
    }
    (worst <= tol, worst)
}

fn exact_rat(x: f64) -> Result<Rat, Error> {
    Rat::from_f64_exact(x).ok_or_else(|| Error::Domain("non-finite derivative".into()))
}

fn jet_derivative_matrix(m: &JetMatrix, sym: usize) -> Result<QMatrix, Error> {
    let mut out = QMatrix::zeros(m.rows, m.cols);
    for r in 0..m.rows {
        for c in 0..m.cols {
            let d = m.at(r, c).mixed(&[sym]);
            if d != 0.0 {
                out.set(r, c, exact_rat(d)?);
            }
        }
    }
    Ok(out)
}

/// First-order data of a group model at the unit: connections from the
/// quasi-actions, curvature from the antisymmetrized mixed second
/// derivative of `Ω`. All derivatives are jet-exact, and the result must
/// pass the exact square-zero check of [`Ruth2TermAlg::new`], which ties
/// coherent group data to coherent algebra data.
pub fn differentiate_model(model: &Ruth2TermGrp) -> Result<Ruth2TermAlg, Error> {
    let group = &model.group;
    let n = group.algebra.n;
    let ctx = JetCtx::first_order(n);
    let gens: Vec<JetMatrix> = (0..n)
        .map(|i| {
            let coeffs: Vec<Jet> = (0..n)
                .map(|j| if j == i { ctx.symbol(i) } else { ctx.zero() })
                .collect();
            group.exp(&ctx, &coeffs)
        })
        .collect();
    let mut nabla_e = Vec::with_capacity(n);
    let mut nabla_c = Vec::with_capacity(n);
    for (i, g) in gens.iter().enumerate() {
        nabla_c.push(jet_derivative_matrix(&(model.delta_c)(g), i)?);
        nabla_e.push(jet_derivative_matrix(&(model.delta_e)(g), i)?);
    }
    let mut partial = QMatrix::zeros(model.dim_e, model.dim_c);
    for (a, row) in model.partial.iter().enumerate() {
        for (c, &x) in row.iter().enumerate() {
            if x != 0.0 {
                partial.set(a, c, exact_rat(x)?);
            }
        }
    }
    let mut curvature = AltSymTensor::zero(2, 0, n, n, model.dim_c * model.dim_e);
    for i in 0..n {
        for j in i + 1..n {
            let sij = (model.omega2)(&gens[i], &gens[j]);
            let sji = (model.omega2)(&gens[j], &gens[i]);
            let mut value = vec![Rat::int(0); model.dim_c * model.dim_e];
            for c in 0..model.dim_c {
                for a in 0..model.dim_e {
                    let d = sij.at(c, a).mixed(&[i, j]) - sji.at(c, a).mixed(&[i, j]);
                    value[c * model.dim_e + a] = exact_rat(d)?;
                }
            }
            curvature.add_term(&[i + 1, j + 1], &[], &value)?;
        }
    }
    Ruth2TermAlg::new(
        group.algebra.clone(),
        model.dim_e,
        model.dim_c,
        partial,
        nabla_e,
        nabla_c,
        curvature,
    )
}

/// Torus model on `E = C = ℝ²` with `∂ = id`, obtained by gauging the
/// first-angle rotation action with a pointwise shear `σ` vanishing at the
/// unit:
///
/// `Δ^E = Δ^C = Δ̊ + σ`,
/// `Ω(g_1, g_2) = σ_{g_1 g_2} − Δ̊_{g_1}σ_{g_2} − σ_{g_1}Δ̊_{g_2} − σ_{g_1}σ_{g_2}`,
///
/// which satisfies the groupoid structure equations identically. Rank 1
/// uses a commuting gauge, so the differentiated curvature vanishes; rank
/// 2 mixes two noncommuting directions and differentiates to genuinely
/// curved algebra data. Keep the amplitudes small dyadic rationals (such
/// as `0.375`) when bit-exact differentiation matters downstream.
pub fn gauged_torus_model(rank: usize, a: f64, b: f64) -> Result<Arc<Ruth2TermGrp>, Error> {
    if rank == 0 || rank > 2 {
        return Err(Error::Domain(
            "gauged torus fixtures exist for ranks 1 and 2".into(),
        ));
    }
    let group = catalog_group(&format!("torus:{rank}"))?;
    let mut w = vec![0i64; rank];
    w[0] = 1;
    let base = torus_weights_action(&group, &[w]);
    let ga = group.clone();
    let sigma = Arc::new(move |m: &JetMatrix| -> JetMatrix {
        let ctx = m.ctx().clone();
        let th = ga.torus_angles(m).expect("torus point");
        if rank == 1 {
            let s = th[0].sin();
            let v = ctx.constant(1.0).sub(&th[0].cos());
            JetMatrix::from_fn(2, 2, |r, c| match (r, c) {
                (0, 0) | (1, 1) => s.scale(a),
                (0, 1) => v.scale(-b),
                (1, 0) => v.scale(b),
                _ => unreachable!(),
            })
        } else {
            let s1 = th[0].sin();
            let s2 = th[1].sin();
            JetMatrix::from_fn(2, 2, |r, c| match (r, c) {
                (0, 0) => s1.scale(a),
                (1, 1) => s1.scale(-a),
                (0, 1) | (1, 0) => s2.scale(b),
                _ => unreachable!(),
            })
        }
    });
    let act: QuasiAction = {
        let base = base.clone();
        let sigma = sigma.clone();
        Arc::new(move |g: &JetMatrix| base(g).add(&sigma(g)))
    };
    let omega: PairAction = {
        let base = base.clone();
        Arc::new(move |g1: &JetMatrix, g2: &JetMatrix| {
            let g12 = g1.mul(g2);
            sigma(&g12)
                .sub(&base(g1).mul(&sigma(g2)))
                .sub(&sigma(g1).mul(&base(g2)))
                .sub(&sigma(g1).mul(&sigma(g2)))
        })
    };
    let partial = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    Ok(Arc::new(Ruth2TermGrp::new(
        group,
        2,
        2,
        act.clone(),
        act,
        partial,
        omega,
    )?))
}

/// Curved algebra fixture on `E = C` from a flat representation and
/// arbitrary shift matrices: `∇^E = ∇^C = ρ + S`, `∂ = id`, and the
/// curvature is the negative of the curvature of the shifted connection.
/// The coherence identities then hold for any choice of shifts.
pub fn shifted_flat_alg(rep: &Representation, shifts: &[QMatrix]) -> Result<Ruth2TermAlg, Error> {
    let n = rep.algebra.n;
    let dim = rep.dim_c;
    if shifts.len() != n || shifts.iter().any(|s| s.rows != dim || s.cols != dim) {
        return Err(Error::Dim(
            "need one square shift per basis direction".into(),
        ));
    }
    let nabla: Vec<QMatrix> = rep.rho.iter().zip(shifts).map(|(r, s)| r.add(s)).collect();
    let mut curvature = AltSymTensor::zero(2, 0, n, n, dim * dim);
    for i in 0..n {
        for j in i + 1..n {
            let mut f = nabla[i].mul(&nabla[j]).sub(&nabla[j].mul(&nabla[i]));
            for m in 0..n {
                let c = rep.algebra.structure_constant(i, j, m);
                if !c.is_zero() {
                    f = f.sub(&nabla[m].scale(c));
                }
            }
            let mut value = vec![Rat::int(0); dim * dim];
            for r in 0..dim {
                for c in 0..dim {
                    value[r * dim + c] = -f.at(r, c).clone();
                }
            }
            curvature.add_term(&[i + 1, j + 1], &[], &value)?;
        }
    }
    Ruth2TermAlg::new(
        rep.algebra.clone(),
        dim,
        dim,
        QMatrix::identity(dim),
        nabla.clone(),
        nabla,
        curvature,
    )
}
