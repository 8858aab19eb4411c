//! Matrix Lie groups, cochains on their nerves, and Haar quadrature.
//!
//! Groups are represented concretely: every element is a matrix with jet
//! entries, so curves through a point and plain numeric evaluation share one
//! code path. The catalog covers tori, SU(2) (as quaternions acting on ℝ⁴),
//! SO(3), the Heisenberg group, and unitriangular groups; each entry ships a
//! closed-form exponential.
//!
//! Cochains are pure evaluators over composable tuples. Three value spaces
//! are supported: real scalars, vectors in a coefficient space carried by a
//! quasi-action, and scalar functions on the nerve of the dual bundle
//! groupoid `s*E* ⊕ t*C*` (fiber cochains). The simplicial differential,
//! cup product, fiberwise homogeneity projection, and the averaging
//! homotopy over a compact group all act on these.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::Rng;

use crate::error::Error;
use crate::jet::{Jet, JetCtx, JetMatrix};
use crate::lie::{catalog_algebra, defining_rep, LieAlgebra};
use crate::ruth::Ruth2TermGrp;
use crate::scalar::Scalar;

/// Matrix-valued function of a single group element, `g ↦ Δ_g`.
pub type QuasiAction = Arc<dyn Fn(&JetMatrix) -> JetMatrix + Send + Sync>;

/// Linear splitting used by the averaging homotopy: `(h, ξ) ↦ η` selects
/// the `E*`-component of an arrow over `h` with target `ξ`.
pub type Splitting = Arc<dyn Fn(&JetMatrix, &[Jet]) -> Vec<Jet> + Send + Sync>;

/// Default sample count for normalization spot checks.
pub const DEFAULT_NORM_SAMPLES: usize = 64;
/// Default tolerance for normalization spot checks.
pub const DEFAULT_NORM_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Eq)]
enum GroupKind {
    Torus(usize),
    Su2,
    So3,
    Heis3,
    Ut,
}

/// A Lie group of real matrices with a distinguished algebra basis.
///
/// The basis matrices agree with the defining representation of the
/// attached [`LieAlgebra`], so structure constants computed from group
/// commutators match `algebra.structure_constant` directly.
#[derive(Clone)]
pub struct MatrixGroup {
    pub name: String,
    /// Ambient matrix size; elements are `size x size`.
    pub size: usize,
    pub algebra: LieAlgebra,
    pub compact: bool,
    kind: GroupKind,
    basis: Vec<Vec<Vec<f64>>>,
    gram_inv: Vec<Vec<f64>>,
}

/// Looks up a group by name: `torus:n`, `su2`, `so3`, `heis3`, or `ut:n`.
pub fn catalog_group(name: &str) -> Result<MatrixGroup, Error> {
    let (kind, size, algebra, compact) = if let Some(ns) = name.strip_prefix("torus:") {
        let n: usize = ns
            .parse()
            .map_err(|_| Error::UnknownName(format!("bad torus rank in {name:?}")))?;
        if n == 0 {
            return Err(Error::UnknownName("torus rank must be positive".into()));
        }
        (
            GroupKind::Torus(n),
            2 * n,
            catalog_algebra(&format!("abelian:{n}"))?,
            true,
        )
    } else {
        match name {
            "su2" => (GroupKind::Su2, 4, catalog_algebra("su2")?, true),
            "so3" => (GroupKind::So3, 3, catalog_algebra("so3")?, true),
            "heis3" => (GroupKind::Heis3, 3, catalog_algebra("heis3")?, false),
            _ => {
                if let Some(ns) = name.strip_prefix("ut:") {
                    let n: usize = ns
                        .parse()
                        .map_err(|_| Error::UnknownName(format!("bad size in {name:?}")))?;
                    if n < 2 {
                        return Err(Error::UnknownName("ut size must be at least 2".into()));
                    }
                    (GroupKind::Ut, n, catalog_algebra(&format!("ut:{n}"))?, false)
                } else {
                    return Err(Error::UnknownName(format!("unknown group {name:?}")));
                }
            }
        }
    };

    let basis = match kind {
        GroupKind::Torus(n) => {
            // Block-diagonal rotation generators.
            let mut mats = Vec::with_capacity(n);
            for i in 0..n {
                let mut m = vec![vec![0.0; 2 * n]; 2 * n];
                m[2 * i][2 * i + 1] = -1.0;
                m[2 * i + 1][2 * i] = 1.0;
                mats.push(m);
            }
            mats
        }
        _ => {
            let rep = defining_rep(&algebra)?;
            rep.rho
                .iter()
                .map(|q| {
                    (0..q.rows)
                        .map(|r| (0..q.cols).map(|c| q.at(r, c).approx_f64()).collect())
                        .collect()
                })
                .collect()
        }
    };

    // Gram matrix of the basis under the Frobenius inner product; its
    // inverse turns trace pairings into basis coordinates.
    let n = basis.len();
    let mut gram = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in 0..n {
            let mut s = 0.0;
            for r in 0..size {
                for c in 0..size {
                    s += basis[a][r][c] * basis[b][r][c];
                }
            }
            gram[a][b] = s;
        }
    }
    let gram_inv = crate::jet::invert_f64(&gram)
        .ok_or_else(|| Error::Domain("degenerate algebra basis".into()))?;

    Ok(MatrixGroup {
        name: name.to_string(),
        size,
        algebra,
        compact,
        kind,
        basis,
        gram_inv,
    })
}

/// Sum of an entire power series `c0 + c0·r(1)·s + c0·r(1)·r(2)·s² + …`
/// where `r` gives the ratio between consecutive coefficients. Terminates on
/// the nilpotent part and truncates the scalar tail at roundoff.
fn entire_series(s: &Jet, c0: f64, ratio: impl Fn(usize) -> f64) -> Jet {
    let mut term = s.ctx().constant(c0);
    let mut acc = term.clone();
    let mut quiet = 0;
    for m in 1..=120 {
        term = term.mul(s).scale(ratio(m));
        if term.is_zero() {
            break;
        }
        acc = acc.add(&term);
        if term.max_abs() <= 1e-17 * (1.0 + acc.max_abs()) {
            quiet += 1;
            if quiet >= 3 {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    acc
}

/// `cos(sqrt(s))` as an entire function of `s`.
fn cos_sqrt(s: &Jet) -> Jet {
    entire_series(s, 1.0, |m| -1.0 / ((2 * m - 1) as f64 * (2 * m) as f64))
}

/// `sin(sqrt(s))/sqrt(s)` as an entire function of `s`.
fn sinc_sqrt(s: &Jet) -> Jet {
    entire_series(s, 1.0, |m| -1.0 / ((2 * m) as f64 * (2 * m + 1) as f64))
}

/// `(1 - cos(sqrt(s)))/s` as an entire function of `s`.
fn vers_sqrt(s: &Jet) -> Jet {
    entire_series(s, 0.5, |m| -1.0 / ((2 * m + 1) as f64 * (2 * m + 2) as f64))
}

impl MatrixGroup {
    pub fn identity(&self, ctx: &JetCtx) -> JetMatrix {
        JetMatrix::identity(ctx, self.size)
    }

    /// Basis matrix of the algebra inside the ambient matrix space.
    pub fn basis_matrix(&self, i: usize) -> &Vec<Vec<f64>> {
        &self.basis[i]
    }

    /// `Σ u_i B_i` with jet coefficients.
    pub fn algebra_matrix(&self, ctx: &JetCtx, u: &[Jet]) -> JetMatrix {
        assert_eq!(u.len(), self.algebra.n, "coefficient count mismatch");
        JetMatrix::from_fn(self.size, self.size, |r, c| {
            let mut acc = ctx.zero();
            for (i, ui) in u.iter().enumerate() {
                let b = self.basis[i][r][c];
                if b != 0.0 {
                    acc = acc.add(&ui.scale(b));
                }
            }
            acc
        })
    }

    /// Closed-form exponential of `Σ u_i B_i`.
    pub fn exp(&self, ctx: &JetCtx, u: &[Jet]) -> JetMatrix {
        assert_eq!(u.len(), self.algebra.n, "coefficient count mismatch");
        match self.kind {
            GroupKind::Torus(n) => {
                let mut m = JetMatrix::zeros(ctx, 2 * n, 2 * n);
                for i in 0..n {
                    let c = u[i].cos();
                    let s = u[i].sin();
                    m.set(2 * i, 2 * i, c.clone());
                    m.set(2 * i, 2 * i + 1, s.neg());
                    m.set(2 * i + 1, 2 * i, s);
                    m.set(2 * i + 1, 2 * i + 1, c);
                }
                m
            }
            GroupKind::Su2 => {
                // M² = -(|u|²/4)·I for quaternion generators, so
                // exp(M) = cos(|u|/2)·I + sinc(|u|/2)·M.
                let m = self.algebra_matrix(ctx, u);
                let mut s = ctx.zero();
                for ui in u {
                    s = s.add(&ui.mul(ui));
                }
                let s4 = s.scale(0.25);
                let id = self.identity(ctx);
                id.scale(&cos_sqrt(&s4)).add(&m.scale(&sinc_sqrt(&s4)))
            }
            GroupKind::So3 => {
                // Rodrigues: M³ = -|u|²·M.
                let m = self.algebra_matrix(ctx, u);
                let mut s = ctx.zero();
                for ui in u {
                    s = s.add(&ui.mul(ui));
                }
                let id = self.identity(ctx);
                id.add(&m.scale(&sinc_sqrt(&s)))
                    .add(&m.mul(&m).scale(&vers_sqrt(&s)))
            }
            GroupKind::Heis3 | GroupKind::Ut => {
                // Strictly upper triangular: the series terminates.
                let m = self.algebra_matrix(ctx, u);
                let mut acc = self.identity(ctx);
                let mut pow = self.identity(ctx);
                for j in 1..self.size {
                    pow = pow.mul(&m).scale_f64(1.0 / j as f64);
                    acc = acc.add(&pow);
                }
                acc
            }
        }
    }

    pub fn exp_f64(&self, u: &[f64]) -> Vec<Vec<f64>> {
        let ctx = JetCtx::scalar();
        let uj: Vec<Jet> = u.iter().map(|&x| ctx.constant(x)).collect();
        self.exp(&ctx, &uj).value_matrix()
    }

    pub fn mult(&self, a: &JetMatrix, b: &JetMatrix) -> JetMatrix {
        a.mul(b)
    }

    pub fn inv(&self, g: &JetMatrix) -> JetMatrix {
        g.inverse()
    }

    /// Coordinates of an ambient matrix in the algebra basis (Frobenius
    /// least squares; exact when the matrix lies in the span).
    pub fn expand_f64(&self, m: &[Vec<f64>]) -> Vec<f64> {
        let n = self.basis.len();
        let mut dots = vec![0.0; n];
        for (a, b) in self.basis.iter().enumerate() {
            let mut s = 0.0;
            for r in 0..self.size {
                for c in 0..self.size {
                    s += b[r][c] * m[r][c];
                }
            }
            dots[a] = s;
        }
        (0..n)
            .map(|i| (0..n).map(|j| self.gram_inv[i][j] * dots[j]).sum())
            .collect()
    }

    /// Jet-valued version of [`expand_f64`](Self::expand_f64).
    pub fn expand_jet(&self, m: &JetMatrix) -> Vec<Jet> {
        let ctx = m.ctx().clone();
        let n = self.basis.len();
        let dots: Vec<Jet> = self
            .basis
            .iter()
            .map(|b| {
                let mut s = ctx.zero();
                for r in 0..self.size {
                    for c in 0..self.size {
                        if b[r][c] != 0.0 {
                            s = s.add(&m.at(r, c).scale(b[r][c]));
                        }
                    }
                }
                s
            })
            .collect();
        (0..n)
            .map(|i| {
                let mut acc = ctx.zero();
                for (j, d) in dots.iter().enumerate() {
                    if self.gram_inv[i][j] != 0.0 {
                        acc = acc.add(&d.scale(self.gram_inv[i][j]));
                    }
                }
                acc
            })
            .collect()
    }

    /// Adjoint action of `g` as a matrix in the algebra basis.
    pub fn ad_matrix(&self, g: &JetMatrix) -> JetMatrix {
        let ctx = g.ctx().clone();
        let gi = g.inverse();
        let n = self.algebra.n;
        let mut cols = Vec::with_capacity(n);
        for j in 0..n {
            let b = JetMatrix::from_f64(&ctx, &self.basis[j]);
            cols.push(self.expand_jet(&g.mul(&b).mul(&gi)));
        }
        JetMatrix::from_fn(n, n, |r, c| cols[c][r].clone())
    }

    /// Rotation angles of a torus element, one per block.
    pub fn torus_angles(&self, g: &JetMatrix) -> Result<Vec<Jet>, Error> {
        match self.kind {
            GroupKind::Torus(n) => Ok((0..n)
                .map(|i| Jet::atan2(g.at(2 * i + 1, 2 * i), g.at(2 * i, 2 * i)))
                .collect()),
            _ => Err(Error::Domain(format!(
                "{} is not a torus; no angle coordinates",
                self.name
            ))),
        }
    }

    /// Random algebra coefficients, uniform in `[-scale, scale]`.
    pub fn random_coeffs(&self, rng: &mut impl Rng, scale: f64) -> Vec<f64> {
        (0..self.algebra.n)
            .map(|_| rng.gen_range(-scale..scale))
            .collect()
    }

    /// Random group element; Haar-uniform on tori, exponential of a bounded
    /// random algebra element otherwise.
    pub fn random_point(&self, rng: &mut impl Rng) -> Vec<Vec<f64>> {
        let coeffs = match self.kind {
            GroupKind::Torus(_) => self.random_coeffs(rng, std::f64::consts::PI),
            _ => self.random_coeffs(rng, 1.2),
        };
        self.exp_f64(&coeffs)
    }
}

/// Quasi-action by the group element itself (matrix coefficients).
pub fn matrix_action() -> QuasiAction {
    Arc::new(|g: &JetMatrix| g.clone())
}

/// Trivial quasi-action on a space of the given dimension.
pub fn trivial_action(dim: usize) -> QuasiAction {
    Arc::new(move |g: &JetMatrix| JetMatrix::identity(g.ctx(), dim))
}

/// Adjoint quasi-action of a group on its own algebra.
pub fn adjoint_action(group: &MatrixGroup) -> QuasiAction {
    let group = group.clone();
    Arc::new(move |g: &JetMatrix| group.ad_matrix(g))
}

/// Torus action with one 2-dimensional rotation block per weight vector:
/// block `b` rotates by `Σ_i weights[b][i]·θ_i`.
pub fn torus_weights_action(group: &MatrixGroup, weights: &[Vec<i64>]) -> QuasiAction {
    let group = group.clone();
    let weights = weights.to_vec();
    Arc::new(move |g: &JetMatrix| {
        let ctx = g.ctx().clone();
        let angles = group
            .torus_angles(g)
            .expect("torus weight action applied to a non-torus element");
        let dim = 2 * weights.len();
        let mut m = JetMatrix::zeros(&ctx, dim, dim);
        for (b, w) in weights.iter().enumerate() {
            let mut phi = ctx.zero();
            for (i, &wi) in w.iter().enumerate() {
                if wi != 0 {
                    phi = phi.add(&angles[i].scale(wi as f64));
                }
            }
            let c = phi.cos();
            let s = phi.sin();
            m.set(2 * b, 2 * b, c.clone());
            m.set(2 * b, 2 * b + 1, s.neg());
            m.set(2 * b + 1, 2 * b, s);
            m.set(2 * b + 1, 2 * b + 1, c);
        }
        m
    })
}

/// Pairwise (cascade) summation; deterministic regardless of chunking.
pub fn pairwise_sum(ctx: &JetCtx, mut items: Vec<Jet>) -> Jet {
    if items.is_empty() {
        return ctx.zero();
    }
    while items.len() > 1 {
        let mut next = Vec::with_capacity(items.len().div_ceil(2));
        for pair in items.chunks(2) {
            next.push(if pair.len() == 2 {
                pair[0].add(&pair[1])
            } else {
                pair[0].clone()
            });
        }
        items = next;
    }
    items.pop().unwrap()
}

/// Deterministic quadrature for normalized Haar measure.
pub struct HaarQuadrature {
    pub scheme: String,
    pub nodes: Vec<Vec<Vec<f64>>>,
    pub weights: Vec<f64>,
    /// Expected left-invariance defect on band-limited integrands.
    pub tolerance: f64,
}

impl HaarQuadrature {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, ctx: &JetCtx, i: usize) -> JetMatrix {
        JetMatrix::from_f64(ctx, &self.nodes[i])
    }

    /// Weighted pairwise sum of `f` over the nodes.
    pub fn integrate(&self, ctx: &JetCtx, mut f: impl FnMut(&JetMatrix) -> Jet) -> Jet {
        let terms: Vec<Jet> = (0..self.len())
            .map(|i| f(&self.node(ctx, i)).scale(self.weights[i]))
            .collect();
        pairwise_sum(ctx, terms)
    }
}

/// Unit quaternion from hyperspherical angles.
fn quaternion_from_angles(omega: f64, theta: f64, phi: f64) -> [f64; 4] {
    [
        omega.cos(),
        omega.sin() * theta.sin() * phi.cos(),
        omega.sin() * theta.sin() * phi.sin(),
        omega.sin() * theta.cos(),
    ]
}

/// Rotation matrix of a unit quaternion `(w, x, y, z)`.
fn rotation_from_quaternion(q: &[f64; 4]) -> Vec<Vec<f64>> {
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    vec![
        vec![
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
        ],
        vec![
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
        ],
        vec![
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ]
}

fn su2_unit_quaternion_matrix(group: &MatrixGroup, q: &[f64; 4]) -> Vec<Vec<f64>> {
    // Left multiplication by the quaternion: w·I + Σ q_i · (2 B_i).
    let mut m = vec![vec![0.0; 4]; 4];
    for r in 0..4 {
        m[r][r] = q[0];
        for (i, b) in group.basis.iter().enumerate() {
            for c in 0..4 {
                m[r][c] += q[i + 1] * 2.0 * b[r][c];
            }
        }
    }
    m
}

/// Builds a Haar quadrature: product trapezoid on tori, midpoint rule in
/// hyperspherical coordinates on SU(2), and its pushforward along the
/// covering map on SO(3). Fails on non-compact groups.
pub fn haar(group: &MatrixGroup, resolution: usize) -> Result<HaarQuadrature, Error> {
    if !group.compact {
        return Err(Error::Domain(format!(
            "haar quadrature requires a compact group, got {}",
            group.name
        )));
    }
    if resolution == 0 {
        return Err(Error::Dim("quadrature resolution must be positive".into()));
    }
    match group.kind {
        GroupKind::Torus(n) => {
            let total = resolution.pow(n as u32);
            let mut nodes = Vec::with_capacity(total);
            let w = 1.0 / total as f64;
            let mut idx = vec![0usize; n];
            for _ in 0..total {
                let angles: Vec<f64> = idx
                    .iter()
                    .map(|&a| 2.0 * std::f64::consts::PI * a as f64 / resolution as f64)
                    .collect();
                nodes.push(group.exp_f64(&angles));
                for d in 0..n {
                    idx[d] += 1;
                    if idx[d] < resolution {
                        break;
                    }
                    idx[d] = 0;
                }
            }
            Ok(HaarQuadrature {
                scheme: format!("torus-trapezoid:{resolution}"),
                nodes,
                weights: vec![w; total],
                tolerance: 1e-12,
            })
        }
        GroupKind::Su2 | GroupKind::So3 => {
            let pi = std::f64::consts::PI;
            let res = resolution;
            let mut nodes = Vec::with_capacity(res * res * res);
            let mut weights = Vec::with_capacity(res * res * res);
            let su2 = if group.kind == GroupKind::Su2 {
                group.clone()
            } else {
                catalog_group("su2")?
            };
            for a in 0..res {
                let omega = (a as f64 + 0.5) * pi / res as f64;
                for b in 0..res {
                    let theta = (b as f64 + 0.5) * pi / res as f64;
                    for c in 0..res {
                        let phi = (c as f64 + 0.5) * 2.0 * pi / res as f64;
                        let q = quaternion_from_angles(omega, theta, phi);
                        nodes.push(match group.kind {
                            GroupKind::Su2 => su2_unit_quaternion_matrix(&su2, &q),
                            _ => rotation_from_quaternion(&q),
                        });
                        weights.push(omega.sin().powi(2) * theta.sin());
                    }
                }
            }
            let total: f64 = weights.iter().sum();
            for w in &mut weights {
                *w /= total;
            }
            Ok(HaarQuadrature {
                scheme: format!("{}-midpoint:{resolution}", group.name),
                nodes,
                weights,
                tolerance: (20.0 / (res * res) as f64).max(1e-12),
            })
        }
        _ => unreachable!("non-compact groups rejected above"),
    }
}

/// Largest defect `|∫ f(h·g) dμ(g) - ∫ f dμ|` over the supplied shifts.
pub fn left_invariance_residual(
    quad: &HaarQuadrature,
    shifts: &[Vec<Vec<f64>>],
    mut f: impl FnMut(&JetMatrix) -> Jet,
) -> f64 {
    let ctx = JetCtx::scalar();
    let base = quad.integrate(&ctx, &mut f).value();
    let mut worst = 0.0f64;
    for h in shifts {
        let hm = JetMatrix::from_f64(&ctx, h);
        let shifted = quad.integrate(&ctx, |g| f(&hm.mul(g))).value();
        worst = worst.max((shifted - base).abs());
    }
    worst
}

/// Value space of a group cochain.
#[derive(Clone)]
pub enum ValueSpace {
    /// Real scalars with the untwisted simplicial differential.
    Real,
    /// Vectors in a coefficient space; the first face is twisted by the
    /// quasi-action.
    Coeff { dim: usize, action: QuasiAction },
    /// Scalar functions on the nerve of the dual-bundle groupoid of a
    /// 2-term representation (`E = 0` gives the action groupoid).
    Fiber { model: Arc<Ruth2TermGrp> },
}

type EvalFn = dyn Fn(&JetCtx, &[JetMatrix], &[Jet]) -> Vec<Jet> + Send + Sync;

/// A `p`-cochain given by a pure evaluator over composable tuples.
///
/// Fiber cochains receive their fiber coordinates flattened as
/// `[ξ | η_1 | … | η_p]`: the target `C*`-coordinate of the first slot
/// followed by one `E*`-block per slot. The remaining `C*`-coordinates are
/// determined by the source constraint and can be recovered with
/// [`chained_fibers`].
#[derive(Clone)]
pub struct Cochain {
    pub p: usize,
    pub space: ValueSpace,
    pub label: String,
    eval: Arc<EvalFn>,
}

impl Cochain {
    pub fn real(
        p: usize,
        label: impl Into<String>,
        f: impl Fn(&JetCtx, &[JetMatrix]) -> Jet + Send + Sync + 'static,
    ) -> Cochain {
        Cochain {
            p,
            space: ValueSpace::Real,
            label: label.into(),
            eval: Arc::new(move |ctx, gs, _| vec![f(ctx, gs)]),
        }
    }

    pub fn coeff_valued(
        p: usize,
        dim: usize,
        action: QuasiAction,
        label: impl Into<String>,
        f: impl Fn(&JetCtx, &[JetMatrix]) -> Vec<Jet> + Send + Sync + 'static,
    ) -> Cochain {
        Cochain {
            p,
            space: ValueSpace::Coeff { dim, action },
            label: label.into(),
            eval: Arc::new(move |ctx, gs, _| f(ctx, gs)),
        }
    }

    pub fn fiber(
        p: usize,
        model: Arc<Ruth2TermGrp>,
        label: impl Into<String>,
        f: impl Fn(&JetCtx, &[JetMatrix], &[Jet]) -> Jet + Send + Sync + 'static,
    ) -> Cochain {
        Cochain {
            p,
            space: ValueSpace::Fiber { model },
            label: label.into(),
            eval: Arc::new(move |ctx, gs, fib| vec![f(ctx, gs, fib)]),
        }
    }

    pub fn value_dim(&self) -> usize {
        match &self.space {
            ValueSpace::Real => 1,
            ValueSpace::Coeff { dim, .. } => *dim,
            ValueSpace::Fiber { .. } => 1,
        }
    }

    /// Number of flattened fiber coordinates the evaluator expects.
    pub fn fiber_len(&self) -> usize {
        match &self.space {
            ValueSpace::Fiber { model } => model.dim_c + self.p * model.dim_e,
            _ => 0,
        }
    }

    pub(crate) fn eval_unchecked(&self, ctx: &JetCtx, gs: &[JetMatrix], fiber: &[Jet]) -> Vec<Jet> {
        debug_assert_eq!(gs.len(), self.p);
        debug_assert_eq!(fiber.len(), self.fiber_len());
        (self.eval)(ctx, gs, fiber)
    }

    pub fn eval(&self, ctx: &JetCtx, gs: &[JetMatrix], fiber: &[Jet]) -> Result<Vec<Jet>, Error> {
        if gs.len() != self.p {
            return Err(Error::Dim(format!(
                "cochain of degree {} evaluated on {} slots",
                self.p,
                gs.len()
            )));
        }
        if fiber.len() != self.fiber_len() {
            return Err(Error::Dim(format!(
                "expected {} fiber coordinates, got {}",
                self.fiber_len(),
                fiber.len()
            )));
        }
        Ok(self.eval_unchecked(ctx, gs, fiber))
    }

    /// Plain numeric evaluation.
    pub fn eval_f64(&self, gs: &[Vec<Vec<f64>>], fiber: &[f64]) -> Result<Vec<f64>, Error> {
        let ctx = JetCtx::scalar();
        let gj: Vec<JetMatrix> = gs.iter().map(|m| JetMatrix::from_f64(&ctx, m)).collect();
        let fj: Vec<Jet> = fiber.iter().map(|&x| ctx.constant(x)).collect();
        Ok(self
            .eval(&ctx, &gj, &fj)?
            .iter()
            .map(|j| j.value())
            .collect())
    }
}

pub(crate) fn mat_t_apply(ctx: &JetCtx, m: &JetMatrix, v: &[Jet]) -> Vec<Jet> {
    assert_eq!(m.rows, v.len());
    (0..m.cols)
        .map(|c| {
            let mut acc = ctx.zero();
            for r in 0..m.rows {
                acc = acc.add(&m.at(r, c).mul(&v[r]));
            }
            acc
        })
        .collect()
}

fn partial_t_apply(model: &Ruth2TermGrp, ctx: &JetCtx, eta: &[Jet]) -> Vec<Jet> {
    (0..model.dim_c)
        .map(|c| {
            let mut acc = ctx.zero();
            for a in 0..model.dim_e {
                if model.partial[a][c] != 0.0 {
                    acc = acc.add(&eta[a].scale(model.partial[a][c]));
                }
            }
            acc
        })
        .collect()
}

/// Splits flattened fiber coordinates into `ξ` and per-slot `η` blocks.
pub fn split_fiber(model: &Ruth2TermGrp, p: usize, flat: &[Jet]) -> (Vec<Jet>, Vec<Vec<Jet>>) {
    assert_eq!(flat.len(), model.dim_c + p * model.dim_e);
    let xi = flat[..model.dim_c].to_vec();
    let etas = (0..p)
        .map(|i| {
            flat[model.dim_c + i * model.dim_e..model.dim_c + (i + 1) * model.dim_e].to_vec()
        })
        .collect();
    (xi, etas)
}

/// Inverse of [`split_fiber`].
pub fn flatten_fiber(xi: &[Jet], etas: &[Vec<Jet>]) -> Vec<Jet> {
    let mut flat = xi.to_vec();
    for e in etas {
        flat.extend_from_slice(e);
    }
    flat
}

/// Target fibers `ξ_1, …, ξ_{P+1}` along a composable tuple: `ξ_1` is the
/// given target and `ξ_{i+1}` the source of slot `i`.
pub fn chained_fibers(
    model: &Ruth2TermGrp,
    ctx: &JetCtx,
    xi: &[Jet],
    gs: &[JetMatrix],
    etas: &[Vec<Jet>],
) -> Vec<Vec<Jet>> {
    let mut out = Vec::with_capacity(gs.len() + 1);
    out.push(xi.to_vec());
    for i in 0..gs.len() {
        let dc = (model.delta_c)(&gs[i]);
        let mut next = mat_t_apply(ctx, &dc, &out[i]);
        if model.dim_e > 0 {
            let corr = partial_t_apply(model, ctx, &etas[i]);
            for (n, c) in next.iter_mut().zip(corr.iter()) {
                *n = n.sub(c);
            }
        }
        out.push(next);
    }
    out
}

/// Face map `∂_i` on composable tuples of the dual-bundle groupoid.
#[allow(clippy::type_complexity)]
pub fn nerve_face(
    model: &Ruth2TermGrp,
    ctx: &JetCtx,
    i: usize,
    xi: &[Jet],
    gs: &[JetMatrix],
    etas: &[Vec<Jet>],
) -> (Vec<Jet>, Vec<JetMatrix>, Vec<Vec<Jet>>) {
    let p = gs.len();
    assert!(i <= p && p >= 1);
    if i == 0 {
        let chained = chained_fibers(model, ctx, xi, &gs[..1], &etas[..1]);
        (
            chained[1].clone(),
            gs[1..].to_vec(),
            etas[1..].to_vec(),
        )
    } else if i == p {
        (xi.to_vec(), gs[..p - 1].to_vec(), etas[..p - 1].to_vec())
    } else {
        // Multiply slots i and i+1 (1-based).
        let chained = chained_fibers(model, ctx, xi, &gs[..i], &etas[..i]);
        let mut gs2: Vec<JetMatrix> = gs[..i - 1].to_vec();
        gs2.push(gs[i - 1].mul(&gs[i]));
        gs2.extend_from_slice(&gs[i + 1..]);
        let mut etas2: Vec<Vec<Jet>> = etas[..i - 1].to_vec();
        let merged = if model.dim_e > 0 {
            let om = (model.omega2)(&gs[i - 1], &gs[i]);
            let de = (model.delta_e)(&gs[i]);
            let t1 = mat_t_apply(ctx, &om, &chained[i - 1]);
            let t2 = mat_t_apply(ctx, &de, &etas[i - 1]);
            t1.iter()
                .zip(t2.iter())
                .zip(etas[i].iter())
                .map(|((a, b), c)| a.add(b).add(c))
                .collect()
        } else {
            Vec::new()
        };
        etas2.push(merged);
        etas2.extend_from_slice(&etas[i + 1..]);
        (xi.to_vec(), gs2, etas2)
    }
}

/// Degeneracy `s_i`: inserts a unit arrow after position `i`.
#[allow(clippy::type_complexity)]
pub fn nerve_degeneracy(
    model: &Ruth2TermGrp,
    ctx: &JetCtx,
    i: usize,
    xi: &[Jet],
    gs: &[JetMatrix],
    etas: &[Vec<Jet>],
) -> (Vec<Jet>, Vec<JetMatrix>, Vec<Vec<Jet>>) {
    let p = gs.len();
    assert!(i <= p);
    let e = model.group.identity(ctx);
    let zero_eta = vec![ctx.zero(); model.dim_e];
    let mut gs2: Vec<JetMatrix> = gs[..i].to_vec();
    gs2.push(e);
    gs2.extend_from_slice(&gs[i..]);
    let mut etas2: Vec<Vec<Jet>> = etas[..i].to_vec();
    etas2.push(zero_eta);
    etas2.extend_from_slice(&etas[i..]);
    (xi.to_vec(), gs2, etas2)
}

fn plain_face(i: usize, gs: &[JetMatrix]) -> Vec<JetMatrix> {
    let p = gs.len();
    if i == 0 {
        gs[1..].to_vec()
    } else if i == p {
        gs[..p - 1].to_vec()
    } else {
        let mut out: Vec<JetMatrix> = gs[..i - 1].to_vec();
        out.push(gs[i - 1].mul(&gs[i]));
        out.extend_from_slice(&gs[i + 1..]);
        out
    }
}

/// Simplicial differential `δ = Σ_i (-1)^i ∂_i^*`, with the first face
/// twisted by the quasi-action for coefficient-valued cochains.
pub fn simplicial_delta(f: &Cochain) -> Cochain {
    let p = f.p;
    let label = format!("delta({})", f.label);
    match &f.space {
        ValueSpace::Real => {
            let inner = f.clone();
            Cochain {
                p: p + 1,
                space: ValueSpace::Real,
                label,
                eval: Arc::new(move |ctx, gs, _| {
                    let mut acc = ctx.zero();
                    for i in 0..=p + 1 {
                        let v = inner.eval_unchecked(ctx, &plain_face(i, gs), &[]);
                        acc = if i % 2 == 0 {
                            acc.add(&v[0])
                        } else {
                            acc.sub(&v[0])
                        };
                    }
                    vec![acc]
                }),
            }
        }
        ValueSpace::Coeff { dim, action } => {
            let inner = f.clone();
            let dim = *dim;
            let action = action.clone();
            Cochain {
                p: p + 1,
                space: ValueSpace::Coeff {
                    dim,
                    action: action.clone(),
                },
                label,
                eval: Arc::new(move |ctx, gs, _| {
                    let mut acc = vec![ctx.zero(); dim];
                    for i in 0..=p + 1 {
                        let mut v = inner.eval_unchecked(ctx, &plain_face(i, gs), &[]);
                        if i == 0 {
                            v = action(&gs[0]).apply(&v);
                        }
                        for (a, x) in acc.iter_mut().zip(v.iter()) {
                            *a = if i % 2 == 0 { a.add(x) } else { a.sub(x) };
                        }
                    }
                    acc
                }),
            }
        }
        ValueSpace::Fiber { model } => {
            let inner = f.clone();
            let model = model.clone();
            Cochain {
                p: p + 1,
                space: ValueSpace::Fiber {
                    model: model.clone(),
                },
                label,
                eval: Arc::new(move |ctx, gs, flat| {
                    let (xi, etas) = split_fiber(&model, p + 1, flat);
                    let mut acc = ctx.zero();
                    for i in 0..=p + 1 {
                        let (xi2, gs2, etas2) = nerve_face(&model, ctx, i, &xi, gs, &etas);
                        let flat2 = flatten_fiber(&xi2, &etas2);
                        let v = inner.eval_unchecked(ctx, &gs2, &flat2);
                        acc = if i % 2 == 0 {
                            acc.add(&v[0])
                        } else {
                            acc.sub(&v[0])
                        };
                    }
                    vec![acc]
                }),
            }
        }
    }
}

/// Cup product `(f1 ⋆ f2)(g_1, …, g_{p+p'}) = f1(g_1…g_p) · f2(g_{p+1}…)`.
///
/// Real factors multiply anything; fiber factors chain their fiber
/// coordinates through the shared model. Coefficient-valued cochains accept
/// a real factor on either side.
pub fn cup(f1: &Cochain, f2: &Cochain) -> Result<Cochain, Error> {
    let (p1, p2) = (f1.p, f2.p);
    let label = format!("({})*({})", f1.label, f2.label);
    let a = f1.clone();
    let b = f2.clone();
    match (&f1.space, &f2.space) {
        (ValueSpace::Real, ValueSpace::Real) => Ok(Cochain {
            p: p1 + p2,
            space: ValueSpace::Real,
            label,
            eval: Arc::new(move |ctx, gs, _| {
                let x = a.eval_unchecked(ctx, &gs[..p1], &[]);
                let y = b.eval_unchecked(ctx, &gs[p1..], &[]);
                vec![x[0].mul(&y[0])]
            }),
        }),
        (ValueSpace::Coeff { dim, action }, ValueSpace::Real) => {
            let dim = *dim;
            let action = action.clone();
            Ok(Cochain {
                p: p1 + p2,
                space: ValueSpace::Coeff { dim, action },
                label,
                eval: Arc::new(move |ctx, gs, _| {
                    let x = a.eval_unchecked(ctx, &gs[..p1], &[]);
                    let y = b.eval_unchecked(ctx, &gs[p1..], &[]);
                    x.iter().map(|xi| xi.mul(&y[0])).collect()
                }),
            })
        }
        (ValueSpace::Real, ValueSpace::Coeff { dim, action }) => {
            let dim = *dim;
            let action = action.clone();
            Ok(Cochain {
                p: p1 + p2,
                space: ValueSpace::Coeff { dim, action },
                label,
                eval: Arc::new(move |ctx, gs, _| {
                    let x = a.eval_unchecked(ctx, &gs[..p1], &[]);
                    let y = b.eval_unchecked(ctx, &gs[p1..], &[]);
                    y.iter().map(|yi| yi.mul(&x[0])).collect()
                }),
            })
        }
        (ValueSpace::Fiber { model }, ValueSpace::Real) => {
            let model = model.clone();
            Ok(Cochain {
                p: p1 + p2,
                space: ValueSpace::Fiber {
                    model: model.clone(),
                },
                label,
                eval: Arc::new(move |ctx, gs, flat| {
                    let (xi, etas) = split_fiber(&model, p1 + p2, flat);
                    let flat1 = flatten_fiber(&xi, &etas[..p1]);
                    let x = a.eval_unchecked(ctx, &gs[..p1], &flat1);
                    let y = b.eval_unchecked(ctx, &gs[p1..], &[]);
                    vec![x[0].mul(&y[0])]
                }),
            })
        }
        (ValueSpace::Real, ValueSpace::Fiber { model }) => {
            let model = model.clone();
            Ok(Cochain {
                p: p1 + p2,
                space: ValueSpace::Fiber {
                    model: model.clone(),
                },
                label,
                eval: Arc::new(move |ctx, gs, flat| {
                    let (xi, etas) = split_fiber(&model, p1 + p2, flat);
                    let x = a.eval_unchecked(ctx, &gs[..p1], &[]);
                    let chained = chained_fibers(&model, ctx, &xi, &gs[..p1], &etas[..p1]);
                    let flat2 = flatten_fiber(&chained[p1], &etas[p1..]);
                    let y = b.eval_unchecked(ctx, &gs[p1..], &flat2);
                    vec![x[0].mul(&y[0])]
                }),
            })
        }
        (ValueSpace::Fiber { model }, ValueSpace::Fiber { model: m2 }) => {
            if model.dim_c != m2.dim_c || model.dim_e != m2.dim_e {
                return Err(Error::Dim(
                    "cup of fiber cochains over different bundle models".into(),
                ));
            }
            let model = model.clone();
            Ok(Cochain {
                p: p1 + p2,
                space: ValueSpace::Fiber {
                    model: model.clone(),
                },
                label,
                eval: Arc::new(move |ctx, gs, flat| {
                    let (xi, etas) = split_fiber(&model, p1 + p2, flat);
                    let flat1 = flatten_fiber(&xi, &etas[..p1]);
                    let x = a.eval_unchecked(ctx, &gs[..p1], &flat1);
                    let chained = chained_fibers(&model, ctx, &xi, &gs[..p1], &etas[..p1]);
                    let flat2 = flatten_fiber(&chained[p1], &etas[p1..]);
                    let y = b.eval_unchecked(ctx, &gs[p1..], &flat2);
                    vec![x[0].mul(&y[0])]
                }),
            })
        }
        _ => Err(Error::Domain(
            "cup product needs a scalar factor or two fiber factors over one model".into(),
        )),
    }
}

/// Checks `s_i^* f = 0` on random degenerate tuples. Returns the verdict
/// and the largest residual seen.
pub fn check_normalized(
    f: &Cochain,
    group: &MatrixGroup,
    samples: usize,
    tol: f64,
    seed: u64,
) -> (bool, f64) {
    if f.p == 0 {
        return (true, 0.0);
    }
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let ctx = JetCtx::scalar();
    let mut worst = 0.0f64;
    for s in 0..samples {
        let base: Vec<JetMatrix> = (0..f.p - 1)
            .map(|_| JetMatrix::from_f64(&ctx, &group.random_point(&mut rng)))
            .collect();
        let insert = s % f.p;
        match &f.space {
            ValueSpace::Fiber { model } => {
                let xi: Vec<Jet> = (0..model.dim_c)
                    .map(|_| ctx.constant(rng.gen_range(-1.0..1.0)))
                    .collect();
                let etas: Vec<Vec<Jet>> = (0..f.p - 1)
                    .map(|_| {
                        (0..model.dim_e)
                            .map(|_| ctx.constant(rng.gen_range(-1.0..1.0)))
                            .collect()
                    })
                    .collect();
                let (xi2, gs2, etas2) =
                    nerve_degeneracy(model, &ctx, insert, &xi, &base, &etas);
                let flat = flatten_fiber(&xi2, &etas2);
                let v = f.eval_unchecked(&ctx, &gs2, &flat);
                worst = worst.max(v[0].max_abs());
            }
            _ => {
                let mut gs = base.clone();
                gs.insert(insert, group.identity(&ctx));
                let v = f.eval_unchecked(&ctx, &gs, &[]);
                for j in &v {
                    worst = worst.max(j.max_abs());
                }
            }
        }
    }
    (worst <= tol, worst)
}

/// Thread-safe running maximum used to report finite-difference error
/// estimates from inside pure evaluators.
#[derive(Clone, Default)]
pub struct ErrorMeter {
    bits: Arc<AtomicU64>,
}

impl ErrorMeter {
    pub fn new() -> Self {
        ErrorMeter {
            bits: Arc::new(AtomicU64::new(0)),
        }
    }

    pub fn record(&self, v: f64) {
        // Non-negative doubles order like their bit patterns.
        self.bits.fetch_max(v.abs().to_bits(), Ordering::Relaxed);
    }

    pub fn max(&self) -> f64 {
        f64::from_bits(self.bits.load(Ordering::Relaxed))
    }
}

#[derive(Clone)]
pub enum ProjectionMethod {
    /// Exact truncated-Taylor extraction.
    Jet,
    /// Central finite differences in the scaling parameter; `meter` collects
    /// a running Richardson error estimate over all evaluations.
    CentralDifference { step: f64, meter: ErrorMeter },
}

/// A homogeneity projection together with how it was computed.
pub struct Projection {
    pub cochain: Cochain,
    pub method: ProjectionMethod,
}

/// Projects a fiber cochain onto its degree-`k` homogeneous part in the
/// fiber coordinates. Uses an order-`k` scaling jet when the budget allows
/// (exact for polynomial fibers up to roundoff); otherwise falls back to
/// central finite differences and reports an error estimate.
pub fn hom_project_group(
    f: &Cochain,
    k: usize,
    max_jet_order: usize,
) -> Result<Projection, Error> {
    let model = match &f.space {
        ValueSpace::Fiber { model } => model.clone(),
        _ => {
            return Err(Error::Domain(
                "homogeneity projection needs fiber coordinates".into(),
            ))
        }
    };
    let label = format!("hom{}({})", k, f.label);
    let inner = f.clone();
    if k <= max_jet_order {
        let cochain = Cochain {
            p: f.p,
            space: ValueSpace::Fiber { model },
            label,
            eval: Arc::new(move |ctx, gs, flat| {
                let big = ctx.extend((k as u8).max(1));
                let lam = big.symbol(ctx.num_symbols());
                let gs2: Vec<JetMatrix> = gs.iter().map(|g| g.lift(&big)).collect();
                let flat2: Vec<Jet> = flat.iter().map(|x| x.lift(&big).mul(&lam)).collect();
                let v = inner.eval_unchecked(&big, &gs2, &flat2);
                v.iter().map(|j| j.extract_last(k as u8)).collect()
            }),
        };
        Ok(Projection {
            cochain,
            method: ProjectionMethod::Jet,
        })
    } else {
        let step = 0.5f64;
        let meter = ErrorMeter::new();
        let m2 = meter.clone();
        let kf = {
            let mut acc = 1.0;
            for j in 2..=k {
                acc *= j as f64;
            }
            acc
        };
        let cochain = Cochain {
            p: f.p,
            space: ValueSpace::Fiber { model },
            label,
            eval: Arc::new(move |ctx, gs, flat| {
                // k-th central difference at two steps plus Richardson.
                let stencil = |h: f64| -> Jet {
                    let mut acc = ctx.zero();
                    let mut binom = 1.0f64;
                    for j in 0..=k {
                        let lam = (k as f64 / 2.0 - j as f64) * h;
                        let scaled: Vec<Jet> = flat.iter().map(|x| x.scale(lam)).collect();
                        let v = inner.eval_unchecked(ctx, gs, &scaled);
                        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                        acc = acc.add(&v[0].scale(sign * binom));
                        binom *= (k - j) as f64 / (j + 1) as f64;
                    }
                    acc.scale(1.0 / (h.powi(k as i32) * kf))
                };
                let coarse = stencil(step);
                let fine = stencil(step / 2.0);
                let diff = fine.sub(&coarse).max_abs();
                m2.record(diff / 3.0);
                // Richardson extrapolation of the O(h²) stencil.
                vec![fine.scale(4.0 / 3.0).sub(&coarse.scale(1.0 / 3.0))]
            }),
        };
        Ok(Projection {
            cochain,
            method: ProjectionMethod::CentralDifference { step, meter },
        })
    }
}

/// An arrow of the dual-bundle groupoid `𝒱 = s*E* ⊕ t*C*` over the group.
#[derive(Clone, Debug)]
pub struct VbArrow {
    pub xi: Vec<Jet>,
    pub g: JetMatrix,
    pub eta: Vec<Jet>,
}

/// Groupoid structure maps of `𝒱` built from 2-term representation data.
pub struct VbStructure {
    pub model: Arc<Ruth2TermGrp>,
}

/// Structure maps of the dual-bundle groupoid over `C*`.
pub fn vb_structure(model: Arc<Ruth2TermGrp>) -> VbStructure {
    VbStructure { model }
}

impl VbStructure {
    pub fn target(&self, a: &VbArrow) -> Vec<Jet> {
        a.xi.clone()
    }

    pub fn source(&self, ctx: &JetCtx, a: &VbArrow) -> Vec<Jet> {
        let dc = (self.model.delta_c)(&a.g);
        let mut s = mat_t_apply(ctx, &dc, &a.xi);
        if self.model.dim_e > 0 {
            let corr = partial_t_apply(&self.model, ctx, &a.eta);
            for (x, c) in s.iter_mut().zip(corr.iter()) {
                *x = x.sub(c);
            }
        }
        s
    }

    pub fn unit(&self, ctx: &JetCtx, xi: &[Jet]) -> VbArrow {
        VbArrow {
            xi: xi.to_vec(),
            g: self.model.group.identity(ctx),
            eta: vec![ctx.zero(); self.model.dim_e],
        }
    }

    /// `(ξ1, g1, η1)·(ξ2, g2, η2) = (ξ1, g1g2, Ω* ξ1 + Δ^E* η1 + η2)`;
    /// assumes the pair is composable.
    pub fn mult(&self, ctx: &JetCtx, a: &VbArrow, b: &VbArrow) -> VbArrow {
        let g = a.g.mul(&b.g);
        let eta = if self.model.dim_e > 0 {
            let om = (self.model.omega2)(&a.g, &b.g);
            let de = (self.model.delta_e)(&b.g);
            let t1 = mat_t_apply(ctx, &om, &a.xi);
            let t2 = mat_t_apply(ctx, &de, &a.eta);
            t1.iter()
                .zip(t2.iter())
                .zip(b.eta.iter())
                .map(|((x, y), z)| x.add(y).add(z))
                .collect()
        } else {
            Vec::new()
        };
        VbArrow { xi: a.xi.clone(), g, eta }
    }

    pub fn inverse(&self, ctx: &JetCtx, a: &VbArrow) -> VbArrow {
        let xi = self.source(ctx, a);
        let g = a.g.inverse();
        let eta = if self.model.dim_e > 0 {
            let om = (self.model.omega2)(&a.g, &g);
            let de = (self.model.delta_e)(&g);
            let t1 = mat_t_apply(ctx, &om, &a.xi);
            let t2 = mat_t_apply(ctx, &de, &a.eta);
            t1.iter().zip(t2.iter()).map(|(x, y)| x.add(y).neg()).collect()
        } else {
            Vec::new()
        };
        VbArrow { xi, g, eta }
    }
}

/// Residual report for the linearity conditions singling out vector-bundle
/// cochains among all functions on the nerve.
#[derive(Debug, Clone)]
pub struct VbCochainReport {
    /// Largest value on tuples whose first arrow is a zero arrow.
    pub zero_arrow_max: f64,
    pub zero_arrow_ok: bool,
    /// Largest defect of invariance under left-composing the first arrow
    /// with a zero arrow.
    pub shift_max: f64,
    pub shift_ok: bool,
    /// Largest `δφ` value over the same samples.
    pub cocycle_max: f64,
    /// When the sample looks like a cocycle satisfying the first condition,
    /// the second must follow; records whether that implication held.
    pub implication_ok: bool,
}

/// Samples the two vector-bundle cochain conditions and the cocycle
/// implication between them.
pub fn is_vb_cochain(
    f: &Cochain,
    samples: usize,
    tol: f64,
    seed: u64,
) -> Result<VbCochainReport, Error> {
    let model = match &f.space {
        ValueSpace::Fiber { model } => model.clone(),
        _ => {
            return Err(Error::Domain(
                "vector-bundle conditions apply to fiber cochains".into(),
            ))
        }
    };
    if f.p == 0 {
        return Err(Error::Dim(
            "vector-bundle conditions need at least one slot".into(),
        ));
    }
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let ctx = JetCtx::scalar();
    let group = &model.group;
    let p = f.p;
    let delta_f = simplicial_delta(f);
    let mut zero_arrow_max = 0.0f64;
    let mut shift_max = 0.0f64;
    let mut cocycle_max = 0.0f64;
    for _ in 0..samples {
        let gs: Vec<JetMatrix> = (0..p)
            .map(|_| JetMatrix::from_f64(&ctx, &group.random_point(&mut rng)))
            .collect();
        let mut etas: Vec<Vec<Jet>> = (0..p)
            .map(|_| {
                (0..model.dim_e)
                    .map(|_| ctx.constant(rng.gen_range(-1.0..1.0)))
                    .collect()
            })
            .collect();
        let zero_xi: Vec<Jet> = vec![ctx.zero(); model.dim_c];

        // First arrow is the zero arrow over g_1: ξ = 0, η_1 = 0.
        etas[0] = vec![ctx.zero(); model.dim_e];
        let flat = flatten_fiber(&zero_xi, &etas);
        let v = f.eval_unchecked(&ctx, &gs, &flat);
        zero_arrow_max = zero_arrow_max.max(v[0].max_abs());

        // Left-composing the first arrow with a zero arrow over g_0 moves
        // g_1 to g_0·g_1 and fixes the fiber data; compare both sides.
        let g0 = JetMatrix::from_f64(&ctx, &group.random_point(&mut rng));
        etas[0] = (0..model.dim_e)
            .map(|_| ctx.constant(rng.gen_range(-1.0..1.0)))
            .collect();
        let flat = flatten_fiber(&zero_xi, &etas);
        let plain = f.eval_unchecked(&ctx, &gs, &flat);
        let mut shifted_gs = gs.clone();
        shifted_gs[0] = g0.mul(&gs[0]);
        let shifted = f.eval_unchecked(&ctx, &shifted_gs, &flat);
        shift_max = shift_max.max(plain[0].sub(&shifted[0]).max_abs());

        // Cocycle residual on a random (p+1)-tuple with full fiber data.
        let gs1: Vec<JetMatrix> = (0..p + 1)
            .map(|_| JetMatrix::from_f64(&ctx, &group.random_point(&mut rng)))
            .collect();
        let xi1: Vec<Jet> = (0..model.dim_c)
            .map(|_| ctx.constant(rng.gen_range(-1.0..1.0)))
            .collect();
        let etas1: Vec<Vec<Jet>> = (0..p + 1)
            .map(|_| {
                (0..model.dim_e)
                    .map(|_| ctx.constant(rng.gen_range(-1.0..1.0)))
                    .collect()
            })
            .collect();
        let flat1 = flatten_fiber(&xi1, &etas1);
        let dv = delta_f.eval_unchecked(&ctx, &gs1, &flat1);
        cocycle_max = cocycle_max.max(dv[0].max_abs());
    }
    let zero_arrow_ok = zero_arrow_max <= tol;
    let shift_ok = shift_max <= tol;
    let premise = cocycle_max <= tol && zero_arrow_ok;
    Ok(VbCochainReport {
        zero_arrow_max,
        zero_arrow_ok,
        shift_max,
        shift_ok,
        cocycle_max,
        implication_ok: !premise || shift_ok,
    })
}

/// The splitting `ξ ↦ (ξ, h, 0)`.
pub fn zero_splitting(dim_e: usize) -> Splitting {
    Arc::new(move |h: &JetMatrix, _xi: &[Jet]| vec![h.ctx().zero(); dim_e])
}

/// Averaging homotopy over a compact group: integrates the last slot away
/// against Haar measure through a splitting of the bundle projection. On
/// cocycles, `δ(κφ) = (-1)^p φ` up to quadrature error, independently of
/// the splitting.
pub fn kappa(
    f: &Cochain,
    quad: &HaarQuadrature,
    splitting: &Splitting,
) -> Result<Cochain, Error> {
    let model = match &f.space {
        ValueSpace::Fiber { model } => model.clone(),
        _ => {
            return Err(Error::Domain(
                "averaging homotopy applies to fiber cochains".into(),
            ))
        }
    };
    if f.p < 2 {
        return Err(Error::Dim(
            "averaging homotopy needs simplicial degree at least 2".into(),
        ));
    }
    if !model.group.compact {
        return Err(Error::Domain(format!(
            "averaging homotopy needs a compact group, got {}",
            model.group.name
        )));
    }
    let p = f.p;
    let inner = f.clone();
    let nodes: Vec<Vec<Vec<f64>>> = quad.nodes.clone();
    let weights = quad.weights.clone();
    let splitting = splitting.clone();
    let label = format!("kappa({})", f.label);
    Ok(Cochain {
        p: p - 1,
        space: ValueSpace::Fiber {
            model: model.clone(),
        },
        label,
        eval: Arc::new(move |ctx, gs, flat| {
            let (xi, etas) = split_fiber(&model, p - 1, flat);
            let chained = chained_fibers(&model, ctx, &xi, gs, &etas);
            let last_source = &chained[p - 1];
            let terms: Vec<Jet> = nodes
                .iter()
                .zip(weights.iter())
                .map(|(node, &w)| {
                    let h = JetMatrix::from_f64(ctx, node);
                    let eta_h = splitting(&h, last_source);
                    debug_assert_eq!(eta_h.len(), model.dim_e);
                    let mut gs2 = gs.to_vec();
                    gs2.push(h);
                    let mut etas2 = etas.clone();
                    etas2.push(eta_h);
                    let flat2 = flatten_fiber(&xi, &etas2);
                    inner.eval_unchecked(ctx, &gs2, &flat2)[0].scale(w)
                })
                .collect();
            vec![pairwise_sum(ctx, terms)]
        }),
    })
}

/// The groupoid `𝔊_q`: group elements decorated with `q` right-trivialized
/// tangent vectors and a coefficient fiber, multiplying componentwise.
pub struct TangentGroup {
    pub base: MatrixGroup,
    pub q: usize,
    pub dim_c: usize,
    pub action: QuasiAction,
}

/// A point of `𝔊_q`: `g` with tangents `x_i·g` and target fiber `ξ`.
#[derive(Clone, Debug)]
pub struct TangentPoint {
    pub g: JetMatrix,
    pub tangents: Vec<Vec<Jet>>,
    pub xi: Vec<Jet>,
}

/// Builds `𝔊_q` over a catalog group; `q ≤ 2`.
pub fn tangent_group(
    base: &MatrixGroup,
    q: usize,
    dim_c: usize,
    action: QuasiAction,
) -> Result<TangentGroup, Error> {
    if q > 2 {
        return Err(Error::Domain(format!(
            "tangent multiplicity {q} exceeds the supported bound 2"
        )));
    }
    Ok(TangentGroup {
        base: base.clone(),
        q,
        dim_c,
        action,
    })
}

impl TangentGroup {
    pub fn unit(&self, ctx: &JetCtx, xi: &[Jet]) -> TangentPoint {
        TangentPoint {
            g: self.base.identity(ctx),
            tangents: vec![vec![ctx.zero(); self.base.algebra.n]; self.q],
            xi: xi.to_vec(),
        }
    }

    /// Source fiber `Δ_g^* ξ` of a point.
    pub fn source_fiber(&self, ctx: &JetCtx, a: &TangentPoint) -> Vec<Jet> {
        mat_t_apply(ctx, &(self.action)(&a.g), &a.xi)
    }

    /// Componentwise product: matrices multiply, right-trivialized tangents
    /// compose as `x + Ad_{g1} y`, fibers keep the first target.
    pub fn mult(&self, _ctx: &JetCtx, a: &TangentPoint, b: &TangentPoint) -> TangentPoint {
        let ad = self.base.ad_matrix(&a.g);
        let tangents = (0..self.q)
            .map(|i| {
                let moved = ad.apply(&b.tangents[i]);
                a.tangents[i]
                    .iter()
                    .zip(moved.iter())
                    .map(|(x, y)| x.add(y))
                    .collect()
            })
            .collect();
        TangentPoint {
            g: a.g.mul(&b.g),
            tangents,
            xi: a.xi.clone(),
        }
    }

    pub fn inverse(&self, ctx: &JetCtx, a: &TangentPoint) -> TangentPoint {
        let gi = a.g.inverse();
        let ad = self.base.ad_matrix(&gi);
        let tangents = (0..self.q)
            .map(|i| ad.apply(&a.tangents[i]).iter().map(|x| x.neg()).collect())
            .collect();
        let xi = self.source_fiber(ctx, a);
        TangentPoint {
            g: gi,
            tangents,
            xi,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const CATALOG: [&str; 7] = [
        "torus:1",
        "torus:2",
        "torus:3",
        "su2",
        "so3",
        "heis3",
        "ut:3",
    ];

    fn norm_diff(a: &JetMatrix, b: &JetMatrix) -> f64 {
        a.sub(b).max_abs()
    }

    #[test]
    fn catalog_parses_and_rejects() {
        for name in CATALOG {
            let g = catalog_group(name).unwrap();
            assert_eq!(g.name, name);
            assert_eq!(g.basis.len(), g.algebra.n);
        }
        assert_eq!(catalog_group("torus:2").unwrap().size, 4);
        assert_eq!(catalog_group("su2").unwrap().size, 4);
        assert!(catalog_group("su2").unwrap().compact);
        assert!(!catalog_group("heis3").unwrap().compact);
        assert!(!catalog_group("ut:4").unwrap().compact);
        assert!(catalog_group("torus:0").is_err());
        assert!(catalog_group("ut:1").is_err());
        assert!(catalog_group("sl2-group").is_err());
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let ctx = JetCtx::scalar();
        for name in CATALOG {
            let g = catalog_group(name).unwrap();
            let z = vec![ctx.zero(); g.algebra.n];
            assert!(norm_diff(&g.exp(&ctx, &z), &g.identity(&ctx)) < 1e-15, "{name}");
        }
    }

    #[test]
    fn exp_one_parameter_property() {
        let ctx = JetCtx::scalar();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for name in CATALOG {
            let g = catalog_group(name).unwrap();
            for _ in 0..20 {
                let u = g.random_coeffs(&mut rng, 1.0);
                let s = rng.gen_range(-1.5..1.5);
                let t = rng.gen_range(-1.5..1.5);
                let us: Vec<Jet> = u.iter().map(|&x| ctx.constant(x * s)).collect();
                let ut: Vec<Jet> = u.iter().map(|&x| ctx.constant(x * t)).collect();
                let ust: Vec<Jet> = u.iter().map(|&x| ctx.constant(x * (s + t))).collect();
                let lhs = g.exp(&ctx, &ust);
                let rhs = g.exp(&ctx, &us).mul(&g.exp(&ctx, &ut));
                assert!(norm_diff(&lhs, &rhs) < 1e-12, "{name}");
            }
        }
    }

    #[test]
    fn exp_matches_series_oracle() {
        let ctx = JetCtx::scalar();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for name in CATALOG {
            let g = catalog_group(name).unwrap();
            for _ in 0..10 {
                let u: Vec<Jet> = g
                    .random_coeffs(&mut rng, 1.3)
                    .iter()
                    .map(|&x| ctx.constant(x))
                    .collect();
                let closed = g.exp(&ctx, &u);
                let series = g.algebra_matrix(&ctx, &u).expm();
                assert!(norm_diff(&closed, &series) < 1e-12, "{name}");
            }
        }
    }

    #[test]
    fn commutator_jets_reproduce_structure_constants() {
        for name in CATALOG {
            let g = catalog_group(name).unwrap();
            let n = g.algebra.n;
            let ctx = JetCtx::first_order(2);
            for i in 0..n {
                for j in 0..n {
                    let mut ui = vec![ctx.zero(); n];
                    ui[i] = ctx.symbol(0);
                    let mut vj = vec![ctx.zero(); n];
                    vj[j] = ctx.symbol(1);
                    let a = g.exp(&ctx, &ui);
                    let b = g.exp(&ctx, &vj);
                    let comm = a.mul(&b).mul(&a.inverse()).mul(&b.inverse());
                    let w: Vec<Vec<f64>> = (0..g.size)
                        .map(|r| (0..g.size).map(|c| comm.at(r, c).mixed(&[0, 1])).collect())
                        .collect();
                    let coeffs = g.expand_f64(&w);
                    for (k, got) in coeffs.iter().enumerate() {
                        let want = g.algebra.structure_constant(i, j, k).approx_f64();
                        assert!(
                            (got - want).abs() < 1e-9,
                            "{name}: [e{}, e{}] -> e{} got {got} want {want}",
                            i + 1,
                            j + 1,
                            k + 1
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn inverse_and_associativity() {
        let ctx = JetCtx::scalar();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for name in CATALOG {
            let g = catalog_group(name).unwrap();
            for _ in 0..10 {
                let a = JetMatrix::from_f64(&ctx, &g.random_point(&mut rng));
                let b = JetMatrix::from_f64(&ctx, &g.random_point(&mut rng));
                let c = JetMatrix::from_f64(&ctx, &g.random_point(&mut rng));
                assert!(norm_diff(&g.mult(&a, &g.inv(&a)), &g.identity(&ctx)) < 1e-12);
                let lhs = g.mult(&g.mult(&a, &b), &c);
                let rhs = g.mult(&a, &g.mult(&b, &c));
                assert!(norm_diff(&lhs, &rhs) < 1e-12, "{name}");
            }
        }
    }

    #[test]
    fn adjoint_matrix_matches_bracket_derivative() {
        // d/dt Ad_{exp(tu)} v |_0 = [u, v].
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for name in ["su2", "heis3", "torus:2"] {
            let g = catalog_group(name).unwrap();
            let n = g.algebra.n;
            let ctx = JetCtx::first_order(1);
            let u = g.random_coeffs(&mut rng, 1.0);
            let uj: Vec<Jet> = u.iter().map(|&x| ctx.symbol(0).scale(x)).collect();
            let ad = g.ad_matrix(&g.exp(&ctx, &uj));
            for j in 0..n {
                for k in 0..n {
                    // [u, e_j]_k = Σ_i u_i c_{ij}^k.
                    let want: f64 = (0..n)
                        .map(|i| u[i] * g.algebra.structure_constant(i, j, k).approx_f64())
                        .sum();
                    let got = ad.at(k, j).mixed(&[0]);
                    assert!((got - want).abs() < 1e-9, "{name}");
                }
            }
        }
    }

    #[test]
    fn torus_haar_equal_weights_at_roots_of_unity() {
        let g = catalog_group("torus:1").unwrap();
        let q = haar(&g, 32).unwrap();
        assert_eq!(q.len(), 32);
        for w in &q.weights {
            assert!((w - 1.0 / 32.0).abs() < 1e-15);
        }
        let ctx = JetCtx::scalar();
        for node in &q.nodes {
            let m = JetMatrix::from_f64(&ctx, node);
            let mut acc = g.identity(&ctx);
            for _ in 0..32 {
                acc = acc.mul(&m);
            }
            assert!(norm_diff(&acc, &g.identity(&ctx)) < 1e-12);
        }
    }

    #[test]
    fn torus2_quadrature_exact_on_band_limited() {
        let g = catalog_group("torus:2").unwrap();
        let q = haar(&g, 8).unwrap();
        let ctx = JetCtx::scalar();
        // cos²θ₁ integrates to 1/2, cosθ₁sinθ₂ to 0, cos(θ₁+θ₂)... to 0.
        let int1 = q
            .integrate(&ctx, |m| m.at(0, 0).mul(m.at(0, 0)))
            .value();
        assert!((int1 - 0.5).abs() < 1e-13);
        let int2 = q
            .integrate(&ctx, |m| m.at(0, 0).mul(m.at(3, 2)))
            .value();
        assert!(int2.abs() < 1e-13);
        let weight_sum: f64 = q.weights.iter().sum();
        assert!((weight_sum - 1.0).abs() < 1e-13);
    }

    #[test]
    fn su2_quadrature_character_integrals() {
        let g = catalog_group("su2").unwrap();
        // tr(g) = 4q₀ in the quaternion picture, and ∫ q₀² dμ = 1/4, so
        // ∫ tr² dμ = 4 (the defining character has norm one: ∫|2q₀|² = 1,
        // doubled twice by the real 4x4 realization).
        let mut last = f64::INFINITY;
        for res in [4, 8, 16] {
            let q = haar(&g, res).unwrap();
            let sum: f64 = q.weights.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(q.weights.iter().all(|&w| w > 0.0));
            let ctx = JetCtx::scalar();
            let int = q
                .integrate(&ctx, |m| {
                    let t = m.trace();
                    t.mul(&t)
                })
                .value();
            let err = (int - 4.0).abs();
            assert!(err < last + 1e-13, "residual should not grow: {err} vs {last}");
            last = err;
        }
        assert!(last < 1e-10, "residual at resolution 16: {last}");
    }

    #[test]
    fn so3_pushforward_character_integrals() {
        let g = catalog_group("so3").unwrap();
        let q = haar(&g, 12).unwrap();
        let ctx = JetCtx::scalar();
        // ∫ tr = 0 (no trivial summand in the standard rep) and ∫ tr² = 1.
        let int1 = q.integrate(&ctx, |m| m.trace()).value();
        let int2 = q
            .integrate(&ctx, |m| {
                let t = m.trace();
                t.mul(&t)
            })
            .value();
        assert!(int1.abs() < 1e-6, "got {int1}");
        assert!((int2 - 1.0).abs() < 1e-6, "got {int2}");
        // Nodes are honest rotations.
        for node in q.nodes.iter().step_by(97) {
            let m = JetMatrix::from_f64(&ctx, node);
            assert!(norm_diff(&m.mul(&m.transpose()), &g.identity(&ctx)) < 1e-12);
        }
    }

    #[test]
    fn haar_rejects_noncompact_and_zero_resolution() {
        let h = catalog_group("heis3").unwrap();
        assert!(matches!(haar(&h, 8), Err(Error::Domain(_))));
        let t = catalog_group("torus:1").unwrap();
        assert!(haar(&t, 0).is_err());
    }

    #[test]
    fn left_invariance_within_scheme_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for (name, res) in [("torus:2", 8), ("su2", 8), ("so3", 8)] {
            let g = catalog_group(name).unwrap();
            let q = haar(&g, res).unwrap();
            let shifts: Vec<Vec<Vec<f64>>> =
                (0..4).map(|_| g.random_point(&mut rng)).collect();
            let resid = left_invariance_residual(&q, &shifts, |m| {
                m.at(0, 0).mul(m.at(1, 1)).add(&m.at(0, 1).scale(0.3))
            });
            assert!(resid <= q.tolerance, "{name}: {resid} > {}", q.tolerance);
        }
    }

    fn torus_sin_cochain() -> (MatrixGroup, Cochain) {
        let g = catalog_group("torus:1").unwrap();
        let gc = g.clone();
        let f = Cochain::real(1, "sin(theta)", move |_, gs| {
            gc.torus_angles(&gs[0]).unwrap()[0].sin()
        });
        (g, f)
    }

    #[test]
    fn torus_sin_delta_formula() {
        let (_, f) = torus_sin_cochain();
        let df = simplicial_delta(&f);
        let (t1, t2) = (0.7, -1.3);
        let g = catalog_group("torus:1").unwrap();
        let v = df
            .eval_f64(&[g.exp_f64(&[t1]), g.exp_f64(&[t2])], &[])
            .unwrap();
        let want = t2.sin() - (t1 + t2).sin() + t1.sin();
        assert!((v[0] - want).abs() < 1e-14);
    }

    #[test]
    fn delta_squares_to_zero_real() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let ctx = JetCtx::scalar();

        let (g, f) = torus_sin_cochain();
        let ddf = simplicial_delta(&simplicial_delta(&f));
        for _ in 0..50 {
            let gs: Vec<JetMatrix> = (0..3)
                .map(|_| JetMatrix::from_f64(&ctx, &g.random_point(&mut rng)))
                .collect();
            assert!(ddf.eval_unchecked(&ctx, &gs, &[])[0].max_abs() < 1e-12);
        }

        let su2 = catalog_group("su2").unwrap();
        let f2 = Cochain::real(2, "trace pair", |_, gs| {
            let a = gs[0].trace().add(&gs[0].ctx().constant(-4.0));
            let b = gs[1].trace().add(&gs[1].ctx().constant(-4.0));
            a.mul(&b)
        });
        let ddf2 = simplicial_delta(&simplicial_delta(&f2));
        for _ in 0..20 {
            let gs: Vec<JetMatrix> = (0..4)
                .map(|_| JetMatrix::from_f64(&ctx, &su2.random_point(&mut rng)))
                .collect();
            assert!(ddf2.eval_unchecked(&ctx, &gs, &[])[0].max_abs() < 1e-12);
        }

        let h = catalog_group("heis3").unwrap();
        let f3 = Cochain::real(1, "corner entry", |_, gs| gs[0].at(0, 2).clone());
        let ddf3 = simplicial_delta(&simplicial_delta(&f3));
        for _ in 0..20 {
            let gs: Vec<JetMatrix> = (0..3)
                .map(|_| JetMatrix::from_f64(&ctx, &h.random_point(&mut rng)))
                .collect();
            assert!(ddf3.eval_unchecked(&ctx, &gs, &[])[0].max_abs() < 1e-12);
        }
    }

    fn rotation_model() -> Arc<Ruth2TermGrp> {
        // T¹ acting on ℝ² by rotation: the weight-one action groupoid.
        let g = catalog_group("torus:1").unwrap();
        let action = torus_weights_action(&g, &[vec![1]]);
        Arc::new(Ruth2TermGrp::action(g, 2, action))
    }

    fn coeff_mu_cochain(action: QuasiAction) -> Cochain {
        // Band-limited C-valued 1-cochain, normalized (vanishes at e).
        let g = catalog_group("torus:1").unwrap();
        Cochain::coeff_valued(1, 2, action, "mu", move |ctx, gs| {
            let th = g.torus_angles(&gs[0]).unwrap().remove(0);
            vec![
                th.sin(),
                ctx.constant(1.0).sub(&th.cos()),
            ]
        })
    }

    #[test]
    fn twisted_delta_p0_formula_and_square() {
        let model = rotation_model();
        let action = model.delta_c.clone();
        let g = catalog_group("torus:1").unwrap();
        // p = 0: δφ(g) = Δ_g φ - φ.
        let phi = Cochain::coeff_valued(0, 2, action.clone(), "const", |ctx, _| {
            vec![ctx.constant(0.4), ctx.constant(-1.1)]
        });
        let dphi = simplicial_delta(&phi);
        let th = 0.9f64;
        let v = dphi.eval_f64(&[g.exp_f64(&[th])], &[]).unwrap();
        let want = [
            0.4 * th.cos() + 1.1 * th.sin() - 0.4,
            0.4 * th.sin() - 1.1 * th.cos() + 1.1,
        ];
        assert!((v[0] - want[0]).abs() < 1e-14 && (v[1] - want[1]).abs() < 1e-14);

        let mu = coeff_mu_cochain(action);
        let ddmu = simplicial_delta(&simplicial_delta(&mu));
        let ctx = JetCtx::scalar();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let gs: Vec<JetMatrix> = (0..3)
                .map(|_| JetMatrix::from_f64(&ctx, &g.random_point(&mut rng)))
                .collect();
            for j in ddmu.eval_unchecked(&ctx, &gs, &[]) {
                assert!(j.max_abs() < 1e-13);
            }
        }
    }

    fn pair_cochain(model: &Arc<Ruth2TermGrp>, mu: &Cochain) -> Cochain {
        // φ(ξ, g) = ⟨ξ, μ(g)⟩: the linear fiber cochain attached to μ.
        let mu = mu.clone();
        Cochain::fiber(1, model.clone(), "<xi, mu>", move |ctx, gs, fib| {
            let v = mu.eval_unchecked(ctx, gs, &[]);
            let mut acc = ctx.zero();
            for (x, m) in fib.iter().zip(v.iter()) {
                acc = acc.add(&x.mul(m));
            }
            acc
        })
    }

    #[test]
    fn fiber_delta_matches_twisted_delta_under_pairing() {
        let model = rotation_model();
        let mu = coeff_mu_cochain(model.delta_c.clone());
        let phi = pair_cochain(&model, &mu);
        let dphi = simplicial_delta(&phi);
        let dmu = simplicial_delta(&mu);
        let ctx = JetCtx::scalar();
        let g = catalog_group("torus:1").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..40 {
            let gs: Vec<JetMatrix> = (0..2)
                .map(|_| JetMatrix::from_f64(&ctx, &g.random_point(&mut rng)))
                .collect();
            let xi = [
                ctx.constant(rng.gen_range(-1.0..1.0)),
                ctx.constant(rng.gen_range(-1.0..1.0)),
            ];
            let lhs = dphi.eval_unchecked(&ctx, &gs, &xi)[0].clone();
            let muv = dmu.eval_unchecked(&ctx, &gs, &[]);
            let mut rhs = ctx.zero();
            for (x, m) in xi.iter().zip(muv.iter()) {
                rhs = rhs.add(&x.mul(m));
            }
            assert!(lhs.sub(&rhs).max_abs() < 1e-13);
        }
    }

    fn gauge_sigma(th: &Jet, a: f64, b: f64) -> JetMatrix {
        // σ_θ = sin θ · A + (1 - cos θ) · B with A = a·I, B = b·J.
        let ctx = th.ctx().clone();
        let s = th.sin();
        let v = ctx.constant(1.0).sub(&th.cos());
        JetMatrix::from_fn(2, 2, |r, c| match (r, c) {
            (0, 0) => s.scale(a),
            (1, 1) => s.scale(a),
            (0, 1) => v.scale(-b),
            (1, 0) => v.scale(b),
            _ => unreachable!(),
        })
    }

    /// A torus model with nonzero `Ω`, obtained by gauging the rotation
    /// action on E = C = ℝ² (with ∂ = id) by a pointwise shear.
    fn gauged_model() -> Arc<Ruth2TermGrp> {
        let g = catalog_group("torus:1").unwrap();
        let rot = torus_weights_action(&g, &[vec![1]]);
        let ga = g.clone();
        let rot_d: QuasiAction = {
            let rot = rot.clone();
            let ga = ga.clone();
            Arc::new(move |m: &JetMatrix| {
                let th = ga.torus_angles(m).unwrap().remove(0);
                rot(m).add(&gauge_sigma(&th, 0.35, -0.2))
            })
        };
        let omega: crate::ruth::PairAction = {
            let rot = rot.clone();
            let ga = ga.clone();
            Arc::new(move |g1: &JetMatrix, g2: &JetMatrix| {
                let th1 = ga.torus_angles(g1).unwrap().remove(0);
                let th2 = ga.torus_angles(g2).unwrap().remove(0);
                let th12 = th1.add(&th2);
                let s1 = gauge_sigma(&th1, 0.35, -0.2);
                let s2 = gauge_sigma(&th2, 0.35, -0.2);
                let s12 = gauge_sigma(&th12, 0.35, -0.2);
                // σ_{g1g2} - Δ̊_{g1}σ_{g2} - σ_{g1}Δ̊_{g2} - σ_{g1}∂σ_{g2}
                s12.sub(&rot(g1).mul(&s2))
                    .sub(&s1.mul(&rot(g2)))
                    .sub(&s1.mul(&s2))
            })
        };
        let partial = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        Arc::new(
            Ruth2TermGrp::new(g, 2, 2, rot_d.clone(), rot_d, partial, omega).unwrap(),
        )
    }

    fn random_arrow(
        model: &Arc<Ruth2TermGrp>,
        ctx: &JetCtx,
        rng: &mut ChaCha8Rng,
        xi: Vec<Jet>,
    ) -> VbArrow {
        VbArrow {
            xi,
            g: JetMatrix::from_f64(ctx, &model.group.random_point(rng)),
            eta: (0..model.dim_e)
                .map(|_| ctx.constant(rng.gen_range(-1.0..1.0)))
                .collect(),
        }
    }

    #[test]
    fn vb_structure_groupoid_axioms() {
        let model = gauged_model();
        assert!(model.unit_law_residual(&[]) < 1e-12);
        let vb = vb_structure(model.clone());
        let ctx = JetCtx::scalar();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..60 {
            let xi: Vec<Jet> = (0..2)
                .map(|_| ctx.constant(rng.gen_range(-1.0..1.0)))
                .collect();
            let a = random_arrow(&model, &ctx, &mut rng, xi);
            let b = random_arrow(&model, &ctx, &mut rng, vb.source(&ctx, &a));
            let c = random_arrow(&model, &ctx, &mut rng, vb.source(&ctx, &b));
            // Associativity.
            let ab_c = vb.mult(&ctx, &vb.mult(&ctx, &a, &b), &c);
            let a_bc = vb.mult(&ctx, &a, &vb.mult(&ctx, &b, &c));
            assert!(norm_diff(&ab_c.g, &a_bc.g) < 1e-10);
            for (x, y) in ab_c.eta.iter().zip(a_bc.eta.iter()) {
                assert!(x.sub(y).max_abs() < 1e-10);
            }
            // Source of a product is the source of the second factor.
            let s_ab = vb.source(&ctx, &vb.mult(&ctx, &a, &b));
            for (x, y) in s_ab.iter().zip(vb.source(&ctx, &b).iter()) {
                assert!(x.sub(y).max_abs() < 1e-10);
            }
            // Unit laws, exact to roundoff.
            let unit_t = vb.unit(&ctx, &vb.target(&a));
            let left = vb.mult(&ctx, &unit_t, &a);
            assert!(norm_diff(&left.g, &a.g) < 1e-12);
            for (x, y) in left.eta.iter().zip(a.eta.iter()) {
                assert!(x.sub(y).max_abs() < 1e-12);
            }
            let unit_s = vb.unit(&ctx, &vb.source(&ctx, &a));
            let right = vb.mult(&ctx, &a, &unit_s);
            assert!(norm_diff(&right.g, &a.g) < 1e-12);
            for (x, y) in right.eta.iter().zip(a.eta.iter()) {
                assert!(x.sub(y).max_abs() < 1e-12);
            }
            // Inverses on both sides.
            let ai = vb.inverse(&ctx, &a);
            let prod = vb.mult(&ctx, &a, &ai);
            assert!(norm_diff(&prod.g, &model.group.identity(&ctx)) < 1e-10);
            for x in &prod.eta {
                assert!(x.max_abs() < 1e-10);
            }
            let prod2 = vb.mult(&ctx, &ai, &a);
            for x in &prod2.eta {
                assert!(x.max_abs() < 1e-10);
            }
            for (x, y) in prod2.xi.iter().zip(vb.source(&ctx, &a).iter()) {
                assert!(x.sub(y).max_abs() < 1e-10);
            }
        }
    }

    #[test]
    fn vb_structure_reduces_to_action_groupoid() {
        let model = rotation_model();
        let vb = vb_structure(model.clone());
        let ctx = JetCtx::scalar();
        let g = catalog_group("torus:1").unwrap();
        let th = 1.1f64;
        let xi = vec![ctx.constant(0.3), ctx.constant(-0.8)];
        let a = VbArrow {
            xi: xi.clone(),
            g: JetMatrix::from_f64(&ctx, &g.exp_f64(&[th])),
            eta: vec![],
        };
        let s = vb.source(&ctx, &a);
        // Source is the pulled-back covector Δ_g^T ξ, nothing else.
        let dc = (model.delta_c)(&a.g);
        let manual = mat_t_apply(&ctx, &dc, &xi);
        for (x, y) in s.iter().zip(manual.iter()) {
            assert!(x.sub(y).max_abs() < 1e-15);
        }
        // Multiplication keeps the first target and multiplies the base.
        let b = VbArrow {
            xi: s.clone(),
            g: JetMatrix::from_f64(&ctx, &g.exp_f64(&[0.4])),
            eta: vec![],
        };
        let ab = vb.mult(&ctx, &a, &b);
        assert!(ab.eta.is_empty());
        for (x, y) in ab.xi.iter().zip(xi.iter()) {
            assert!(x.sub(y).max_abs() < 1e-15);
        }
    }

    #[test]
    fn delta_squares_to_zero_fiber_with_eta() {
        let model = gauged_model();
        let phi = Cochain::fiber(1, model.clone(), "mixed", |_, gs, fib| {
            // Linear in the fiber, trig in the base; no normalization is
            // needed for the simplicial identity.
            let th = Jet::atan2(gs[0].at(1, 0), gs[0].at(0, 0));
            fib[0]
                .mul(&th.sin())
                .add(&fib[1].scale(0.7))
                .add(&fib[2].mul(&th.cos()))
                .add(&fib[3].scale(-0.2))
        });
        let ddphi = simplicial_delta(&simplicial_delta(&phi));
        let ctx = JetCtx::scalar();
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..40 {
            let gs: Vec<JetMatrix> = (0..3)
                .map(|_| JetMatrix::from_f64(&ctx, &model.group.random_point(&mut rng)))
                .collect();
            let flat: Vec<Jet> = (0..model.dim_c + 3 * model.dim_e)
                .map(|_| ctx.constant(rng.gen_range(-1.0..1.0)))
                .collect();
            assert!(ddphi.eval_unchecked(&ctx, &gs, &flat)[0].max_abs() < 1e-12);
        }
    }

    #[test]
    fn cup_leibniz_and_unit() {
        let (g, f1) = torus_sin_cochain();
        let gc = g.clone();
        let f2 = Cochain::real(1, "cos(theta)-1", move |ctx, gs| {
            gc.torus_angles(&gs[0]).unwrap()[0]
                .cos()
                .add(&ctx.constant(-1.0))
        });
        let prod = cup(&f1, &f2).unwrap();
        let lhs = simplicial_delta(&prod);
        let df1 = simplicial_delta(&f1);
        let df2 = simplicial_delta(&f2);
        let t1 = cup(&df1, &f2).unwrap();
        let t2 = cup(&f1, &df2).unwrap();
        let ctx = JetCtx::scalar();
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        for _ in 0..40 {
            let gs: Vec<JetMatrix> = (0..3)
                .map(|_| JetMatrix::from_f64(&ctx, &g.random_point(&mut rng)))
                .collect();
            let l = lhs.eval_unchecked(&ctx, &gs, &[])[0].clone();
            let a = t1.eval_unchecked(&ctx, &gs, &[])[0].clone();
            let b = t2.eval_unchecked(&ctx, &gs, &[])[0].clone();
            // Leibniz with the sign of the first factor's degree.
            let want = a.sub(&b);
            assert!(l.sub(&want).max_abs() < 1e-10);
        }
        // Cup with the constant-one 0-cochain is the identity.
        let one = Cochain::real(0, "1", |ctx, _| ctx.constant(1.0));
        let same = cup(&f1, &one).unwrap();
        let gs = [JetMatrix::from_f64(&ctx, &g.exp_f64(&[0.8]))];
        let l = same.eval_unchecked(&ctx, &gs, &[])[0].clone();
        let r = f1.eval_unchecked(&ctx, &gs, &[])[0].clone();
        assert!(l.sub(&r).max_abs() < 1e-15);
    }

    #[test]
    fn normalization_check_classifies() {
        let (g, f) = torus_sin_cochain();
        let (ok, worst) = check_normalized(&f, &g, 64, 1e-12, 1);
        assert!(ok, "residual {worst}");
        let delta_ok = simplicial_delta(&f);
        let (ok2, _) = check_normalized(&delta_ok, &g, 64, 1e-12, 2);
        assert!(ok2, "the differential preserves normalization");
        let bad = Cochain::real(1, "constant", |ctx, _| ctx.constant(1.0));
        let (ok3, worst3) = check_normalized(&bad, &g, 16, 1e-12, 3);
        assert!(!ok3 && (worst3 - 1.0).abs() < 1e-15);
    }

    fn poly_fiber_cochain(model: &Arc<Ruth2TermGrp>) -> Cochain {
        Cochain::fiber(1, model.clone(), "poly", |_, gs, fib| {
            let th = Jet::atan2(gs[0].at(1, 0), gs[0].at(0, 0));
            fib[0].mul(&fib[0]).mul(&th.sin()).add(&fib[1].mul(&th.cos()))
        })
    }

    #[test]
    fn hom_project_extracts_polynomial_degrees() {
        let model = rotation_model();
        let f = poly_fiber_cochain(&model);
        let g = catalog_group("torus:1").unwrap();
        let gm = g.exp_f64(&[0.6]);
        let xi = [0.9, -0.4];
        let p2 = hom_project_group(&f, 2, 6).unwrap();
        assert!(matches!(p2.method, ProjectionMethod::Jet));
        let v2 = p2.cochain.eval_f64(&[gm.clone()], &xi).unwrap()[0];
        assert!((v2 - 0.9 * 0.9 * 0.6f64.sin()).abs() < 1e-14);
        let p1 = hom_project_group(&f, 1, 6).unwrap();
        let v1 = p1.cochain.eval_f64(&[gm.clone()], &xi).unwrap()[0];
        assert!((v1 - (-0.4) * 0.6f64.cos()).abs() < 1e-14);
        let p0 = hom_project_group(&f, 0, 6).unwrap();
        let v0 = p0.cochain.eval_f64(&[gm.clone()], &xi).unwrap()[0];
        assert!(v0.abs() < 1e-14);
        // Homogeneity under fiber scaling at λ = 0.5 and 2.
        for lam in [0.5, 2.0] {
            let scaled = [xi[0] * lam, xi[1] * lam];
            let vs = p2.cochain.eval_f64(&[gm.clone()], &scaled).unwrap()[0];
            assert!((vs - lam * lam * v2).abs() < 1e-13);
        }
        // Idempotence.
        let p22 = hom_project_group(&p2.cochain, 2, 6).unwrap();
        let v22 = p22.cochain.eval_f64(&[gm], &xi).unwrap()[0];
        assert!((v22 - v2).abs() < 1e-14);
    }

    #[test]
    fn hom_project_commutes_with_delta() {
        let model = rotation_model();
        let f = poly_fiber_cochain(&model);
        let a = simplicial_delta(&hom_project_group(&f, 2, 6).unwrap().cochain);
        let b = hom_project_group(&simplicial_delta(&f), 2, 6).unwrap().cochain;
        let ctx = JetCtx::scalar();
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for _ in 0..30 {
            let gs: Vec<JetMatrix> = (0..2)
                .map(|_| JetMatrix::from_f64(&ctx, &model.group.random_point(&mut rng)))
                .collect();
            let flat: Vec<Jet> = (0..2)
                .map(|_| ctx.constant(rng.gen_range(-1.0..1.0)))
                .collect();
            let l = a.eval_unchecked(&ctx, &gs, &flat)[0].clone();
            let r = b.eval_unchecked(&ctx, &gs, &flat)[0].clone();
            assert!(l.sub(&r).max_abs() < 1e-12);
        }
    }

    #[test]
    fn hom_project_fd_fallback_reports_error() {
        let model = rotation_model();
        let f = Cochain::fiber(1, model.clone(), "nonpoly", |_, gs, fib| {
            let th = Jet::atan2(gs[0].at(1, 0), gs[0].at(0, 0));
            fib[0].cos().mul(&th.sin())
        });
        let exact = hom_project_group(&f, 2, 6).unwrap();
        let fallback = hom_project_group(&f, 2, 1).unwrap();
        let meter = match &fallback.method {
            ProjectionMethod::CentralDifference { meter, .. } => meter.clone(),
            ProjectionMethod::Jet => panic!("expected the finite-difference fallback"),
        };
        let g = catalog_group("torus:1").unwrap();
        let gm = g.exp_f64(&[1.2]);
        let xi = [0.8, 0.1];
        let ve = exact.cochain.eval_f64(&[gm.clone()], &xi).unwrap()[0];
        // P₂ of cos(ξ₀) is -ξ₀²/2 times the base factor.
        assert!((ve - (-0.8 * 0.8 / 2.0) * 1.2f64.sin()).abs() < 1e-13);
        let vf = fallback.cochain.eval_f64(&[gm], &xi).unwrap()[0];
        assert!((vf - ve).abs() < 1e-3, "fallback error {}", (vf - ve).abs());
        let est = meter.max();
        assert!(est > 0.0, "an error estimate must be recorded");
        assert!((vf - ve).abs() < 100.0 * est + 1e-6);
    }

    #[test]
    fn is_vb_cochain_classifies() {
        let model = gauged_model();
        // Ψ-style linear cochain: pairs the fiber with band-limited data.
        let phi = Cochain::fiber(2, model.clone(), "linear", |ctx, gs, fib| {
            let th2 = Jet::atan2(gs[1].at(1, 0), gs[1].at(0, 0));
            // ⟨η_1, e(g_2)⟩ + ⟨ξ, c(g_1, g_2)⟩ with c vanishing smoothly.
            let th1 = Jet::atan2(gs[0].at(1, 0), gs[0].at(0, 0));
            let e_part = fib[2].mul(&th2.sin()).add(&fib[3].mul(&th2.cos().sub(&ctx.constant(1.0))));
            let c_part = fib[0]
                .mul(&th1.sin())
                .mul(&th2.sin())
                .add(&fib[1].mul(&th1.cos().sub(&ctx.constant(1.0))));
            e_part.add(&c_part)
        });
        let report = is_vb_cochain(&phi, 40, 1e-10, 59).unwrap();
        assert!(report.zero_arrow_ok, "max {}", report.zero_arrow_max);
        assert!(report.shift_ok, "max {}", report.shift_max);
        assert!(report.implication_ok);

        // Reading the last slot's fiber coordinate breaks the zero-arrow
        // condition, and a base-dependent pairing breaks the shift one.
        let bad = Cochain::fiber(2, model.clone(), "bad", |_, gs, fib| {
            let th1 = Jet::atan2(gs[0].at(1, 0), gs[0].at(0, 0));
            fib[4].add(&fib[2].mul(&th1.sin()))
        });
        let report2 = is_vb_cochain(&bad, 40, 1e-10, 61).unwrap();
        assert!(!report2.zero_arrow_ok);
        assert!(!report2.shift_ok);
    }

    #[test]
    fn kappa_homotopy_on_torus_cocycle() {
        let model = rotation_model();
        let mu = coeff_mu_cochain(model.delta_c.clone());
        let phi1 = pair_cochain(&model, &mu);
        let phi = simplicial_delta(&phi1); // 2-cocycle, vector-bundle type
        let quad = haar(&model.group, 32).unwrap();
        let k = kappa(&phi, &quad, &zero_splitting(0)).unwrap();
        let dk = simplicial_delta(&k);
        let ctx = JetCtx::scalar();
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        for _ in 0..25 {
            let gs: Vec<JetMatrix> = (0..2)
                .map(|_| JetMatrix::from_f64(&ctx, &model.group.random_point(&mut rng)))
                .collect();
            let xi: Vec<Jet> = (0..2)
                .map(|_| ctx.constant(rng.gen_range(-1.0..1.0)))
                .collect();
            let lhs = dk.eval_unchecked(&ctx, &gs, &xi)[0].clone();
            let rhs = phi.eval_unchecked(&ctx, &gs, &xi)[0].clone();
            // δκφ = (-1)^p φ with p = 2.
            assert!(lhs.sub(&rhs).max_abs() < 1e-12, "defect {}", lhs.sub(&rhs).max_abs());
        }
    }

    #[test]
    fn kappa_splitting_independence() {
        // On a fiberwise-linear cochain killed on zero first arrows, the
        // averaged value cannot see the splitting at all.
        let model = gauged_model();
        let phi = Cochain::fiber(2, model.clone(), "normal-form", |ctx, gs, fib| {
            let th1 = Jet::atan2(gs[0].at(1, 0), gs[0].at(0, 0));
            let th2 = Jet::atan2(gs[1].at(1, 0), gs[1].at(0, 0));
            let e_part = fib[2]
                .mul(&th2.sin())
                .add(&fib[3].mul(&ctx.constant(1.0).sub(&th2.cos())));
            let c_part = fib[0]
                .mul(&th1.sin())
                .mul(&th2.sin())
                .add(
                    &fib[1]
                        .mul(&ctx.constant(1.0).sub(&th1.cos()))
                        .mul(&ctx.constant(1.0).sub(&th2.cos())),
                );
            e_part.add(&c_part)
        });
        let quad = haar(&model.group, 32).unwrap();
        let k0 = kappa(&phi, &quad, &zero_splitting(model.dim_e)).unwrap();
        let other: Splitting = Arc::new(|h: &JetMatrix, xi: &[Jet]| {
            let th = Jet::atan2(h.at(1, 0), h.at(0, 0));
            vec![xi[0].mul(&th.sin()).scale(0.4), xi[1].scale(-0.3)]
        });
        let k1 = kappa(&phi, &quad, &other).unwrap();
        let ctx = JetCtx::scalar();
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        for _ in 0..20 {
            let gs = vec![JetMatrix::from_f64(
                &ctx,
                &model.group.random_point(&mut rng),
            )];
            let flat: Vec<Jet> = (0..model.dim_c + model.dim_e)
                .map(|_| ctx.constant(rng.gen_range(-1.0..1.0)))
                .collect();
            let a = k0.eval_unchecked(&ctx, &gs, &flat)[0].clone();
            let b = k1.eval_unchecked(&ctx, &gs, &flat)[0].clone();
            assert!(a.sub(&b).max_abs() < 1e-12);
        }
    }

    #[test]
    fn kappa_rejects_bad_inputs() {
        let model = rotation_model();
        let mu = coeff_mu_cochain(model.delta_c.clone());
        let phi1 = pair_cochain(&model, &mu);
        let quad = haar(&model.group, 8).unwrap();
        assert!(kappa(&phi1, &quad, &zero_splitting(0)).is_err());
        let real = Cochain::real(2, "r", |ctx, _| ctx.constant(1.0));
        assert!(kappa(&real, &quad, &zero_splitting(0)).is_err());
    }

    #[test]
    fn tangent_group_associativity() {
        let su2 = catalog_group("su2").unwrap();
        let tg = tangent_group(&su2, 1, 0, trivial_action(0)).unwrap();
        let ctx = JetCtx::scalar();
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        for _ in 0..1000 {
            let mk = |rng: &mut ChaCha8Rng| TangentPoint {
                g: JetMatrix::from_f64(&ctx, &su2.random_point(rng)),
                tangents: vec![(0..3)
                    .map(|_| ctx.constant(rng.gen_range(-1.0..1.0)))
                    .collect()],
                xi: vec![],
            };
            let (a, b, c) = (mk(&mut rng), mk(&mut rng), mk(&mut rng));
            let l = tg.mult(&ctx, &tg.mult(&ctx, &a, &b), &c);
            let r = tg.mult(&ctx, &a, &tg.mult(&ctx, &b, &c));
            assert!(norm_diff(&l.g, &r.g) < 1e-10);
            for (x, y) in l.tangents[0].iter().zip(r.tangents[0].iter()) {
                assert!(x.sub(y).max_abs() < 1e-10);
            }
        }
    }

    #[test]
    fn tangent_group_unit_inverse_and_bounds() {
        let su2 = catalog_group("su2").unwrap();
        assert!(tangent_group(&su2, 3, 0, trivial_action(0)).is_err());
        let tg = tangent_group(&su2, 2, 4, matrix_action()).unwrap();
        let ctx = JetCtx::scalar();
        let mut rng = ChaCha8Rng::seed_from_u64(79);
        let a = TangentPoint {
            g: JetMatrix::from_f64(&ctx, &su2.random_point(&mut rng)),
            tangents: (0..2)
                .map(|_| {
                    (0..3)
                        .map(|_| ctx.constant(rng.gen_range(-1.0..1.0)))
                        .collect()
                })
                .collect(),
            xi: (0..4)
                .map(|_| ctx.constant(rng.gen_range(-1.0..1.0)))
                .collect(),
        };
        let ai = tg.inverse(&ctx, &a);
        let prod = tg.mult(&ctx, &a, &ai);
        assert!(norm_diff(&prod.g, &su2.identity(&ctx)) < 1e-12);
        for t in &prod.tangents {
            for x in t {
                assert!(x.max_abs() < 1e-12);
            }
        }
        // Product target is the target of the first factor.
        for (x, y) in prod.xi.iter().zip(a.xi.iter()) {
            assert!(x.sub(y).max_abs() < 1e-15);
        }
        // Unit at the source composes trivially on the right.
        let unit = tg.unit(&ctx, &tg.source_fiber(&ctx, &a));
        let same = tg.mult(&ctx, &a, &unit);
        assert!(norm_diff(&same.g, &a.g) < 1e-13);
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let ctx = JetCtx::scalar();
        let items: Vec<Jet> = (0..37).map(|i| ctx.constant(0.1 * i as f64)).collect();
        let naive: f64 = (0..37).map(|i| 0.1 * i as f64).sum();
        assert!((pairwise_sum(&ctx, items).value() - naive).abs() < 1e-12);
        assert!(pairwise_sum(&ctx, vec![]).is_zero());
    }
}
