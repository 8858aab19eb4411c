//! Cochain complexes for matrix groups and their infinitesimal counterparts,
//! with the differentiation maps connecting the two sides.
//!
//! The crate has an exact half and a numerical half.  The exact half works
//! over rationals: Chevalley–Eilenberg complexes with coefficients, graded
//! models of linear-fiber complexes, a Weil-type bicomplex for differential
//! forms, and fraction-free rank computations for cohomology dimensions.  The
//! numerical half evaluates smooth cochains on matrix groups through
//! truncated jets, so that the Van Est differentiation maps (group cochains
//! to algebra cochains, simplicial forms to Weil classes) can be checked
//! against their chain-map identities to tight tolerances without finite
//! differencing.

pub mod error;
pub mod scalar;
pub mod linalg;
pub mod perm;
pub mod jet;
pub mod tensor;
pub mod lie;
pub mod group;
pub mod ruth;
pub mod weil;
pub mod van_est;

pub use error::Error;
pub use group::{
    catalog_group, check_normalized, cup, haar, hom_project_group, is_vb_cochain, kappa,
    simplicial_delta, tangent_group, vb_structure, Cochain, HaarQuadrature, MatrixGroup,
    QuasiAction, Splitting, ValueSpace,
};
pub use jet::{jet_extract, Jet, JetCtx, JetMatrix};
pub use lie::{
    catalog_algebra, catalog_representation, ce_differential, cohomology_dims,
    hom_project_algebra, GradedCochain, GradedMix, LieAlgebra, Representation,
};
pub use linalg::QMatrix;
pub use perm::{epsilon_sign, permutations_signed, unshuffles, SignedPermutation};
pub use ruth::{
    check_normalized_ruth, covariant_differential, differentiate_model, gauged_torus_model,
    model_lift_form, psi, psi_inverse, ruth_cohomology_dims, ruth_differential_alg,
    ruth_differential_grp, ruth_ev, ruth_ev_inverse, ruth_image_residual, ruth_matrix,
    ruth_model_differential, shifted_flat_alg, OmegaElement, PairAction, Ruth2TermAlg,
    Ruth2TermGrp, RuthCochain,
};
pub use scalar::{Rat, Scalar};
pub use tensor::{wedge, AltSymTensor};
pub use van_est::{
    appendix_crosscheck, differentiate_action, differentiate_base, fiber_scaling_pullback,
    form_check, form_delta, form_slot_derivative, forms_to_functions, homological_lemma_check,
    lift_identity_residual, normalize_cochain, random_lemma_instance, slot_contraction,
    slot_derivative, tangent_ext_projection, tangent_hom_projection, tangent_permute_pullback,
    tangent_simple_projection, tangent_skew_projection, tangent_zero_pullback, van_est,
    van_est_fiber, van_est_forms, van_est_forms_component, van_est_khom, van_est_rep,
    ComplexWithProjection, CrosscheckReport, DegreeVerdict, FormCochain, FormReport, FormVector,
    HomologicalReport, LemmaInstance, RungReport, TangentCochain, VEContext,
};
pub use weil::{
    module_action, spencer_check, weil_differential, weil_wedge, LinearActionBase, PolyForm,
    SpencerReport, WeilElement, DEFAULT_POLY_CAP,
};
