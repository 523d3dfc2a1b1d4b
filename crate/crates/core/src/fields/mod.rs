//! Grid fields, Riesz charges, averages and δ-subharmonic majorants.

mod averages;
mod charge;
mod grid;
mod majorant;
mod riesz;
mod scalar;

pub use averages::{ball_average, sphere_average, sphere_average_with, DEFAULT_CIRCLE_NODES};
pub use charge::{hahn_jordan, Atom, ChargeJson, RieszCharge};
pub use grid::{opposite, Ball, ExclusionSet, GridDomain, GridSpec, Shape, DIRECTIONS};
pub use majorant::{make_delta_sbh, make_delta_sbh_with, MajorantSpec, DEFAULT_DOM_STRIDE};
pub use riesz::{
    check_subharmonic, check_subharmonic_with, dom_check, dom_mask, lattice_flux_factor,
    riesz_extract, riesz_measure, CheckRegion, RieszExtraction, RieszOptions, SubharmonicCheck,
};
pub use scalar::{Evaluator, FieldJson, ScalarField};
