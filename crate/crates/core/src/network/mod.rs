//! The small field network: direction encoding, MLP and its optimizer.

mod adam;
mod mlp;
mod sh;

pub use adam::{AdamConfig, AdamState};
pub use mlp::{
    field_backward, field_forward, FieldCache, FieldGradients, FieldParams, HIDDEN, OUTPUTS,
    SIGMA_RAW_MAX,
};
pub use sh::{encode_direction, encode_direction_unchecked, SH_COEFFS};
