//! Small-dimension complex linear algebra and quantum primitives.

pub mod linalg;
pub mod measure;
pub mod observable;
pub mod random;
pub mod rng;
pub mod state;

pub use linalg::{c, CMatrix, CVector, C64};
pub use measure::{measure, measure_pure, outcome_probabilities};
pub use observable::{
    deviated_observables, eigenprojectors, pauli_x, pauli_y, pauli_z, standard_observables,
    Observable, StandardObservables,
};
pub use rng::{stream_rng, SimRng};
pub use state::{fidelity_with_pure, tensor_product, trace_distance, DensityMatrix, StateVector, Tensor};
