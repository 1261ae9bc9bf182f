//! Built-in plants used by tests, the benchmark harness and the CLI.

use crate::dhcore::{SystemPair, SystemTriplet};
use crate::matcore::Matrix;

/// A named plant; `c = None` marks a state-feedback problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Plant {
    pub name: String,
    pub a: Matrix,
    pub b: Matrix,
    pub c: Option<Matrix>,
}

impl Plant {
    pub fn pair(&self) -> SystemPair {
        SystemPair { a: self.a.clone(), b: self.b.clone() }
    }

    /// The output-feedback triplet, with `C = I` for state-feedback plants.
    pub fn triplet(&self) -> SystemTriplet {
        let n = self.a.nrows();
        SystemTriplet {
            a: self.a.clone(),
            b: self.b.clone(),
            c: self.c.clone().unwrap_or_else(|| Matrix::identity(n, n)),
        }
    }
}

/// Unstable 4-state, 2-input plant whose state-feedback problem is feasible
/// even though the naive "rotate B to the top" reduction suggests otherwise.
pub fn counterexample_a() -> Matrix {
    Matrix::from_row_slice(
        4,
        4,
        &[
            -0.3633, -0.2867, -0.7294, -2.2033, //
            -1.0206, -0.1973, 1.1473, -0.5712, //
            -3.0730, 0.4056, 0.5979, 0.2140, //
            0.6263, -1.4193, -1.2813, 0.9424,
        ],
    )
}

pub fn counterexample_b() -> Matrix {
    Matrix::from_row_slice(4, 2, &[0.0937, -0.9610, -1.1223, -0.6537, 0.3062, -1.2294, -1.1723, -0.2710])
}

/// A stabilizing (not norm-optimized) gain for the counterexample plant.
pub fn counterexample_k() -> Matrix {
    Matrix::from_row_slice(
        2,
        4,
        &[3.4237, 27.5800, 1.9374, -35.6683, 10.1752, -23.1448, -11.0932, 20.1984],
    )
}

pub fn counterexample_s3() -> Plant {
    Plant {
        name: "counterexample_s3".into(),
        a: counterexample_a(),
        b: counterexample_b(),
        c: None,
    }
}

/// `A = diag(1, −1)`, `B = e₂`: the unstable mode is uncontrollable.
pub fn unstabilizable_pair() -> Plant {
    Plant {
        name: "unstabilizable_pair".into(),
        a: Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]),
        b: Matrix::from_row_slice(2, 1, &[0.0, 1.0]),
        c: None,
    }
}

/// Same plant measured through `C = e₁ᵀ`.
pub fn unstabilizable_triplet() -> Plant {
    Plant {
        c: Some(Matrix::from_row_slice(1, 2, &[1.0, 0.0])),
        name: "unstabilizable_triplet".into(),
        ..unstabilizable_pair()
    }
}

/// Double integrator with input on the velocity and output `y = x₁ + x₂`.
/// Closed loop `A − k B C` is stable iff `k > 0`.
pub fn double_integrator_output() -> Plant {
    Plant {
        name: "double_integrator_output".into(),
        a: Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
        b: Matrix::from_row_slice(2, 1, &[0.0, 1.0]),
        c: Some(Matrix::from_row_slice(1, 2, &[1.0, 1.0])),
    }
}

/// Double integrator with full state feedback.
pub fn double_integrator() -> Plant {
    Plant {
        name: "double_integrator".into(),
        a: Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
        b: Matrix::from_row_slice(2, 1, &[0.0, 1.0]),
        c: None,
    }
}

/// Unstable third-order chain with input on the last state and output on the
/// first. Closed loop `A − k B C` is stable iff `1 < k < 4`.
pub fn chain3_output() -> Plant {
    Plant {
        name: "chain3_output".into(),
        a: Matrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, -2.0, -1.5]),
        b: Matrix::from_row_slice(3, 1, &[0.0, 0.0, 1.0]),
        c: Some(Matrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0])),
    }
}

/// Unstable 3-state plant with two inputs.
pub fn unstable3() -> Plant {
    Plant {
        name: "unstable3".into(),
        a: Matrix::from_row_slice(3, 3, &[0.5, 1.0, 0.0, 0.0, 0.2, 1.0, 0.3, 0.0, -1.0]),
        b: Matrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]),
        c: None,
    }
}

/// Every shipped fixture, in a fixed order.
pub fn all() -> Vec<Plant> {
    vec![
        counterexample_s3(),
        unstabilizable_pair(),
        unstabilizable_triplet(),
        double_integrator(),
        double_integrator_output(),
        chain3_output(),
        unstable3(),
    ]
}
