use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskScope {
    /// One keep/drop draw per feature, shared by every timestep.
    #[default]
    PerFeature,
    /// Independent draws for every cell.
    PerCell,
}

/// Inverted dropout over a `steps x width` input. In train mode dropped
/// features are zeroed and survivors scaled by `1 / (1 - rate)`.
pub fn sequence_dropout<F: Scalar, R: Rng + ?Sized>(
    x: &[F],
    width: usize,
    rate: f64,
    rng: &mut R,
    mode: Mode,
    scope: MaskScope,
) -> Vec<F> {
    assert!((0.0..1.0).contains(&rate), "dropout rate must lie in [0, 1)");
    if mode == Mode::Infer || rate == 0.0 {
        return x.to_vec();
    }
    let keep = 1.0 - rate;
    let scale = F::of(1.0 / keep);
    match scope {
        MaskScope::PerFeature => {
            let mask: Vec<F> = (0..width)
                .map(|_| if rng.random_bool(keep) { scale } else { F::zero() })
                .collect();
            x.chunks_exact(width)
                .flat_map(|row| row.iter().zip(&mask).map(|(&v, &m)| v * m))
                .collect()
        }
        MaskScope::PerCell => x
            .iter()
            .map(|&v| if rng.random_bool(keep) { v * scale } else { F::zero() })
            .collect(),
    }
}
