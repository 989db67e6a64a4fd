//! Downlink signal synthesis: spreading codes, Alamouti encoding, multipath
//! fading channels and the stacked received vectors.

mod alamouti;
mod codes;
mod fading;
mod synth;

pub use alamouti::{alamouti_pair, qpsk, random_qpsk, AlamoutiBlock};
pub use codes::{
    build_constraint_matrices, build_convolution_matrix, gen_spreading_set, user_constraints,
    ConstraintMatrices, SpreadingSet,
};
pub use fading::{clarke_step, draw_delays, ChannelModel, ChannelRealization, ClarkeFader, CLARKE_SINUSOIDS};
pub use synth::{exact_covariance, noise_pseudo_covariance, symbol_responses, synthesize_stream, Frame, RxBlock, SymbolResponse};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complexla::{ComplexMatrix, LinalgError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AirlinkError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch { left: (usize, usize), right: (usize, usize) },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Transmit scheme: one antenna, or two antennas with Alamouti coding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StbcLayout {
    Single,
    Alamouti,
}

impl StbcLayout {
    pub fn from_tx_antennas(nt: usize) -> Option<Self> {
        match nt {
            1 => Some(Self::Single),
            2 => Some(Self::Alamouti),
            _ => None,
        }
    }

    pub fn tx_antennas(self) -> usize {
        match self {
            Self::Single => 1,
            Self::Alamouti => 2,
        }
    }
}

/// Per-chip noise variance giving `snr_db` of bit energy to noise density
/// for a desired user of amplitude `a1` with unit-energy codes and channel.
///
/// Each QPSK symbol carries two bits of energy `a1²/2`.
pub fn noise_variance(snr_db: f64, a1: f64) -> f64 {
    a1 * a1 / (2.0 * 10f64.powf(snr_db / 10.0))
}

/// Signature matrices of one user in the received-vector space: the
/// direct branch `𝒞` and the conjugate branch `𝒞̄` (absent for one antenna).
#[derive(Clone, Debug, PartialEq)]
pub struct UserSignature {
    pub direct: ComplexMatrix,
    pub conjugate: Option<ComplexMatrix>,
}

/// Constraint matrices of `user` under `layout`.
pub fn user_signature(layout: StbcLayout, codes: &SpreadingSet, user: usize, lp: usize) -> UserSignature {
    match layout {
        StbcLayout::Single => UserSignature {
            direct: build_convolution_matrix(codes.code(user, 0), lp),
            conjugate: None,
        },
        StbcLayout::Alamouti => {
            let cm = user_constraints(codes, user, lp);
            UserSignature {
                direct: cm.cstk,
                conjugate: Some(cm.cbar),
            }
        }
    }
}
