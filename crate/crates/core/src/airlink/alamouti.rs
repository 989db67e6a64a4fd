use std::f64::consts::FRAC_1_SQRT_2;

use rand::Rng;

use crate::complexla::C64;

/// Per-interval, per-antenna symbols of one Alamouti block: `[interval][antenna]`.
pub type AlamoutiBlock = [[C64; 2]; 2];

/// Alamouti encoding of the pair `(b_odd, b_even)`.
///
/// Interval 1 sends `(b_odd, b_even)` from (Tx1, Tx2); interval 2 sends
/// `(−b_even*, b_odd*)`.
pub fn alamouti_pair(b_odd: C64, b_even: C64) -> AlamoutiBlock {
    [[b_odd, b_even], [-b_even.conj(), b_odd.conj()]]
}

/// Unit-modulus QPSK point `(±1 ± j)/√2` selected by two bits.
pub fn qpsk(bit_re: bool, bit_im: bool) -> C64 {
    let re = if bit_re { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
    let im = if bit_im { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
    C64::new(re, im)
}

pub fn random_qpsk<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    qpsk(rng.random(), rng.random())
}
