//! Chip-level synthesis of the received block stream.
//!
//! Every transmitted symbol interval produces an `M = N + L_p − 1` chip burst
//! at the receiver. The receiver window of interval `t` covers chips
//! `[tN, tN + M)`, so it also collects the tail of burst `t − 1` and the head
//! of burst `t + 1`; that overlap is the intersymbol interference. Nothing is
//! transmitted before the first or after the last interval of a packet.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::alamouti::alamouti_pair;
use super::codes::SpreadingSet;
use super::fading::ChannelRealization;
use super::{AirlinkError, StbcLayout};
use crate::complexla::{ComplexMatrix, ComplexVector, C64, ZERO};

/// One packet worth of transmit-side quantities.
#[derive(Clone, Copy, Debug)]
pub struct Frame<'a> {
    pub layout: StbcLayout,
    pub codes: &'a SpreadingSet,
    pub lp: usize,
    /// Channel of each block (held constant over the block).
    pub channels: &'a [ChannelRealization],
    /// `[block][user]` amplitudes; zero marks an inactive user.
    pub amplitudes: &'a [Vec<f64>],
    /// `[user][symbol]` data symbols, `blocks × N_t` per user.
    pub symbols: &'a [Vec<C64>],
}

impl Frame<'_> {
    pub fn blocks(&self) -> usize {
        self.channels.len()
    }

    pub fn window_len(&self) -> usize {
        self.codes.chips() + self.lp - 1
    }

    /// Length of one stacked receive vector, `N_t · M`.
    pub fn block_len(&self) -> usize {
        self.layout.tx_antennas() * self.window_len()
    }

    fn validate(&self) -> Result<(), AirlinkError> {
        let nt = self.layout.tx_antennas();
        let blocks = self.blocks();
        if self.codes.tx_antennas() != nt {
            return Err(AirlinkError::Config(format!(
                "spreading set has {} antennas, layout needs {nt}",
                self.codes.tx_antennas()
            )));
        }
        if self.lp == 0 || self.lp > self.codes.chips() + 1 {
            return Err(AirlinkError::Config(format!(
                "channel order {} must lie in 1..=N+1 for N = {}",
                self.lp,
                self.codes.chips()
            )));
        }
        if self.amplitudes.len() != blocks {
            return Err(AirlinkError::Config(format!(
                "{} amplitude rows for {blocks} blocks",
                self.amplitudes.len()
            )));
        }
        let users = self.codes.users();
        if self.amplitudes.iter().any(|row| row.len() != users) {
            return Err(AirlinkError::Config("amplitude row length differs from user count".into()));
        }
        if self.symbols.len() != users || self.symbols.iter().any(|s| s.len() != blocks * nt) {
            return Err(AirlinkError::Config(format!(
                "each of {users} users needs {} symbols",
                blocks * nt
            )));
        }
        let rx = self.channels.first().map_or(0, |c| c.rx_antennas());
        if self
            .channels
            .iter()
            .any(|c| c.lp() != self.lp || c.rx_antennas() != rx || c.layout() != self.layout)
        {
            return Err(AirlinkError::Config("inconsistent channel realizations".into()));
        }
        Ok(())
    }

    /// Symbol sent from antenna `tx` during interval `slot` of `block` by `user`.
    fn transmitted(&self, user: usize, block: usize, slot: usize, tx: usize) -> C64 {
        let s = &self.symbols[user];
        match self.layout {
            StbcLayout::Single => s[block],
            StbcLayout::Alamouti => alamouti_pair(s[2 * block], s[2 * block + 1])[slot][tx],
        }
    }
}

/// Received vectors of one stacked block.
#[derive(Clone, Debug, PartialEq)]
pub struct RxBlock {
    pub index: usize,
    /// One stacked vector per receive antenna.
    pub y: Vec<ComplexVector>,
    /// `[user][slot]` transmitted symbols of this block.
    pub symbols: Vec<Vec<C64>>,
}

fn convolve(code: &[f64], h: &ComplexVector, out: &mut [C64], scale: C64) {
    for (l, &hl) in h.iter().enumerate() {
        if hl == ZERO {
            continue;
        }
        let a = hl * scale;
        for (n, &c) in code.iter().enumerate() {
            out[n + l] += a * c;
        }
    }
}

/// Noise-free chip windows of every interval at antenna `rx`.
fn render_windows(frame: &Frame<'_>, rx: usize) -> Vec<Vec<C64>> {
    let nt = frame.layout.tx_antennas();
    let n = frame.codes.chips();
    let m = frame.window_len();
    let users = frame.codes.users();
    let intervals = frame.blocks() * nt;

    let mut bursts = vec![vec![ZERO; m]; intervals];
    let mut sig = vec![vec![ZERO; m]; users * nt];
    for block in 0..frame.blocks() {
        let ch = &frame.channels[block];
        for k in 0..users {
            for a in 0..nt {
                let s = &mut sig[k * nt + a];
                s.iter_mut().for_each(|z| *z = ZERO);
                if frame.amplitudes[block][k] != 0.0 {
                    convolve(frame.codes.code(k, a), ch.taps(a, rx), s, C64::new(1.0, 0.0));
                }
            }
        }
        for slot in 0..nt {
            let burst = &mut bursts[block * nt + slot];
            for k in 0..users {
                let amp = frame.amplitudes[block][k];
                if amp == 0.0 {
                    continue;
                }
                for a in 0..nt {
                    let x = frame.transmitted(k, block, slot, a) * amp;
                    if x == ZERO {
                        continue;
                    }
                    for (o, v) in burst.iter_mut().zip(&sig[k * nt + a]) {
                        *o += x * v;
                    }
                }
            }
        }
    }

    let spill = frame.lp - 1;
    (0..intervals)
        .map(|t| {
            let mut w = bursts[t].clone();
            if t > 0 {
                for j in 0..spill {
                    w[j] += bursts[t - 1][n + j];
                }
            }
            if t + 1 < intervals {
                for j in 0..spill {
                    w[n + j] += bursts[t + 1][j];
                }
            }
            w
        })
        .collect()
}

fn stack_block(layout: StbcLayout, windows: &[Vec<C64>], block: usize) -> ComplexVector {
    match layout {
        StbcLayout::Single => ComplexVector::from_vec(windows[block].clone()),
        StbcLayout::Alamouti => {
            let mut v = windows[2 * block].clone();
            v.extend(windows[2 * block + 1].iter().map(|z| z.conj()));
            ComplexVector::from_vec(v)
        }
    }
}

/// Synthesizes the received blocks of a packet at every receive antenna.
///
/// Noise is circular complex Gaussian with `E|n|² = noise_var` per chip and
/// is generated on the chip stream, so overlapping windows share samples.
pub fn synthesize_stream<R: Rng + ?Sized>(
    frame: &Frame<'_>,
    noise_var: f64,
    rng: &mut R,
) -> Result<Vec<RxBlock>, AirlinkError> {
    frame.validate()?;
    if !(noise_var >= 0.0) {
        return Err(AirlinkError::Config(format!("noise variance {noise_var} must be ≥ 0")));
    }
    let nt = frame.layout.tx_antennas();
    let n = frame.codes.chips();
    let rx = frame.channels.first().map_or(0, |c| c.rx_antennas());
    let intervals = frame.blocks() * nt;
    let chips_total = intervals * n + frame.lp - 1;
    let normal = Normal::new(0.0, (noise_var / 2.0).sqrt()).expect("finite std dev");

    let mut per_antenna: Vec<Vec<ComplexVector>> = Vec::with_capacity(rx);
    for m in 0..rx {
        let mut windows = render_windows(frame, m);
        if noise_var > 0.0 {
            let noise: Vec<C64> = (0..chips_total)
                .map(|_| C64::new(normal.sample(rng), normal.sample(rng)))
                .collect();
            for (t, w) in windows.iter_mut().enumerate() {
                for (j, z) in w.iter_mut().enumerate() {
                    *z += noise[t * n + j];
                }
            }
        }
        per_antenna.push((0..frame.blocks()).map(|b| stack_block(frame.layout, &windows, b)).collect());
    }

    Ok((0..frame.blocks())
        .map(|b| RxBlock {
            index: b,
            y: per_antenna.iter().map(|ys| ys[b].clone()).collect(),
            symbols: frame
                .symbols
                .iter()
                .map(|s| s[b * nt..(b + 1) * nt].to_vec())
                .collect(),
        })
        .collect())
}

/// Received-vector response to one real degree of freedom of one symbol.
#[derive(Clone, Debug)]
pub struct SymbolResponse {
    pub user: usize,
    /// Block of the symbol relative to the observed block: −1, 0 or +1.
    pub block_offset: isize,
    /// Symbol position within its block.
    pub slot: usize,
    /// Response to the symbol value `1`.
    pub re: ComplexVector,
    /// Response to the symbol value `j`.
    pub im: ComplexVector,
}

/// Responses of one block's stacked receive vector to every symbol that can
/// reach it, under a channel held fixed over the neighbouring blocks.
///
/// The receive vector is real-linear in the symbols, so
/// `y = Σ (Re b)·re + (Im b)·im` over the returned entries, plus noise.
pub fn symbol_responses(
    layout: StbcLayout,
    codes: &SpreadingSet,
    lp: usize,
    channel: &ChannelRealization,
    amplitudes: &[f64],
    rx: usize,
) -> Result<Vec<SymbolResponse>, AirlinkError> {
    let nt = layout.tx_antennas();
    let users = codes.users();
    let channels = vec![channel.clone(); 3];
    let amps = vec![amplitudes.to_vec(); 3];
    let mut out = Vec::new();
    for user in 0..users {
        if amplitudes[user] == 0.0 {
            continue;
        }
        for blk in 0..3 {
            for slot in 0..nt {
                let mut pair = [ComplexVector::zeros(0), ComplexVector::zeros(0)];
                for (idx, value) in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)].into_iter().enumerate() {
                    let mut symbols = vec![vec![ZERO; 3 * nt]; users];
                    symbols[user][blk * nt + slot] = value;
                    let frame = Frame {
                        layout,
                        codes,
                        lp,
                        channels: &channels,
                        amplitudes: &amps,
                        symbols: &symbols,
                    };
                    frame.validate()?;
                    let windows = render_windows(&frame, rx);
                    pair[idx] = stack_block(layout, &windows, 1);
                }
                let [re, im] = pair;
                if re.norm_sqr() == 0.0 && im.norm_sqr() == 0.0 {
                    continue;
                }
                out.push(SymbolResponse {
                    user,
                    block_offset: blk as isize - 1,
                    slot,
                    re,
                    im,
                });
            }
        }
    }
    Ok(out)
}

/// Exact covariance `E[y yᴴ]` for i.i.d. unit-modulus QPSK symbols:
/// `½ Σ (re reᴴ + im imᴴ) + σ² I`.
pub fn exact_covariance(responses: &[SymbolResponse], noise_var: f64, dim: usize) -> ComplexMatrix {
    let mut r = ComplexMatrix::identity(dim).scale_real(noise_var);
    let half = C64::new(0.5, 0.0);
    for resp in responses {
        r.add_outer(half, &resp.re, &resp.re);
        r.add_outer(half, &resp.im, &resp.im);
    }
    r.symmetrize();
    r
}

/// Pseudo-covariance `E[n nᵀ]` of the stacked block noise.
///
/// Adjacent windows share `L_p − 1` chips, so with two antennas the first
/// half of the block and the conjugated second half are correlated in the
/// `E[n nᵀ]` sense even though `E[n nᴴ] = σ²I`.
pub fn noise_pseudo_covariance(layout: StbcLayout, chips: usize, lp: usize, noise_var: f64) -> ComplexMatrix {
    let m = chips + lp - 1;
    let dim = layout.tx_antennas() * m;
    let mut c = ComplexMatrix::zeros(dim, dim);
    if layout == StbcLayout::Alamouti {
        for j in 0..lp - 1 {
            c[(chips + j, m + j)] = C64::new(noise_var, 0.0);
            c[(m + j, chips + j)] = C64::new(noise_var, 0.0);
        }
    }
    c
}
