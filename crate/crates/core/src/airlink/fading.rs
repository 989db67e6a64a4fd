//! Clarke fading and multipath channel realizations.

use std::f64::consts::PI;

use rand::Rng;

use super::{AirlinkError, StbcLayout};
use crate::complexla::{ComplexVector, C64};

pub const CLARKE_SINUSOIDS: usize = 20;

/// Sum-of-sinusoids Clarke fading oscillator bank with unit average power.
///
/// Arrival angles are stratified over `(0, π)` with a random offset per
/// stratum, so the Doppler frequencies `f_d cos θ` are distinct and follow the
/// Clarke spectrum; initial phases are uniform.
#[derive(Clone, Debug)]
pub struct ClarkeFader {
    doppler: Vec<f64>,
    phases: Vec<f64>,
    fdt: f64,
    time: f64,
}

impl ClarkeFader {
    pub fn new<R: Rng + ?Sized>(fdt: f64, rng: &mut R) -> Self {
        assert!(fdt >= 0.0, "normalized Doppler must be nonnegative");
        let s = CLARKE_SINUSOIDS as f64;
        let doppler = (0..CLARKE_SINUSOIDS)
            .map(|i| {
                let theta = PI * (i as f64 + rng.random::<f64>()) / s;
                fdt * theta.cos()
            })
            .collect();
        let phases = (0..CLARKE_SINUSOIDS).map(|_| 2.0 * PI * rng.random::<f64>()).collect();
        Self { doppler, phases, fdt, time: 0.0 }
    }

    pub fn fdt(&self) -> f64 {
        self.fdt
    }

    /// Gain at time `t`, measured in symbol periods.
    pub fn gain_at(&self, t: f64) -> C64 {
        let norm = 1.0 / (CLARKE_SINUSOIDS as f64).sqrt();
        self.doppler
            .iter()
            .zip(&self.phases)
            .map(|(f, p)| C64::from_polar(norm, 2.0 * PI * f * t + p))
            .sum()
    }
}

/// Current gain of the bank; advances its clock by one symbol period.
pub fn clarke_step(state: &mut ClarkeFader) -> C64 {
    let g = state.gain_at(state.time);
    state.time += 1.0;
    g
}

/// Path delays in chips for a profile of `paths` paths within order `lp`.
///
/// The first path sits at delay 0 and each later path draws a uniform gap of
/// at least one chip, leaving room for the remaining paths below `lp − 1`.
/// For three paths and `lp = 6` this is τ₂ ~ U{1..4}, τ₃ = τ₂ + U{1..5−τ₂}.
pub fn draw_delays<R: Rng + ?Sized>(lp: usize, paths: usize, rng: &mut R) -> Vec<usize> {
    assert!(paths >= 1 && paths <= lp, "need 1 ≤ paths ≤ L_p");
    let mut delays = Vec::with_capacity(paths);
    delays.push(0);
    let max_delay = lp - 1;
    for j in 1..paths {
        let prev = delays[j - 1];
        let remaining = paths - 1 - j;
        let hi = max_delay - remaining - prev;
        delays.push(prev + rng.random_range(1..=hi));
    }
    delays
}

#[derive(Clone, Debug)]
struct MultipathLink {
    delays: Vec<usize>,
    amplitudes: Vec<f64>,
    faders: Vec<ClarkeFader>,
}

/// Time-varying multipath channels from every transmit to every receive antenna.
#[derive(Clone, Debug)]
pub struct ChannelModel {
    layout: StbcLayout,
    lp: usize,
    rx: usize,
    links: Vec<MultipathLink>,
}

impl ChannelModel {
    /// Draws delays and fading banks for each (Tx, Rx) link.
    ///
    /// Path amplitudes follow `profile_db` and are scaled so that the
    /// stacked channel of every receive antenna has unit expected energy.
    pub fn draw<R: Rng + ?Sized>(
        layout: StbcLayout,
        rx: usize,
        lp: usize,
        profile_db: &[f64],
        fdt: f64,
        rng: &mut R,
    ) -> Result<Self, AirlinkError> {
        if rx == 0 || lp == 0 || profile_db.is_empty() {
            return Err(AirlinkError::Config("channel needs Nr ≥ 1, L_p ≥ 1 and a power profile".into()));
        }
        if fdt < 0.0 || !fdt.is_finite() {
            return Err(AirlinkError::Config(format!("invalid normalized Doppler {fdt}")));
        }
        let paths = profile_db.len().min(lp);
        let linear: Vec<f64> = profile_db[..paths].iter().map(|db| 10f64.powf(db / 10.0)).collect();
        let total: f64 = linear.iter().sum();
        let nt = layout.tx_antennas() as f64;
        let amplitudes: Vec<f64> = linear.iter().map(|p| (p / total / nt).sqrt()).collect();
        let mut links = Vec::with_capacity(layout.tx_antennas() * rx);
        for _ in 0..layout.tx_antennas() * rx {
            let delays = draw_delays(lp, paths, rng);
            let faders = (0..paths).map(|_| ClarkeFader::new(fdt, rng)).collect();
            links.push(MultipathLink {
                delays,
                amplitudes: amplitudes.clone(),
                faders,
            });
        }
        Ok(Self { layout, lp, rx, links })
    }

    pub fn layout(&self) -> StbcLayout {
        self.layout
    }

    pub fn is_static(&self) -> bool {
        self.links.iter().all(|l| l.faders.iter().all(|f| f.fdt() == 0.0))
    }

    /// Snapshot of all links at `time` (symbol periods).
    pub fn realization_at(&self, time: f64) -> ChannelRealization {
        let taps = self
            .links
            .iter()
            .map(|link| {
                let mut h = ComplexVector::zeros(self.lp);
                for ((&d, &a), f) in link.delays.iter().zip(&link.amplitudes).zip(&link.faders) {
                    h[d] += f.gain_at(time) * a;
                }
                h
            })
            .collect();
        ChannelRealization {
            layout: self.layout,
            lp: self.lp,
            rx: self.rx,
            taps,
        }
    }

    pub fn delays(&self, tx: usize, rx: usize) -> &[usize] {
        &self.links[tx * self.rx + rx].delays
    }
}

/// Channel taps of every (Tx antenna, Rx antenna) link at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    layout: StbcLayout,
    lp: usize,
    rx: usize,
    taps: Vec<ComplexVector>,
}

impl ChannelRealization {
    /// Builds a realization from explicit taps indexed `[tx][rx]`.
    pub fn from_taps(layout: StbcLayout, taps: Vec<Vec<ComplexVector>>) -> Result<Self, AirlinkError> {
        if taps.len() != layout.tx_antennas() {
            return Err(AirlinkError::Config(format!(
                "expected {} transmit antennas, got {}",
                layout.tx_antennas(),
                taps.len()
            )));
        }
        let rx = taps[0].len();
        let lp = taps[0].first().map_or(0, |h| h.len());
        if rx == 0 || lp == 0 || taps.iter().any(|t| t.len() != rx || t.iter().any(|h| h.len() != lp)) {
            return Err(AirlinkError::Config("ragged channel taps".into()));
        }
        Ok(Self {
            layout,
            lp,
            rx,
            taps: taps.into_iter().flatten().collect(),
        })
    }

    pub fn lp(&self) -> usize {
        self.lp
    }

    pub fn rx_antennas(&self) -> usize {
        self.rx
    }

    pub fn layout(&self) -> StbcLayout {
        self.layout
    }

    /// Tap vector `h_m^{n_t}` (zero-based indices).
    pub fn taps(&self, tx: usize, rx: usize) -> &ComplexVector {
        &self.taps[tx * self.rx + rx]
    }

    /// Space-time channel vector seen by the receiver at antenna `rx`.
    ///
    /// With two transmit antennas this is `[h¹; conj(h²)]`: the receiver
    /// conjugates the second interval of each block, which turns the Alamouti
    /// transmission into `b₁·𝒞g + b₂·𝒞̄ conj(g)`.
    pub fn stacked(&self, rx: usize) -> ComplexVector {
        match self.layout {
            StbcLayout::Single => self.taps(0, rx).clone(),
            StbcLayout::Alamouti => self.taps(0, rx).concat(&self.taps(1, rx).conj()),
        }
    }

    pub fn zero(layout: StbcLayout, rx: usize, lp: usize) -> Self {
        Self {
            layout,
            lp,
            rx,
            taps: vec![ComplexVector::zeros(lp); layout.tx_antennas() * rx],
        }
    }
}
