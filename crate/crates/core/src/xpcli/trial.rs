use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use super::scenario::{Algorithm, ChannelEstimate, ScenarioConfig};
use crate::airlink::{
    exact_covariance, gen_spreading_set, noise_variance, random_qpsk, symbol_responses, synthesize_stream, SymbolResponse,
    user_signature, AirlinkError, ChannelModel, ChannelRealization, Frame, SpreadingSet, StbcLayout, UserSignature,
};
use crate::chest::{channel_mse, channel_rls_step, ChannelEstimatorState, ChestError};
use crate::complexla::{ComplexMatrix, ComplexVector, C64};
use crate::receivers::{
    bit_errors, combine, detect, mmse_oracle, trained_rls_step, BlindCriterion, CombinerConfig, CombinerMode,
    ReceiverError, ReceiverState, TrainedState,
};

/// Smoothing of the decision-directed amplitude estimates that drive MRC.
const AMPLITUDE_SMOOTHING: f64 = 0.98;

/// Floor on the noise variance of the covariance handed to the MMSE filter,
/// so that noise-free runs keep it invertible.
const MMSE_NOISE_FLOOR: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum StepError {
    #[error(transparent)]
    Airlink(#[from] AirlinkError),
    #[error(transparent)]
    Receiver(#[from] ReceiverError),
    #[error(transparent)]
    Chest(#[from] ChestError),
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("trial seed {seed}, symbol {symbol}: {source}")]
    Step {
        seed: u64,
        symbol: usize,
        #[source]
        source: StepError,
    },
}

/// Operating point of one packet.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrialPoint {
    pub snr_db: f64,
    /// Users active from the first symbol.
    pub users: usize,
}

impl TrialPoint {
    pub fn nominal(cfg: &ScenarioConfig) -> Self {
        Self {
            snr_db: cfg.snr_points()[0],
            users: cfg.users,
        }
    }
}

/// Per-symbol scoring of one receiver over one packet.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    /// Algorithm label, `"ccm"`, or `"ccm-rx1"` for receive antenna 1 alone.
    pub label: String,
    /// Bit errors (0, 1 or 2) of each symbol of the desired user.
    pub errors: Vec<u8>,
    /// Channel-estimate MSE after each block; empty for receivers without an estimator.
    pub mse: Vec<f64>,
}

impl Trace {
    fn new(label: String) -> Self {
        Self {
            label,
            errors: Vec::new(),
            mse: Vec::new(),
        }
    }

    pub fn bit_errors(&self) -> u64 {
        self.errors.iter().map(|&e| u64::from(e)).sum()
    }

    /// Bit error rate over symbols `[from, to)`.
    pub fn ber(&self, from: usize, to: usize) -> f64 {
        let to = to.min(self.errors.len());
        if to <= from {
            return 0.0;
        }
        let errs: u64 = self.errors[from..to].iter().map(|&e| u64::from(e)).sum();
        errs as f64 / (2 * (to - from)) as f64
    }
}

/// Everything recorded from one packet.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialOutcome {
    pub seed: u64,
    pub point: TrialPoint,
    pub traces: Vec<Trace>,
}

impl TrialOutcome {
    pub fn trace(&self, label: &str) -> Option<&Trace> {
        self.traces.iter().find(|t| t.label == label)
    }
}

/// Transmit side of one packet.
struct Packet {
    layout: StbcLayout,
    codes: SpreadingSet,
    channels: Vec<ChannelRealization>,
    amplitudes: Vec<Vec<f64>>,
    symbols: Vec<Vec<C64>>,
}

fn draw_packet(cfg: &ScenarioConfig, point: TrialPoint, rng: &mut ChaCha8Rng) -> Result<Packet, AirlinkError> {
    let layout = cfg.layout();
    let nt = layout.tx_antennas();
    let blocks = cfg.packet / nt;
    let total_users = point.users + cfg.dynamic_events.iter().map(|e| e.users_added).sum::<usize>();

    let codes = gen_spreading_set(total_users, cfg.chips, nt, rng.random());
    let model = ChannelModel::draw(layout, cfg.rx_antennas, cfg.lp, &cfg.power_profile_db, cfg.fdt, rng)?;
    let channels = if model.is_static() {
        vec![model.realization_at(0.0); blocks]
    } else {
        (0..blocks).map(|b| model.realization_at((b * nt) as f64)).collect()
    };

    // Desired user at unit amplitude; interferers log-normal around it.
    let draw_row = |active: usize, spread_db: f64, rng: &mut ChaCha8Rng| {
        let normal = Normal::new(0.0, spread_db).expect("validated spread");
        (0..total_users)
            .map(|k| match k {
                0 => 1.0,
                k if k < active => 10f64.powf(normal.sample(rng) / 20.0),
                _ => 0.0,
            })
            .collect::<Vec<f64>>()
    };
    let mut events = cfg.dynamic_events.clone();
    events.sort_by_key(|e| e.symbol_index);
    let mut active = point.users;
    let mut row = draw_row(active, cfg.interferer_spread_db, rng);
    let mut amplitudes = Vec::with_capacity(blocks);
    let mut next = events.iter().peekable();
    for b in 0..blocks {
        while let Some(e) = next.next_if(|e| e.symbol_index / nt <= b) {
            active += e.users_added;
            row = draw_row(active, e.new_spread_db, rng);
        }
        amplitudes.push(row.clone());
    }

    let symbols = (0..total_users)
        .map(|_| (0..blocks * nt).map(|_| random_qpsk(rng)).collect())
        .collect();
    Ok(Packet {
        layout,
        codes,
        channels,
        amplitudes,
        symbols,
    })
}

/// Decision-directed amplitude of every antenna and slot, used for MRC.
struct Combiner {
    mode: CombinerMode,
    amplitudes: Vec<Vec<f64>>,
}

impl Combiner {
    fn new(mode: CombinerMode, antennas: usize, slots: usize) -> Self {
        Self {
            mode,
            amplitudes: vec![vec![1.0; slots]; antennas],
        }
    }

    fn combine(&mut self, z: &[Vec<C64>]) -> Vec<C64> {
        let cfg = match self.mode {
            CombinerMode::Egc => CombinerConfig::egc(z.len(), z[0].len()),
            CombinerMode::Mrc => CombinerConfig::mrc(&self.amplitudes),
        };
        let out = combine(z, &cfg);
        let lam = AMPLITUDE_SMOOTHING;
        for (zm, am) in z.iter().zip(&mut self.amplitudes) {
            for ((&zs, &os), a) in zm.iter().zip(&out).zip(am.iter_mut()) {
                let projected = (zs * detect(os).conj()).re / std::f64::consts::SQRT_2;
                *a = lam * *a + (1.0 - lam) * projected.max(0.0);
            }
        }
        out
    }
}

struct BlindAntenna {
    receiver: ReceiverState,
    estimator: ChannelEstimatorState,
}

enum Detector {
    Blind(Vec<BlindAntenna>),
    Trained(Vec<TrainedState>),
    Mmse {
        filters: Vec<Vec<ComplexVector>>,
        key: Option<usize>,
    },
}

struct Pipeline {
    algorithm: Algorithm,
    detector: Detector,
    combiner: Combiner,
}

/// Unit-norm space-time channel of every receive antenna.
fn true_channels(ch: &ChannelRealization) -> Vec<ComplexVector> {
    (0..ch.rx_antennas())
        .map(|m| {
            let g = ch.stacked(m);
            g.normalized().unwrap_or(g)
        })
        .collect()
}

impl Pipeline {
    fn new(
        algorithm: Algorithm,
        cfg: &ScenarioConfig,
        signature: &UserSignature,
        dim: usize,
        truth: &[ComplexVector],
    ) -> Result<Self, StepError> {
        let slots = cfg.layout().tx_antennas();
        let params = cfg.rls_params();
        let detector = match algorithm {
            Algorithm::Ccm | Algorithm::Cmv => {
                let criterion = if algorithm == Algorithm::Ccm {
                    BlindCriterion::Ccm
                } else {
                    BlindCriterion::Cmv
                };
                let antennas = truth
                    .iter()
                    .map(|g| {
                        let mut estimator = match cfg.channel_estimate {
                            ChannelEstimate::Blind => ChannelEstimatorState::new(g.len()),
                            ChannelEstimate::Ideal => ChannelEstimatorState::from_estimate(g.clone()),
                        };
                        estimator.set_reference(g.clone());
                        let receiver = ReceiverState::new(criterion, signature, estimator.ghat(), params)?;
                        Ok(BlindAntenna { receiver, estimator })
                    })
                    .collect::<Result<Vec<_>, ReceiverError>>()?;
                Detector::Blind(antennas)
            }
            Algorithm::Trained => Detector::Trained(
                (0..truth.len())
                    .map(|_| TrainedState::new(dim, slots, &params))
                    .collect::<Result<_, _>>()?,
            ),
            Algorithm::Mmse => Detector::Mmse {
                filters: Vec::new(),
                key: None,
            },
        };
        Ok(Self {
            algorithm,
            detector,
            combiner: Combiner::new(cfg.combiner, truth.len(), slots),
        })
    }

    /// Soft outputs `[antenna][slot]` for one block, updating the receiver.
    /// Blind receivers also report the per-antenna channel MSE.
    fn step(
        &mut self,
        ctx: &BlockContext<'_>,
        y: &[ComplexVector],
        sent: &[C64],
    ) -> Result<(Vec<Vec<C64>>, Option<Vec<f64>>), StepError> {
        match &mut self.detector {
            Detector::Blind(antennas) => {
                let mut z = Vec::with_capacity(antennas.len());
                let mut mse = Vec::with_capacity(antennas.len());
                for ((ant, ym), g) in antennas.iter_mut().zip(y).zip(ctx.truth) {
                    z.push(ant.receiver.absorb(ym)?);
                    match ctx.cfg.channel_estimate {
                        ChannelEstimate::Blind => {
                            let gamma_bar = ant.receiver.conjugate().map(|c| c.gamma());
                            channel_rls_step(&mut ant.estimator, ant.receiver.direct().gamma(), gamma_bar)?;
                            ant.estimator.set_reference(g.clone());
                        }
                        ChannelEstimate::Ideal => ant.estimator = ChannelEstimatorState::from_estimate(g.clone()),
                    }
                    ant.receiver.refresh(ant.estimator.ghat())?;
                    mse.push(channel_mse(ant.estimator.ghat(), g));
                }
                Ok((z, Some(mse)))
            }
            Detector::Trained(states) => {
                let z = states
                    .iter_mut()
                    .zip(y)
                    .map(|(s, ym)| trained_rls_step(s, ym, Some(sent)))
                    .collect::<Result<_, _>>()?;
                Ok((z, None))
            }
            Detector::Mmse { filters, key } => {
                if *key != Some(ctx.statistics_key) {
                    *filters = ctx.mmse_filters()?;
                    *key = Some(ctx.statistics_key);
                }
                let z = filters
                    .iter()
                    .zip(y)
                    .map(|(ws, ym)| ws.iter().map(|w| w.dot(ym)).collect())
                    .collect();
                Ok((z, None))
            }
        }
    }
}

/// Quantities shared by every pipeline while processing one block.
struct BlockContext<'a> {
    cfg: &'a ScenarioConfig,
    packet: &'a Packet,
    signature: &'a UserSignature,
    block: usize,
    noise_var: f64,
    truth: &'a [ComplexVector],
    /// Changes whenever the received statistics do.
    statistics_key: usize,
}

impl BlockContext<'_> {
    fn mmse_filters(&self) -> Result<Vec<Vec<ComplexVector>>, StepError> {
        let p = self.packet;
        let ch = &p.channels[self.block];
        let amps = &p.amplitudes[self.block];
        let sigma2 = self.noise_var.max(MMSE_NOISE_FLOOR);
        (0..self.cfg.rx_antennas)
            .map(|m| {
                let responses = symbol_responses(p.layout, &p.codes, self.cfg.lp, ch, amps, m)?;
                let dim = self.signature.direct.rows();
                let r = exact_covariance(&responses, sigma2, dim);
                Ok(mmse_oracle(&r, self.signature, &ch.stacked(m), amps[0])?)
            })
            .collect()
    }
}

/// Runs one packet through every configured receiver.
///
/// An infinite `snr_db` gives a noise-free packet.
pub fn run_trial(cfg: &ScenarioConfig, seed: u64, point: TrialPoint) -> Result<TrialOutcome, RunError> {
    run_trial_with(cfg, seed, point, &cfg.algorithms())
}

/// [`run_trial`] restricted to `algorithms`.
pub fn run_trial_with(
    cfg: &ScenarioConfig,
    seed: u64,
    point: TrialPoint,
    algorithms: &[Algorithm],
) -> Result<TrialOutcome, RunError> {
    let at = |symbol: usize| move |source: StepError| RunError::Step { seed, symbol, source };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let packet = draw_packet(cfg, point, &mut rng).map_err(|e| at(0)(e.into()))?;
    let noise_var = noise_variance(point.snr_db, 1.0);
    let frame = Frame {
        layout: packet.layout,
        codes: &packet.codes,
        lp: cfg.lp,
        channels: &packet.channels,
        amplitudes: &packet.amplitudes,
        symbols: &packet.symbols,
    };
    let stream = synthesize_stream(&frame, noise_var, &mut rng).map_err(|e| at(0)(e.into()))?;
    let signature = user_signature(packet.layout, &packet.codes, 0, cfg.lp);
    let dim = frame.block_len();
    let nt = packet.layout.tx_antennas();
    let split = cfg.rx_antennas > 1;
    let static_channel = packet.channels.windows(2).all(|w| w[0] == w[1]);

    let mut truth = true_channels(&packet.channels[0]);
    let mut pipelines = algorithms
        .iter()
        .map(|&a| Pipeline::new(a, cfg, &signature, dim, &truth))
        .collect::<Result<Vec<_>, _>>()
        .map_err(at(0))?;
    let mut traces: Vec<(Trace, Option<Trace>)> = algorithms
        .iter()
        .map(|a| (Trace::new(a.label().to_string()), split.then(|| Trace::new(format!("{}-rx1", a.label())))))
        .collect();

    let mut key = 0;
    for (b, rx) in stream.iter().enumerate() {
        if b > 0 {
            let channel_moved = !static_channel;
            if channel_moved {
                truth = true_channels(&packet.channels[b]);
            }
            if channel_moved || packet.amplitudes[b] != packet.amplitudes[b - 1] {
                key += 1;
            }
        }
        let ctx = BlockContext {
            cfg,
            packet: &packet,
            signature: &signature,
            block: b,
            noise_var,
            truth: &truth,
            statistics_key: key,
        };
        let sent = &rx.symbols[0];
        for (pipe, (full, first)) in pipelines.iter_mut().zip(&mut traces) {
            let (z, mse) = pipe.step(&ctx, &rx.y, sent).map_err(at(b * nt))?;
            let combined = pipe.combiner.combine(&z);
            full.errors.extend(combined.iter().zip(sent).map(|(&zc, &s)| bit_errors(zc, s) as u8));
            if let Some(mse) = &mse {
                full.mse.push(mse.iter().sum::<f64>() / mse.len() as f64);
            }
            if let Some(first) = first {
                first.errors.extend(z[0].iter().zip(sent).map(|(&zc, &s)| bit_errors(zc, s) as u8));
                if let Some(mse) = &mse {
                    first.mse.push(mse[0]);
                }
            }
            debug_assert_eq!(pipe.algorithm.is_blind(), mse.is_some());
        }
    }

    let mut out = Vec::new();
    for (full, first) in traces {
        out.push(full);
        out.extend(first);
    }
    Ok(TrialOutcome {
        seed,
        point,
        traces: out,
    })
}

/// Exact statistics of the first received block of the packet drawn by `seed`.
#[derive(Clone, Debug)]
pub struct BlockModel {
    pub layout: StbcLayout,
    pub responses: Vec<SymbolResponse>,
    pub signature: UserSignature,
    /// Unnormalized space-time channel of the desired user.
    pub g: ComplexVector,
    pub noise_var: f64,
    /// `E[y yᴴ]`.
    pub covariance: ComplexMatrix,
}

/// [`BlockModel`] at receive antenna `rx`; used by the analysis commands.
pub fn first_block_model(cfg: &ScenarioConfig, seed: u64, point: TrialPoint, rx: usize) -> Result<BlockModel, RunError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let at = |source: StepError| RunError::Step { seed, symbol: 0, source };
    let packet = draw_packet(cfg, point, &mut rng).map_err(|e| at(e.into()))?;
    let noise_var = noise_variance(point.snr_db, 1.0);
    let ch = &packet.channels[0];
    let responses =
        symbol_responses(packet.layout, &packet.codes, cfg.lp, ch, &packet.amplitudes[0], rx).map_err(|e| at(e.into()))?;
    let signature = user_signature(packet.layout, &packet.codes, 0, cfg.lp);
    let covariance = exact_covariance(&responses, noise_var, signature.direct.rows());
    Ok(BlockModel {
        layout: packet.layout,
        responses,
        signature,
        g: ch.stacked(rx),
        noise_var,
        covariance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xpcli::scenario::OneOrMany;

    fn small() -> ScenarioConfig {
        ScenarioConfig {
            users: 3,
            chips: 8,
            lp: 3,
            packet: 200,
            receiver_mode: OneOrMany::Many(Algorithm::ALL.to_vec()),
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = small();
        let a = run_trial(&cfg, 5, TrialPoint::nominal(&cfg)).unwrap();
        let b = run_trial(&cfg, 5, TrialPoint::nominal(&cfg)).unwrap();
        assert_eq!(a, b);
        let c = run_trial(&cfg, 6, TrialPoint::nominal(&cfg)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn traces_cover_every_symbol() {
        let cfg = ScenarioConfig {
            rx_antennas: 2,
            ..small()
        };
        let out = run_trial(&cfg, 1, TrialPoint::nominal(&cfg)).unwrap();
        assert_eq!(out.traces.len(), 8);
        for t in &out.traces {
            assert_eq!(t.errors.len(), cfg.packet, "{}", t.label);
            let blind = t.label.starts_with("ccm") || t.label.starts_with("cmv");
            assert_eq!(t.mse.len(), if blind { cfg.packet / 2 } else { 0 }, "{}", t.label);
        }
        assert!(out.trace("mmse-rx1").is_some());
    }

    #[test]
    fn noise_free_single_user_is_error_free() {
        let cfg = ScenarioConfig {
            users: 1,
            channel_estimate: ChannelEstimate::Ideal,
            ..small()
        };
        let point = TrialPoint {
            snr_db: f64::INFINITY,
            users: 1,
        };
        let out = run_trial(&cfg, 3, point).unwrap();
        for t in &out.traces {
            assert_eq!(t.ber(100, cfg.packet), 0.0, "{}", t.label);
        }
    }

    #[test]
    fn events_activate_users() {
        let cfg = ScenarioConfig {
            dynamic_events: vec![crate::xpcli::scenario::DynamicEvent {
                symbol_index: 100,
                users_added: 2,
                new_spread_db: 6.0,
            }],
            ..small()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = draw_packet(&cfg, TrialPoint::nominal(&cfg), &mut rng).unwrap();
        assert_eq!(p.codes.users(), 5);
        assert_eq!(p.amplitudes[49][3], 0.0);
        assert_eq!(p.amplitudes[49][4], 0.0);
        assert!(p.amplitudes[50][3] > 0.0 && p.amplitudes[50][4] > 0.0);
        assert_eq!(p.amplitudes[50][0], 1.0);
    }
}
