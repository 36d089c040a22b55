//! Alternating optimization: the outer loop tying the beamforming and phase
//! subproblems together, plus the six strategy variants (RSMA/SDMA/NOMA,
//! each with or without the RIS).

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelSet, PhaseShifts};
use crate::error::{Error, Result};
use crate::metrics::{self, SolutionSummary, TransmitDesign};
use crate::phase::{self, PhaseOptimizationRun};
use crate::scenario::ScenarioConfig;
use crate::wmmse::{self, BeamformingRun};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MultipleAccess {
    Rsma,
    Sdma,
    Noma,
}

/// One of the six compared strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Strategy {
    pub multiple_access: MultipleAccess,
    pub ris_enabled: bool,
}

impl Strategy {
    pub const fn new(multiple_access: MultipleAccess, ris_enabled: bool) -> Self {
        Self {
            multiple_access,
            ris_enabled,
        }
    }

    pub const ALL: [Strategy; 6] = [
        Strategy::new(MultipleAccess::Rsma, true),
        Strategy::new(MultipleAccess::Rsma, false),
        Strategy::new(MultipleAccess::Sdma, true),
        Strategy::new(MultipleAccess::Sdma, false),
        Strategy::new(MultipleAccess::Noma, true),
        Strategy::new(MultipleAccess::Noma, false),
    ];

    pub fn label(&self) -> &'static str {
        match (self.multiple_access, self.ris_enabled) {
            (MultipleAccess::Rsma, true) => "RSMA+RIS",
            (MultipleAccess::Rsma, false) => "RSMA",
            (MultipleAccess::Sdma, true) => "SDMA+RIS",
            (MultipleAccess::Sdma, false) => "SDMA",
            (MultipleAccess::Noma, true) => "NOMA+RIS",
            (MultipleAccess::Noma, false) => "NOMA",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace(' ', "");
        Strategy::ALL
            .into_iter()
            .find(|st| st.label() == norm)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown strategy '{s}'")))
    }
}

/// Which streams exist under the current strategy.
///
/// SDMA drops the common stream entirely (R_c = 0). NOMA (two IRs) embeds
/// SC-SIC into the rate-splitting machinery: the weak IR's message rides
/// entirely on the common stream (its private precoder is removed and the
/// strong IR's common-rate share is pinned to zero), the strong IR keeps a
/// private stream decoded after the common one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamConfig {
    pub has_common: bool,
    /// Whether IR k transmits a private stream.
    pub private_active: Vec<bool>,
    /// Whether C_k is pinned to zero.
    pub common_rate_fixed_zero: Vec<bool>,
}

impl StreamConfig {
    pub fn rsma(num_irs: usize) -> Self {
        Self {
            has_common: true,
            private_active: vec![true; num_irs],
            common_rate_fixed_zero: vec![false; num_irs],
        }
    }

    pub fn sdma(num_irs: usize) -> Self {
        Self {
            has_common: false,
            private_active: vec![true; num_irs],
            common_rate_fixed_zero: vec![true; num_irs],
        }
    }

    /// Two-user NOMA with the given weak IR.
    pub fn noma(weak: usize) -> Self {
        let mut cfg = Self::rsma(2);
        cfg.private_active[weak] = false;
        cfg.common_rate_fixed_zero[1 - weak] = true;
        cfg
    }

    /// Stream layout for a strategy, given current effective IR channels
    /// (NOMA orders users by effective channel norm).
    pub fn for_strategy(
        strategy: Strategy,
        cfg: &ScenarioConfig,
        eff_ir: &[nalgebra::DVector<num_complex::Complex64>],
    ) -> Result<Self> {
        match strategy.multiple_access {
            MultipleAccess::Rsma => Ok(Self::rsma(cfg.num_irs)),
            MultipleAccess::Sdma => Ok(Self::sdma(cfg.num_irs)),
            MultipleAccess::Noma => {
                if cfg.num_irs != 2 {
                    return Err(Error::InvalidConfig(format!(
                        "NOMA requires exactly 2 IRs, scenario has {}",
                        cfg.num_irs
                    )));
                }
                let weak = if eff_ir[0].norm_squared() <= eff_ir[1].norm_squared() {
                    0
                } else {
                    1
                };
                Ok(Self::noma(weak))
            }
        }
    }

    /// Zero out whatever the strategy pins: used to sanitize warm starts.
    pub fn apply_to(&self, d: &mut TransmitDesign) {
        if !self.has_common {
            d.common.fill(num_complex::Complex64::new(0.0, 0.0));
        }
        for (k, active) in self.private_active.iter().enumerate() {
            if !active {
                d.private[k].fill(num_complex::Complex64::new(0.0, 0.0));
            }
        }
        for (k, fixed) in self.common_rate_fixed_zero.iter().enumerate() {
            if *fixed || !self.has_common {
                d.common_rates[k] = 0.0;
            }
        }
    }
}

/// How the RIS phases are initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseInit {
    Zeros,
    Random,
    /// Phase-align the BS→RIS→strongest-IR cascade elementwise.
    Aligned,
}

/// θ initialization for the alternating loop.
pub fn phase_initialization(
    cfg: &ScenarioConfig,
    ch: &ChannelSet,
    mode: PhaseInit,
) -> PhaseShifts {
    use rand::{Rng, SeedableRng};
    let n = cfg.num_ris_elements;
    match mode {
        PhaseInit::Zeros => PhaseShifts::zeros(n),
        PhaseInit::Random => {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.rng_seed ^ 0x9e3779b97f4a7c15);
            let theta: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * std::f64::consts::TAU).collect();
            PhaseShifts::from_angles(&theta)
        }
        PhaseInit::Aligned => {
            // strongest IR by direct-channel norm; MRT along its direct path
            let k_best = (0..ch.num_irs())
                .max_by(|&a, &b| {
                    ch.bs_ir[a]
                        .norm_squared()
                        .partial_cmp(&ch.bs_ir[b].norm_squared())
                        .unwrap()
                })
                .unwrap_or(0);
            let p_init = if ch.bs_ir[k_best].norm_squared() > 0.0 {
                ch.bs_ir[k_best].clone()
            } else {
                nalgebra::DVector::from_element(
                    ch.num_tx_antennas(),
                    num_complex::Complex64::new(1.0, 0.0),
                )
            };
            // θ_n = −arg(h_{r,n}^* (H p)_n): each reflected term adds in phase
            let hp = &ch.bs_ris * &p_init;
            let theta: Vec<f64> = (0..n)
                .map(|i| -(ch.ris_ir[k_best][i].conj() * hp[i]).arg())
                .collect();
            PhaseShifts::from_angles(&theta)
        }
    }
}

/// One outer-iteration record of the AO loop.
#[derive(Debug, Clone)]
pub struct AoTraceRow {
    pub outer_iteration: usize,
    pub wsr: f64,
    pub sum_energy: f64,
    pub beam_iterations: usize,
    pub phase_iterations: usize,
}

/// Result of one full AO run.
#[derive(Debug, Clone)]
pub struct AoRun {
    pub strategy: Strategy,
    pub solution: SolutionSummary,
    pub wsr_trace: Vec<f64>,
    pub trace: Vec<AoTraceRow>,
    pub beam_runs: Vec<BeamformingRun>,
    pub phase_runs: Vec<PhaseOptimizationRun>,
    pub converged: bool,
    pub outer_iterations: usize,
    pub wall_time: std::time::Duration,
}

/// Warm-start data: a previous solution whose design/phases seed this run.
#[derive(Debug, Clone)]
pub struct WarmStart {
    pub design: TransmitDesign,
    pub phases: Option<PhaseShifts>,
}

/// Alternate the beamforming and phase subproblems until the WSR settles
/// (|ΔWSR| ≤ ε) or the outer cap is hit. The incumbent solution is only
/// replaced by feasibility-checked improvements.
pub fn run_ao(
    cfg: &ScenarioConfig,
    ch: &ChannelSet,
    strategy: Strategy,
    warm: Option<&WarmStart>,
) -> Result<AoRun> {
    cfg.validate()?;
    let start = std::time::Instant::now();
    let eps = cfg.convergence_tol;
    let max_outer = cfg.algorithm.max_ao_iters;

    let mut phases: Option<PhaseShifts> = if strategy.ris_enabled && cfg.num_ris_elements > 0 {
        Some(match warm.and_then(|w| w.phases.clone()) {
            Some(p) => p,
            None => phase_initialization(cfg, ch, PhaseInit::Zeros),
        })
    } else {
        None
    };

    let mut wsr_trace: Vec<f64> = Vec::new();
    let mut trace: Vec<AoTraceRow> = Vec::new();
    let mut beam_runs: Vec<BeamformingRun> = Vec::new();
    let mut phase_runs: Vec<PhaseOptimizationRun> = Vec::new();

    // incumbent
    let mut best: Option<(TransmitDesign, Option<PhaseShifts>, f64)> = None;
    let mut converged = false;
    let mut outer = 0usize;
    let mut wsr_prev = f64::NEG_INFINITY;

    while outer < max_outer {
        outer += 1;
        let eff_ir = ch.effective_ir_channels(phases.as_ref())?;
        let streams = StreamConfig::for_strategy(strategy, cfg, &eff_ir)?;

        // Beamforming block at fixed phases.
        let init = match (&best, warm) {
            (Some((d, _, _)), _) => {
                let mut d = d.clone();
                streams.apply_to(&mut d);
                d
            }
            (None, Some(w)) => {
                let mut d = w.design.clone();
                streams.apply_to(&mut d);
                // warm design may be energy/power-stale for these phases
                wmmse::repair_initial_design(cfg, ch, phases.as_ref(), d, &streams)?
            }
            (None, None) => wmmse::initial_design(cfg, ch, phases.as_ref(), &streams)?,
        };
        let beam = wmmse::run_beamforming(cfg, ch, phases.as_ref(), &init, &streams)?;
        let mut design = beam.design.clone();
        let beam_iters = beam.trace.len();
        beam_runs.push(beam);

        // Phase block at fixed precoders.
        let mut phase_iters = 0usize;
        if let Some(current) = phases.clone() {
            let run = phase::run_phase_optimization(cfg, ch, &design, &current, &streams)?;
            phase_iters = run.trace.len();
            design.common_rates = run.common_rates.clone();
            phases = Some(run.phases.clone());
            phase_runs.push(run);
        }

        let summary = metrics::summarize(cfg, ch, phases.as_ref(), &design);
        let report = metrics::check_feasibility(cfg, ch, phases.as_ref(), &design);
        let wsr = summary.wsr;
        // numerical dips below the previous outer iterate terminate the
        // loop at the incumbent rather than entering the trace
        if wsr < wsr_prev && wsr_prev.is_finite() {
            converged = true;
            break;
        }
        wsr_trace.push(wsr);
        trace.push(AoTraceRow {
            outer_iteration: outer,
            wsr,
            sum_energy: summary.sum_energy,
            beam_iterations: beam_iters,
            phase_iterations: phase_iters,
        });

        if report.feasible() && best.as_ref().map_or(true, |(_, _, w)| wsr >= *w) {
            best = Some((design.clone(), phases.clone(), wsr));
        }

        if !strategy.ris_enabled || cfg.num_ris_elements == 0 {
            // no phase block: a single Algorithm-1 call is the whole run
            converged = true;
            break;
        }
        if wsr - wsr_prev <= eps {
            converged = true;
            break;
        }
        wsr_prev = wsr;
    }

    let (design, phases, _) = best.ok_or_else(|| {
        Error::NumericalFailure("AO produced no feasible incumbent".into())
    })?;
    let solution = metrics::summarize(cfg, ch, phases.as_ref(), &design);
    Ok(AoRun {
        strategy,
        solution,
        wsr_trace,
        trace,
        beam_runs,
        phase_runs,
        converged,
        outer_iterations: outer,
        wall_time: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::generate_channels;

    #[test]
    fn strategy_labels_roundtrip() {
        for s in Strategy::ALL {
            assert_eq!(Strategy::parse(s.label()).unwrap(), s);
        }
        assert!(Strategy::parse("OFDMA").is_err());
    }

    #[test]
    fn stream_configs() {
        let s = StreamConfig::sdma(2);
        assert!(!s.has_common);
        assert!(s.private_active.iter().all(|&a| a));
        let n = StreamConfig::noma(0);
        assert!(n.has_common);
        assert!(!n.private_active[0]);
        assert!(n.private_active[1]);
        assert!(n.common_rate_fixed_zero[1]);
        assert!(!n.common_rate_fixed_zero[0]);
    }

    #[test]
    fn phase_init_modes() {
        let cfg = ScenarioConfig::default();
        let ch = generate_channels(&cfg, 0).unwrap();
        let z = phase_initialization(&cfg, &ch, PhaseInit::Zeros);
        assert!(z
            .coefficients()
            .iter()
            .all(|s| (s - num_complex::Complex64::new(1.0, 0.0)).norm() < 1e-15));
        let r1 = phase_initialization(&cfg, &ch, PhaseInit::Random);
        let r2 = phase_initialization(&cfg, &ch, PhaseInit::Random);
        assert_eq!(r1, r2);
        let a = phase_initialization(&cfg, &ch, PhaseInit::Aligned);
        assert_eq!(a.len(), cfg.num_ris_elements);
    }

    #[test]
    fn aligned_init_single_element_phase_algebra() {
        // single IR, N = 1: θ_1 = −arg(h_{r,1}^* (H p_init)_1)
        let mut cfg = ScenarioConfig::default();
        cfg.num_irs = 1;
        cfg.noise_power = vec![cfg.noise_power[0]];
        cfg.ir_weights = vec![1.0];
        cfg.num_ris_elements = 1;
        let ch = generate_channels(&cfg, 2).unwrap();
        let a = phase_initialization(&cfg, &ch, PhaseInit::Aligned);
        let hp = &ch.bs_ris * &ch.bs_ir[0];
        let expect = (-(ch.ris_ir[0][0].conj() * hp[0]).arg())
            .rem_euclid(std::f64::consts::TAU);
        assert!((a.theta()[0] - expect).abs() < 1e-12);
    }
}
