//! Exact rate, energy, and feasibility evaluation for any candidate design.
//!
//! Everything here is a direct transcription of the system model: rates in
//! bits/s/Hz (log base 2), powers in watts. These functions are the ground
//! truth the iterative algorithms are checked against.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::channel::{ChannelSet, PhaseShifts};
use crate::scenario::ScenarioConfig;

/// Relative tolerance for feasibility verdicts.
pub const FEAS_TOL: f64 = 1e-6;

/// Precoders and common-rate allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmitDesign {
    /// Common-stream precoder p_c.
    pub common: DVector<Complex64>,
    /// Private precoders p_k, one per IR.
    pub private: Vec<DVector<Complex64>>,
    /// Energy precoders f_j, one per ER.
    pub energy: Vec<DVector<Complex64>>,
    /// Common-rate shares C_k, bits/s/Hz.
    pub common_rates: Vec<f64>,
}

impl TransmitDesign {
    pub fn zeros(nt: usize, num_irs: usize, num_ers: usize) -> Self {
        Self {
            common: DVector::zeros(nt),
            private: vec![DVector::zeros(nt); num_irs],
            energy: vec![DVector::zeros(nt); num_ers],
            common_rates: vec![0.0; num_irs],
        }
    }

    /// tr(PP^H) + tr(FF^H).
    pub fn power_used(&self) -> f64 {
        self.common.norm_squared()
            + self.private.iter().map(|p| p.norm_squared()).sum::<f64>()
            + self.energy.iter().map(|f| f.norm_squared()).sum::<f64>()
    }

    /// All precoder columns: p_c, p_1..p_K, f_1..f_J.
    pub fn all_columns(&self) -> impl Iterator<Item = &DVector<Complex64>> {
        std::iter::once(&self.common)
            .chain(self.private.iter())
            .chain(self.energy.iter())
    }
}

/// Per-constraint slacks and verdicts for the design constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub power_used: f64,
    pub power_ok: bool,
    pub sum_energy: f64,
    pub energy_ok: bool,
    /// min_k R_{c,k} − Σ C_k per IR (bits/s/Hz); negative means violated.
    pub common_rate_slack: Vec<f64>,
    pub common_ok: bool,
    pub nonneg_ok: bool,
    /// Largest relative violation over all constraints; 0 when feasible.
    pub worst_violation: f64,
}

impl FeasibilityReport {
    pub fn feasible(&self) -> bool {
        self.power_ok && self.energy_ok && self.common_ok && self.nonneg_ok
    }
}

/// A fully evaluated solution: design, phases, and every reported metric.
#[derive(Debug, Clone)]
pub struct SolutionSummary {
    pub design: TransmitDesign,
    pub phases: Option<PhaseShifts>,
    /// Private rates R_k.
    pub private_rates: Vec<f64>,
    /// Common-stream rates R_{c,k}.
    pub common_stream_rates: Vec<f64>,
    /// Totals R_{k,tot} = C_k + R_k.
    pub total_rates: Vec<f64>,
    pub wsr: f64,
    /// Harvested energy Q_j per ER, watts.
    pub harvested: Vec<f64>,
    pub sum_energy: f64,
}

/// |h^H p|² for an effective channel given as the conjugated column h.
fn signal_power(h: &DVector<Complex64>, p: &DVector<Complex64>) -> f64 {
    h.dotc(p).norm_sqr()
}

/// Private-stream rate R_k. Energy precoders are
/// excluded from the denominator: IRs cancel the known energy signals.
pub fn rate_private(
    eff_ir: &[DVector<Complex64>],
    d: &TransmitDesign,
    k: usize,
    noise: f64,
) -> f64 {
    let h = &eff_ir[k];
    let sig = signal_power(h, &d.private[k]);
    let interf: f64 = d
        .private
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != k)
        .map(|(_, p)| signal_power(h, p))
        .sum();
    (1.0 + sig / (interf + noise)).log2()
}

/// Common-stream rate R_{c,k} at IR k: all K private
/// streams interfere.
pub fn rate_common_at(
    eff_ir: &[DVector<Complex64>],
    d: &TransmitDesign,
    k: usize,
    noise: f64,
) -> f64 {
    let h = &eff_ir[k];
    let sig = signal_power(h, &d.common);
    let interf: f64 = d.private.iter().map(|p| signal_power(h, p)).sum();
    (1.0 + sig / (interf + noise)).log2()
}

/// R_c = min_k R_{c,k}, the decodable common rate.
pub fn common_rate_bound(eff_ir: &[DVector<Complex64>], d: &TransmitDesign, noise: &[f64]) -> f64 {
    (0..eff_ir.len())
        .map(|k| rate_common_at(eff_ir, d, k, noise[k]))
        .fold(f64::INFINITY, f64::min)
}

/// Harvested energy Q_j: every precoder contributes.
pub fn harvested_energy(
    eff_er: &[DVector<Complex64>],
    d: &TransmitDesign,
    j: usize,
    zeta: f64,
) -> f64 {
    let g = &eff_er[j];
    let total: f64 = d.all_columns().map(|p| signal_power(g, p)).sum();
    zeta * total
}

pub fn sum_energy(eff_er: &[DVector<Complex64>], d: &TransmitDesign, zeta: f64) -> f64 {
    (0..eff_er.len())
        .map(|j| harvested_energy(eff_er, d, j, zeta))
        .sum()
}

/// WSR = Σ u_k (C_k + R_k).
pub fn wsr(weights: &[f64], common_rates: &[f64], private_rates: &[f64]) -> f64 {
    weights
        .iter()
        .zip(common_rates)
        .zip(private_rates)
        .map(|((u, c), r)| u * (c + r))
        .sum()
}

/// Evaluate the design constraints (power, energy, common-rate split,
/// nonnegativity) with relative tolerance [`FEAS_TOL`].
pub fn check_feasibility(
    cfg: &ScenarioConfig,
    ch: &ChannelSet,
    phases: Option<&PhaseShifts>,
    d: &TransmitDesign,
) -> FeasibilityReport {
    let eff_ir = ch
        .effective_ir_channels(phases)
        .expect("dimension-consistent inputs");
    let eff_er = ch
        .effective_er_channels(phases)
        .expect("dimension-consistent inputs");

    let rel = |violation: f64, scale: f64| violation.max(0.0) / scale.abs().max(1e-12);
    let mut worst: f64 = 0.0;

    let power_used = d.power_used();
    let power_viol = rel(power_used - cfg.tx_power, cfg.tx_power);
    let power_ok = power_viol <= FEAS_TOL;
    worst = worst.max(power_viol);

    let sum_q = sum_energy(&eff_er, d, cfg.conversion_efficiency);
    let energy_viol = if cfg.energy_threshold > 0.0 {
        rel(cfg.energy_threshold - sum_q, cfg.energy_threshold)
    } else {
        0.0
    };
    let energy_ok = energy_viol <= FEAS_TOL;
    worst = worst.max(energy_viol);

    let c_sum: f64 = d.common_rates.iter().sum();
    let mut common_rate_slack = Vec::with_capacity(cfg.num_irs);
    let mut common_viol: f64 = 0.0;
    for k in 0..cfg.num_irs {
        let rck = rate_common_at(&eff_ir, d, k, cfg.noise_power[k]);
        common_rate_slack.push(rck - c_sum);
        common_viol = common_viol.max(rel(c_sum - rck, rck.max(1.0)));
    }
    let common_ok = common_viol <= FEAS_TOL;
    worst = worst.max(common_viol);

    let nonneg_viol = d
        .common_rates
        .iter()
        .map(|&c| rel(-c, 1.0))
        .fold(0.0, f64::max);
    let nonneg_ok = nonneg_viol <= FEAS_TOL;
    worst = worst.max(nonneg_viol);

    FeasibilityReport {
        power_used,
        power_ok,
        sum_energy: sum_q,
        energy_ok,
        common_rate_slack,
        common_ok,
        nonneg_ok,
        worst_violation: worst,
    }
}

/// Evaluate every reported metric for a candidate solution.
pub fn summarize(
    cfg: &ScenarioConfig,
    ch: &ChannelSet,
    phases: Option<&PhaseShifts>,
    d: &TransmitDesign,
) -> SolutionSummary {
    let eff_ir = ch
        .effective_ir_channels(phases)
        .expect("dimension-consistent inputs");
    let eff_er = ch
        .effective_er_channels(phases)
        .expect("dimension-consistent inputs");
    let private_rates: Vec<f64> = (0..cfg.num_irs)
        .map(|k| rate_private(&eff_ir, d, k, cfg.noise_power[k]))
        .collect();
    let common_stream_rates: Vec<f64> = (0..cfg.num_irs)
        .map(|k| rate_common_at(&eff_ir, d, k, cfg.noise_power[k]))
        .collect();
    let total_rates: Vec<f64> = d
        .common_rates
        .iter()
        .zip(&private_rates)
        .map(|(c, r)| c + r)
        .collect();
    let wsr_value = wsr(&cfg.ir_weights, &d.common_rates, &private_rates);
    let harvested: Vec<f64> = (0..cfg.num_ers)
        .map(|j| harvested_energy(&eff_er, d, j, cfg.conversion_efficiency))
        .collect();
    let sum_energy = harvested.iter().sum();
    SolutionSummary {
        design: d.clone(),
        phases: phases.cloned(),
        private_rates,
        common_stream_rates,
        total_rates,
        wsr: wsr_value,
        harvested,
        sum_energy,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::generate_channels;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit2(a: Complex64, b: Complex64) -> DVector<Complex64> {
        DVector::from_vec(vec![a, b])
    }

    fn one() -> Complex64 {
        Complex64::new(1.0, 0.0)
    }

    fn zero() -> Complex64 {
        Complex64::new(0.0, 0.0)
    }

    fn random_design<R: Rng>(rng: &mut R, nt: usize, k: usize, j: usize) -> TransmitDesign {
        let mut cv = |n: usize| {
            DVector::from_iterator(
                n,
                (0..n).map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)),
            )
        };
        TransmitDesign {
            common: cv(nt),
            private: (0..k).map(|_| cv(nt)).collect(),
            energy: (0..j).map(|_| cv(nt)).collect(),
            common_rates: (0..k).map(|_| 0.0).collect(),
        }
    }

    #[test]
    fn single_user_unit_rate() {
        // K=1, h=[1,0], p=[1,0], σ²=1 → R = log2(2) = 1
        let eff = vec![unit2(one(), zero())];
        let mut d = TransmitDesign::zeros(2, 1, 0);
        d.private[0] = unit2(one(), zero());
        assert_relative_eq!(rate_private(&eff, &d, 0, 1.0), 1.0);
    }

    #[test]
    fn zero_precoder_zero_rate() {
        let eff = vec![unit2(one(), zero())];
        let d = TransmitDesign::zeros(2, 1, 0);
        assert_eq!(rate_private(&eff, &d, 0, 1.0), 0.0);
        assert_eq!(rate_common_at(&eff, &d, 0, 1.0), 0.0);
        assert_eq!(common_rate_bound(&eff, &d, &[1.0]), 0.0);
    }

    #[test]
    fn rates_match_scalar_recomputation() {
        // Oracle: recompute the rate expressions term by term with scalar arithmetic.
        let cfg = ScenarioConfig::default();
        let ch = generate_channels(&cfg, 42).unwrap();
        let eff = ch.effective_ir_channels(None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let d = random_design(&mut rng, 2, 2, 2);
        for k in 0..2 {
            let h = &eff[k];
            let hp = |p: &DVector<Complex64>| {
                let mut acc = zero();
                for i in 0..2 {
                    acc += h[i].conj() * p[i];
                }
                acc.norm_sqr()
            };
            let noise = cfg.noise_power[k];
            let other = hp(&d.private[1 - k]);
            let own = hp(&d.private[k]);
            let expect_priv = (1.0 + own / (other + noise)).log2();
            assert_relative_eq!(
                rate_private(&eff, &d, k, noise),
                expect_priv,
                max_relative = 1e-12
            );
            let expect_common = (1.0 + hp(&d.common) / (own + other + noise)).log2();
            assert_relative_eq!(
                rate_common_at(&eff, &d, k, noise),
                expect_common,
                max_relative = 1e-12
            );
        }
        let expect_min = (0..2)
            .map(|k| rate_common_at(&eff, &d, k, cfg.noise_power[k]))
            .fold(f64::INFINITY, f64::min);
        assert_relative_eq!(
            common_rate_bound(&eff, &d, &cfg.noise_power),
            expect_min,
            max_relative = 1e-12
        );
    }

    #[test]
    fn single_ir_common_bound_is_its_own_rate() {
        let eff = vec![unit2(one(), zero())];
        let mut d = TransmitDesign::zeros(2, 1, 0);
        d.common = unit2(one(), zero());
        assert_relative_eq!(
            common_rate_bound(&eff, &d, &[1.0]),
            rate_common_at(&eff, &d, 0, 1.0)
        );
    }

    #[test]
    fn harvested_energy_examples() {
        let eff = vec![unit2(one(), zero())];
        let mut d = TransmitDesign::zeros(2, 0, 1);
        d.common = unit2(one(), zero());
        assert_relative_eq!(harvested_energy(&eff, &d, 0, 0.5), 0.5);
        assert_eq!(harvested_energy(&eff, &d, 0, 0.0), 0.0);
    }

    #[test]
    fn harvested_energy_matches_termwise_recomputation() {
        let cfg = ScenarioConfig::default();
        let ch = generate_channels(&cfg, 5).unwrap();
        let eff = ch.effective_er_channels(None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = random_design(&mut rng, 2, 2, 2);
        for j in 0..2 {
            let g = &eff[j];
            let gp = |p: &DVector<Complex64>| g.dotc(p).norm_sqr();
            let expect = 0.5
                * (gp(&d.common)
                    + gp(&d.private[0])
                    + gp(&d.private[1])
                    + gp(&d.energy[0])
                    + gp(&d.energy[1]));
            assert_relative_eq!(harvested_energy(&eff, &d, j, 0.5), expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn energy_monotone_in_precoder_scaling() {
        let cfg = ScenarioConfig::default();
        let ch = generate_channels(&cfg, 13).unwrap();
        let eff = ch.effective_er_channels(None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let d = random_design(&mut rng, 2, 2, 2);
        let mut scaled = d.clone();
        let gamma = Complex64::new(1.7, 0.0);
        scaled.common *= gamma;
        for p in &mut scaled.private {
            *p *= gamma;
        }
        for f in &mut scaled.energy {
            *f *= gamma;
        }
        for j in 0..2 {
            assert!(
                harvested_energy(&eff, &scaled, j, 0.5) >= harvested_energy(&eff, &d, j, 0.5)
            );
        }
    }

    #[test]
    fn wsr_examples() {
        assert_relative_eq!(wsr(&[1.0, 1.0], &[0.0, 0.0], &[1.0, 2.0]), 3.0);
        assert_relative_eq!(wsr(&[2.0, 1.0], &[0.5, 0.0], &[1.0, 1.0]), 4.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u: Vec<f64> = (0..4).map(|_| rng.gen::<f64>() + 0.1).collect();
        let c: Vec<f64> = (0..4).map(|_| rng.gen::<f64>()).collect();
        let r: Vec<f64> = (0..4).map(|_| rng.gen::<f64>()).collect();
        let direct: f64 = (0..4).map(|i| u[i] * (c[i] + r[i])).sum();
        assert_relative_eq!(wsr(&u, &c, &r), direct, max_relative = 1e-14);
    }

    #[test]
    fn rates_invariant_under_common_phase_rotation() {
        let cfg = ScenarioConfig::default();
        let ch = generate_channels(&cfg, 21).unwrap();
        let eff = ch.effective_ir_channels(None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = random_design(&mut rng, 2, 2, 2);
        let rot = Complex64::from_polar(1.0, 1.234);
        let mut rotated = d.clone();
        rotated.common *= rot;
        for p in &mut rotated.private {
            *p *= rot;
        }
        for k in 0..2 {
            assert_relative_eq!(
                rate_private(&eff, &d, k, cfg.noise_power[k]),
                rate_private(&eff, &rotated, k, cfg.noise_power[k]),
                max_relative = 1e-12
            );
            assert_relative_eq!(
                rate_common_at(&eff, &d, k, cfg.noise_power[k]),
                rate_common_at(&eff, &rotated, k, cfg.noise_power[k]),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn common_rate_below_interference_free_capacity() {
        let cfg = ScenarioConfig::default();
        let ch = generate_channels(&cfg, 33).unwrap();
        let eff = ch.effective_ir_channels(None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let d = random_design(&mut rng, 2, 2, 2);
            for k in 0..2 {
                let noise = cfg.noise_power[k];
                let cap = (1.0 + eff[k].dotc(&d.common).norm_sqr() / noise).log2();
                assert!(rate_common_at(&eff, &d, k, noise) <= cap + 1e-12);
            }
        }
    }

    #[test]
    fn feasibility_zero_design() {
        let mut cfg = ScenarioConfig::default();
        let ch = generate_channels(&cfg, 0).unwrap();
        let d = TransmitDesign::zeros(2, 2, 2);
        // E_th > 0: energy constraint violated
        let rep = check_feasibility(&cfg, &ch, None, &d);
        assert!(!rep.energy_ok);
        assert!(!rep.feasible());
        assert!(rep.worst_violation > 0.0);
        // E_th = 0: all-zero design is feasible
        cfg.energy_threshold = 0.0;
        let rep = check_feasibility(&cfg, &ch, None, &d);
        assert!(rep.feasible());
        assert_eq!(rep.worst_violation, 0.0);
    }
}
