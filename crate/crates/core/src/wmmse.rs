//! Beamforming and common-rate optimization at fixed RIS phases: alternating
//! MMSE equalizer/weight updates with an SCA-linearized convex subproblem
//! over the precoders and the common-rate vector.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::ao::StreamConfig;
use crate::channel::{ChannelSet, PhaseShifts};
use crate::conic::{
    solve, ComplexExpr, ConicProgram, Constraint, LinExpr, Sense, SolveSettings, SolveStatus,
};
use crate::error::{Error, Result};
use crate::metrics::{self, TransmitDesign, FEAS_TOL};
use crate::scenario::ScenarioConfig;

/// MMSE equalizers and MSE weights per IR, for the common and private
/// streams.
#[derive(Debug, Clone)]
pub struct EqualizerWeights {
    pub g_common: Vec<Complex64>,
    pub g_private: Vec<Complex64>,
    pub w_common: Vec<f64>,
    pub w_private: Vec<f64>,
}

/// MSE of the common (resp. private) stream at IR k for a given equalizer:
/// ε = |g|² T − 2ℜ(g · h^H p) + 1, with T the total received power at the
/// corresponding decoding stage.
pub fn mse_common(
    eff_ir: &[DVector<Complex64>],
    d: &TransmitDesign,
    k: usize,
    noise: f64,
    g: Complex64,
) -> f64 {
    let h = &eff_ir[k];
    let t: f64 = h.dotc(&d.common).norm_sqr()
        + d.private.iter().map(|p| h.dotc(p).norm_sqr()).sum::<f64>()
        + noise;
    g.norm_sqr() * t - 2.0 * (g * h.dotc(&d.common)).re + 1.0
}

pub fn mse_private(
    eff_ir: &[DVector<Complex64>],
    d: &TransmitDesign,
    k: usize,
    noise: f64,
    g: Complex64,
) -> f64 {
    let h = &eff_ir[k];
    let t: f64 = d.private.iter().map(|p| h.dotc(p).norm_sqr()).sum::<f64>() + noise;
    g.norm_sqr() * t - 2.0 * (g * h.dotc(&d.private[k])).re + 1.0
}

/// Closed-form MMSE equalizers and optimal weights w = 1/ε^MMSE:
/// g_{c,k} = p_c^H h_k / T_{c,k}, g_k = p_k^H h_k / T_k,
/// ε^MMSE = 1 − |h^H p|² / T.
pub fn mmse_update(
    eff_ir: &[DVector<Complex64>],
    d: &TransmitDesign,
    noise: &[f64],
) -> Result<EqualizerWeights> {
    let k_count = eff_ir.len();
    let mut out = EqualizerWeights {
        g_common: Vec::with_capacity(k_count),
        g_private: Vec::with_capacity(k_count),
        w_common: Vec::with_capacity(k_count),
        w_private: Vec::with_capacity(k_count),
    };
    for k in 0..k_count {
        let h = &eff_ir[k];
        let private_power: f64 = d.private.iter().map(|p| h.dotc(p).norm_sqr()).sum();
        let s_c = h.dotc(&d.common).norm_sqr();
        let s_k = h.dotc(&d.private[k]).norm_sqr();
        let t_c = s_c + private_power + noise[k];
        let t_k = private_power + noise[k];
        if t_c <= 0.0 || t_k <= 0.0 {
            return Err(Error::Domain(
                "MMSE update needs positive received power (zero channel and noise)".into(),
            ));
        }
        // dotc(a) = self^H a, so h^H p = h.dotc(p) and p^H h is its conjugate
        out.g_common.push(h.dotc(&d.common).conj() / t_c);
        out.g_private.push(h.dotc(&d.private[k]).conj() / t_k);
        let eps_c = 1.0 - s_c / t_c;
        let eps_k = 1.0 - s_k / t_k;
        out.w_common.push(1.0 / eps_c);
        out.w_private.push(1.0 / eps_k);
    }
    Ok(out)
}

/// First-order lower bound of |g^H p|² around p_anchor:
/// Ψ = 2ℜ(p_anchor^H g g^H p) − |g^H p_anchor|².
pub fn energy_taylor_bound(
    p: &DVector<Complex64>,
    p_anchor: &DVector<Complex64>,
    g: &DVector<Complex64>,
) -> f64 {
    let z_anchor = g.dotc(p_anchor); // g^H p_anchor
    let z = g.dotc(p);
    2.0 * (z_anchor.conj() * z).re - z_anchor.norm_sqr()
}

/// Variable handles into the built subproblem.
pub struct BeamProblem {
    pub program: ConicProgram,
    p_common: Option<crate::conic::CVec>,
    p_private: Vec<Option<crate::conic::CVec>>,
    f_energy: Vec<crate::conic::CVec>,
    /// X_k = −C_k; None where C_k is pinned to zero.
    x: Vec<Option<usize>>,
}

impl BeamProblem {
    pub fn extract(&self, res: &crate::conic::SolverResult, nt: usize) -> TransmitDesign {
        let common = match &self.p_common {
            Some(v) => res.cvec_value(v),
            None => DVector::zeros(nt),
        };
        let private = self
            .p_private
            .iter()
            .map(|v| match v {
                Some(v) => res.cvec_value(v),
                None => DVector::zeros(nt),
            })
            .collect();
        let energy = self.f_energy.iter().map(|v| res.cvec_value(v)).collect();
        let common_rates = self
            .x
            .iter()
            .map(|x| match x {
                Some(i) => (-res.value(*i)).max(0.0),
                None => 0.0,
            })
            .collect();
        TransmitDesign {
            common,
            private,
            energy,
            common_rates,
        }
    }
}

/// Build the convex beamforming subproblem: minimize Σ u_k (X_k + ξ_k) over
/// precoders and x, subject to the per-IR common-MSE constraint, the power
/// budget, x ≤ 0, and the Taylor-linearized sum-energy constraint at the
/// anchor precoders.
pub fn build_beam_problem(
    cfg: &ScenarioConfig,
    eff_ir: &[DVector<Complex64>],
    eff_er: &[DVector<Complex64>],
    eq: &EqualizerWeights,
    anchor: &TransmitDesign,
    streams: &StreamConfig,
) -> Result<BeamProblem> {
    let nt = cfg.num_tx_antennas;
    let k_count = cfg.num_irs;
    let zeta = cfg.conversion_efficiency;

    // refuse infeasible anchors: the linearized energy constraint is tight
    // at the anchor, so an energy- or power-infeasible anchor makes the
    // subproblem start from an infeasible point
    if anchor.power_used() > cfg.tx_power * (1.0 + FEAS_TOL) {
        return Err(Error::Infeasible(format!(
            "anchor exceeds power budget: {} > {}",
            anchor.power_used(),
            cfg.tx_power
        )));
    }
    if cfg.energy_threshold > 0.0 {
        let q = metrics::sum_energy(eff_er, anchor, zeta);
        if q < cfg.energy_threshold * (1.0 - FEAS_TOL) {
            return Err(Error::Infeasible(format!(
                "anchor misses energy threshold: {q} < {}",
                cfg.energy_threshold
            )));
        }
    }

    let mut prog = ConicProgram::new(Sense::Minimize);
    let p_common = streams.has_common.then(|| prog.add_cvec("p_c", nt));
    let p_private: Vec<_> = (0..k_count)
        .map(|k| {
            streams.private_active[k]
                .then(|| prog.add_cvec(&format!("p_{k}"), nt))
        })
        .collect();
    let f_energy: Vec<_> = (0..cfg.num_ers)
        .map(|j| prog.add_cvec(&format!("f_{j}"), nt))
        .collect();
    let x: Vec<Option<usize>> = (0..k_count)
        .map(|k| {
            (streams.has_common && !streams.common_rate_fixed_zero[k])
                .then(|| prog.add_var(format!("x[{k}]")))
        })
        .collect();

    // h_k^H p_i as a complex affine expression (None ⇒ the stream is off)
    let recv = |pv: &Option<crate::conic::CVec>, k: usize| -> Option<ComplexExpr> {
        pv.as_ref().map(|v| v.dot_conj(&eff_ir[k]))
    };

    let mut objective = LinExpr::default();
    for k in 0..k_count {
        let u = cfg.ir_weights[k];
        if let Some(xk) = x[k] {
            objective.add_term(xk, u);
        }
        if !streams.private_active[k] {
            continue;
        }
        // epigraph e_k ≥ ε_k; objective term u_k (w_k e_k − log2 w_k)
        let e_k = prog.add_var(format!("mse_priv[{k}]"));
        let w = eq.w_private[k];
        let g = eq.g_private[k];
        objective.add_term(e_k, u * w);
        objective.add_const(-u * w.log2());
        let mut squares = Vec::new();
        for (i, pv) in p_private.iter().enumerate() {
            if let Some(expr) = recv(pv, k) {
                let _ = i;
                squares.push(expr.scale(g));
            }
        }
        let own = recv(&p_private[k], k).expect("active private stream has a precoder");
        let rest = own.scale(g).real() * -2.0
            + LinExpr::constant(g.norm_sqr() * cfg.noise_power[k] + 1.0)
            - LinExpr::var(e_k);
        prog.add_constraint(format!("mse_priv[{k}]"), Constraint::QuadLe { squares, rest });
    }
    prog.set_objective(objective);

    // common-MSE constraints: w_{c,k} ε_{c,k} − log2 w_{c,k} ≤ Σ X + 1
    if streams.has_common {
        let pc = p_common.as_ref().expect("common stream has a precoder");
        for k in 0..k_count {
            let w = eq.w_common[k];
            let g = eq.g_common[k];
            let sw = w.sqrt();
            let mut squares = vec![pc.dot_conj(&eff_ir[k]).scale(g * sw)];
            for pv in &p_private {
                if let Some(expr) = recv(pv, k) {
                    squares.push(expr.scale(g * sw));
                }
            }
            let mut rest = pc.dot_conj(&eff_ir[k]).scale(g).real() * (-2.0 * w)
                + LinExpr::constant(w * (g.norm_sqr() * cfg.noise_power[k] + 1.0) - w.log2() - 1.0);
            for xk in x.iter().flatten() {
                rest.add_term(*xk, -1.0);
            }
            prog.add_constraint(format!("common_mse[{k}]"), Constraint::QuadLe { squares, rest });
        }
        for (k, xk) in x.iter().enumerate() {
            if let Some(xk) = xk {
                prog.add_constraint(format!("x_nonpos[{k}]"), Constraint::Le(LinExpr::var(*xk)));
            }
        }
    }

    // transmit power budget
    {
        let mut squares = Vec::new();
        for v in p_common
            .iter()
            .chain(p_private.iter().flatten())
            .chain(f_energy.iter())
        {
            for i in 0..v.len() {
                squares.push(v.entry(i));
            }
        }
        prog.add_constraint(
            "power",
            Constraint::QuadLe {
                squares,
                rest: LinExpr::constant(-cfg.tx_power),
            },
        );
    }

    // linearized sum-energy constraint in units of the threshold (vacuous
    // and dropped at E_th = 0)
    if cfg.energy_threshold > 0.0 {
        let sc = zeta / cfg.energy_threshold;
        let mut lhs = LinExpr::default();
        for (j, g) in eff_er.iter().enumerate() {
            let _ = j;
            let mut add_psi = |v: &crate::conic::CVec, col_anchor: &DVector<Complex64>| {
                let z = g.dotc(col_anchor); // g^H p̂
                let expr = v.dot_conj(g); // g^H p
                lhs = lhs.clone() + expr.scale(z.conj()).real() * (2.0 * sc)
                    + LinExpr::constant(-sc * z.norm_sqr());
            };
            if let Some(pc) = &p_common {
                add_psi(pc, &anchor.common);
            }
            for (i, pv) in p_private.iter().enumerate() {
                if let Some(v) = pv {
                    add_psi(v, &anchor.private[i]);
                }
            }
            for (i, v) in f_energy.iter().enumerate() {
                add_psi(v, &anchor.energy[i]);
            }
        }
        prog.add_constraint("energy", Constraint::Le(LinExpr::constant(1.0) - lhs));
    }

    Ok(BeamProblem {
        program: prog,
        p_common,
        p_private,
        f_energy,
        x,
    })
}

/// Per-outer-iteration record: WMMSE objective, exact WSR, power, energy.
#[derive(Debug, Clone)]
pub struct BeamTraceRow {
    pub outer_iteration: usize,
    pub inner_iterations: usize,
    pub wmmse: f64,
    pub wsr: f64,
    pub power_used: f64,
    pub sum_energy: f64,
}

#[derive(Debug, Clone)]
pub struct BeamformingRun {
    pub design: TransmitDesign,
    pub trace: Vec<BeamTraceRow>,
    pub converged: bool,
}

fn solve_settings(cfg: &ScenarioConfig) -> SolveSettings {
    SolveSettings {
        max_iters: cfg.algorithm.solver_max_iters,
        feas_tol: cfg.algorithm.solver_feas_tol,
        log_mode: cfg.algorithm.log_mode,
        verbose: false,
    }
}

/// WMMSE objective Σ u_k (X_k + ξ_k) at a design under fixed (w, g).
fn wmmse_value(
    cfg: &ScenarioConfig,
    eff_ir: &[DVector<Complex64>],
    d: &TransmitDesign,
    eq: &EqualizerWeights,
    streams: &StreamConfig,
) -> f64 {
    let mut v = 0.0;
    for k in 0..cfg.num_irs {
        let u = cfg.ir_weights[k];
        v -= u * d.common_rates[k];
        if streams.private_active[k] {
            let w = eq.w_private[k];
            let eps = mse_private(eff_ir, d, k, cfg.noise_power[k], eq.g_private[k]);
            v += u * (w * eps - w.log2());
        }
    }
    v
}

/// MRT initialization: private precoders matched to their IR channels, the
/// common precoder to the strongest IR, equal power split across the
/// information beams, energy precoders at zero. If the energy constraint is
/// missed, most of the budget is shifted to energy-matched MRT precoders.
pub fn initial_design(
    cfg: &ScenarioConfig,
    ch: &ChannelSet,
    phases: Option<&PhaseShifts>,
    streams: &StreamConfig,
) -> Result<TransmitDesign> {
    let eff_ir = ch.effective_ir_channels(phases)?;
    let nt = cfg.num_tx_antennas;

    let unit = |v: &DVector<Complex64>| -> DVector<Complex64> {
        let n = v.norm();
        if n > 0.0 {
            v / Complex64::new(n, 0.0)
        } else {
            DVector::zeros(v.len())
        }
    };

    let mut d = TransmitDesign::zeros(nt, cfg.num_irs, cfg.num_ers);
    if streams.has_common {
        let k_best = (0..cfg.num_irs)
            .max_by(|&a, &b| {
                eff_ir[a]
                    .norm_squared()
                    .partial_cmp(&eff_ir[b].norm_squared())
                    .unwrap()
            })
            .unwrap();
        d.common = unit(&eff_ir[k_best]);
    }
    for k in 0..cfg.num_irs {
        if streams.private_active[k] {
            d.private[k] = unit(&eff_ir[k]);
        }
    }
    // Energy precoders start at zero power: the information beams usually
    // already satisfy the threshold, and the WMMSE updates move power into
    // a private stream only very slowly at high SNR, so any budget parked
    // on F while the constraint is slack stays stranded there. The repair
    // step shifts power onto F only when the threshold is actually missed.
    let num_info = d.common.norm_squared().round() as usize
        + streams.private_active.iter().filter(|&&a| a).count();
    if num_info == 0 {
        return repair_initial_design(cfg, ch, phases, d, streams);
    }
    let per_col = (cfg.tx_power / num_info as f64).sqrt();
    d.common *= Complex64::new(per_col, 0.0);
    for p in &mut d.private {
        *p *= Complex64::new(per_col, 0.0);
    }

    repair_initial_design(cfg, ch, phases, d, streams)
}

/// Make an initialization power-feasible and, if possible, energy-feasible:
/// scale into the power budget, then shift power toward the energy
/// precoders when the sum-energy constraint is missed.
pub fn repair_initial_design(
    cfg: &ScenarioConfig,
    ch: &ChannelSet,
    phases: Option<&PhaseShifts>,
    mut d: TransmitDesign,
    streams: &StreamConfig,
) -> Result<TransmitDesign> {
    let eff_er = ch.effective_er_channels(phases)?;
    d.common_rates = vec![0.0; cfg.num_irs];

    let power = d.power_used();
    if power > cfg.tx_power {
        let scale = Complex64::new((cfg.tx_power / power).sqrt(), 0.0);
        d.common *= scale;
        for p in &mut d.private {
            *p *= scale;
        }
        for f in &mut d.energy {
            *f *= scale;
        }
    }

    if cfg.energy_threshold > 0.0 {
        let q = metrics::sum_energy(&eff_er, &d, cfg.conversion_efficiency);
        if q < cfg.energy_threshold {
            // energy-matched MRT for f_j, most of the budget on F
            let frac = cfg.algorithm.energy_repair_fraction;
            let info_power: f64 = d.common.norm_squared()
                + d.private.iter().map(|p| p.norm_squared()).sum::<f64>();
            if info_power > 0.0 {
                let s = Complex64::new(((1.0 - frac) * cfg.tx_power / info_power).sqrt(), 0.0);
                d.common *= s;
                for p in &mut d.private {
                    *p *= s;
                }
            }
            let per_er = (frac * cfg.tx_power / cfg.num_ers.max(1) as f64).sqrt();
            for (j, f) in d.energy.iter_mut().enumerate() {
                let g = &eff_er[j];
                let n = g.norm();
                *f = if n > 0.0 {
                    g * Complex64::new(per_er / n, 0.0)
                } else {
                    DVector::zeros(cfg.num_tx_antennas)
                };
            }
            let q = metrics::sum_energy(&eff_er, &d, cfg.conversion_efficiency);
            if q < cfg.energy_threshold * (1.0 - FEAS_TOL) {
                let report = metrics::check_feasibility(cfg, ch, phases, &d);
                return Err(Error::InfeasibleStart {
                    report: Box::new(report),
                });
            }
        }
    }
    let _ = streams;
    Ok(d)
}

/// Beamforming loop: repeat { inner SCA loop on the convex subproblem until the WMMSE
/// value settles; refresh (w, g) to their MMSE values; read c = −x } until
/// the exact WSR settles.
pub fn run_beamforming(
    cfg: &ScenarioConfig,
    ch: &ChannelSet,
    phases: Option<&PhaseShifts>,
    init: &TransmitDesign,
    streams: &StreamConfig,
) -> Result<BeamformingRun> {
    let eff_ir = ch.effective_ir_channels(phases)?;
    let eff_er = ch.effective_er_channels(phases)?;
    let eps = cfg.convergence_tol;
    let settings = solve_settings(cfg);

    let mut design = init.clone();
    let mut eq = mmse_update(&eff_ir, &design, &cfg.noise_power)?;
    let mut trace: Vec<BeamTraceRow> = Vec::new();
    let mut wsr_prev = f64::NEG_INFINITY;
    let mut converged = false;
    let mut first_solve = true;

    for outer in 1..=cfg.algorithm.max_outer_wmmse {
        let design_prev = design.clone();
        let mut wmmse_prev = wmmse_value(cfg, &eff_ir, &design, &eq, streams);
        let mut inner_done = 0usize;
        for _ in 1..=cfg.algorithm.max_inner_wmmse {
            let prob = build_beam_problem(cfg, &eff_ir, &eff_er, &eq, &design, streams)?;
            let res = solve(&prob.program, &settings)?;
            match res.status {
                SolveStatus::Optimal => {}
                SolveStatus::Infeasible if first_solve => {
                    let report = metrics::check_feasibility(cfg, ch, phases, &design);
                    return Err(Error::InfeasibleStart {
                        report: Box::new(report),
                    });
                }
                SolveStatus::Infeasible => {
                    return Err(Error::Infeasible(
                        "beamforming subproblem became infeasible mid-run".into(),
                    ))
                }
                // keep the best iterate found so far
                SolveStatus::IterationLimit | SolveStatus::NumericalFailure => break,
            }
            first_solve = false;
            let candidate = prob.extract(&res, cfg.num_tx_antennas);
            design.common = candidate.common;
            design.private = candidate.private;
            design.energy = candidate.energy;
            design.common_rates = candidate.common_rates;
            // the solver meets the common-rate split only to its own
            // tolerance; clamp the shares to the exact decodable rate
            if streams.has_common {
                let r_c = metrics::common_rate_bound(&eff_ir, &design, &cfg.noise_power);
                let total: f64 = design.common_rates.iter().sum();
                if total > r_c {
                    let scale = if total > 0.0 { (r_c / total).max(0.0) } else { 0.0 };
                    for c in &mut design.common_rates {
                        *c *= scale;
                    }
                }
            }
            inner_done += 1;
            let wmmse = res.objective_value;
            if (wmmse - wmmse_prev).abs() <= eps {
                wmmse_prev = wmmse;
                break;
            }
            wmmse_prev = wmmse;
        }

        eq = mmse_update(&eff_ir, &design, &cfg.noise_power)?;
        let private_rates: Vec<f64> = (0..cfg.num_irs)
            .map(|k| metrics::rate_private(&eff_ir, &design, k, cfg.noise_power[k]))
            .collect();
        let wsr = metrics::wsr(&cfg.ir_weights, &design.common_rates, &private_rates);
        // the exact WSR is nondecreasing in exact arithmetic; a numerical
        // dip means the solver noise floor is reached, so stop at the
        // incumbent instead of recording a decreasing step
        if wsr < wsr_prev {
            design = design_prev;
            converged = true;
            break;
        }
        trace.push(BeamTraceRow {
            outer_iteration: outer,
            inner_iterations: inner_done,
            wmmse: wmmse_prev,
            wsr,
            power_used: design.power_used(),
            sum_energy: metrics::sum_energy(&eff_er, &design, cfg.conversion_efficiency),
        });
        if wsr - wsr_prev <= eps {
            converged = true;
            break;
        }
        wsr_prev = wsr;
    }

    Ok(BeamformingRun {
        design,
        trace,
        converged,
    })
}
