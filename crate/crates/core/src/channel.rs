//! Random channel generation, path loss, RIS phase shifts, and
//! effective-channel assembly.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::scenario::{DiskRegion, ScenarioConfig};

/// Free-space power-law path loss: L · d^(−α).
pub fn path_loss(d: f64, alpha: f64, l_ref: f64) -> Result<f64> {
    if d <= 0.0 {
        return Err(Error::Domain(format!("path_loss distance must be > 0, got {d}")));
    }
    if l_ref <= 0.0 {
        return Err(Error::Domain(format!("path_loss reference gain must be > 0, got {l_ref}")));
    }
    Ok(l_ref * d.powf(-alpha))
}

/// RIS reflection coefficients s_n = e^{jθ_n}.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseShifts {
    theta: Vec<f64>,
    s: DVector<Complex64>,
}

impl PhaseShifts {
    /// Unit-modulus phases from angles (radians, wrapped into [0, 2π)).
    pub fn from_angles(theta: &[f64]) -> Self {
        let tau = std::f64::consts::TAU;
        let theta: Vec<f64> = theta.iter().map(|&t| t.rem_euclid(tau)).collect();
        let s = DVector::from_iterator(
            theta.len(),
            theta.iter().map(|&t| Complex64::from_polar(1.0, t)),
        );
        Self { theta, s }
    }

    /// θ = 0 everywhere (s = all-ones).
    pub fn zeros(n: usize) -> Self {
        Self::from_angles(&vec![0.0; n])
    }

    /// Project an arbitrary complex reflection vector onto unit modulus,
    /// s_n ← s_n / |s_n|. Near-zero entries project to 1.
    pub fn project(s: &DVector<Complex64>) -> Self {
        let theta: Vec<f64> = s
            .iter()
            .map(|z| if z.norm() < 1e-12 { 0.0 } else { z.arg() })
            .collect();
        Self::from_angles(&theta)
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn coefficients(&self) -> &DVector<Complex64> {
        &self.s
    }
}

/// One realization of every channel in the network.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// BS→RIS channel, N×N_t.
    pub bs_ris: DMatrix<Complex64>,
    /// Direct BS→IR channels, one N_t vector per IR.
    pub bs_ir: Vec<DVector<Complex64>>,
    /// Direct BS→ER channels, one N_t vector per ER.
    pub bs_er: Vec<DVector<Complex64>>,
    /// RIS→IR channels, one N vector per IR.
    pub ris_ir: Vec<DVector<Complex64>>,
    /// RIS→ER channels, one N vector per ER.
    pub ris_er: Vec<DVector<Complex64>>,
    pub ir_positions: Vec<[f64; 2]>,
    pub er_positions: Vec<[f64; 2]>,
}

/// Which receiver an effective channel is asked for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Receiver {
    Ir(usize),
    Er(usize),
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn draw_in_disk<R: Rng>(rng: &mut R, region: &DiskRegion) -> [f64; 2] {
    let u: f64 = rng.gen();
    let v: f64 = rng.gen();
    let r = region.radius * u.sqrt();
    let phi = std::f64::consts::TAU * v;
    [
        region.center[0] + r * phi.cos(),
        region.center[1] + r * phi.sin(),
    ]
}

/// CN(0, gain) sample: zero-mean circularly-symmetric complex Gaussian with
/// second moment `gain`.
fn cgauss<R: Rng>(rng: &mut R, gain: f64) -> Complex64 {
    let scale = (gain / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(scale * re, scale * im)
}

fn cvec<R: Rng>(rng: &mut R, n: usize, gain: f64) -> DVector<Complex64> {
    DVector::from_iterator(n, (0..n).map(|_| cgauss(rng, gain)))
}

/// Draw one i.i.d. Rayleigh realization of all channels. Deterministic in
/// (cfg.rng_seed, realization_index): the index selects an independent
/// ChaCha stream.
pub fn generate_channels(cfg: &ScenarioConfig, realization_index: u64) -> Result<ChannelSet> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    rng.set_stream(realization_index.wrapping_add(1));

    let nt = cfg.num_tx_antennas;
    let n = cfg.num_ris_elements;
    let alpha = &cfg.path_loss_exponents;
    let l = cfg.path_loss_ref;

    let ir_positions: Vec<[f64; 2]> = (0..cfg.num_irs)
        .map(|_| draw_in_disk(&mut rng, &cfg.ir_region))
        .collect();
    let er_positions: Vec<[f64; 2]> = (0..cfg.num_ers)
        .map(|_| draw_in_disk(&mut rng, &cfg.er_region))
        .collect();

    let d_bs_ris = dist(cfg.bs_position, cfg.ris_position);
    let bs_ris = if n > 0 {
        let gain = path_loss(d_bs_ris, alpha.bs_ris, l)?;
        DMatrix::from_iterator(n, nt, (0..n * nt).map(|_| cgauss(&mut rng, gain)))
    } else {
        DMatrix::zeros(0, nt)
    };

    let mut bs_ir = Vec::with_capacity(cfg.num_irs);
    let mut ris_ir = Vec::with_capacity(cfg.num_irs);
    for pos in &ir_positions {
        let g_d = path_loss(dist(cfg.bs_position, *pos), alpha.bs_ir, l)?;
        bs_ir.push(cvec(&mut rng, nt, g_d));
        let g_r = path_loss(dist(cfg.ris_position, *pos), alpha.ris_ir, l)?;
        ris_ir.push(cvec(&mut rng, n, g_r));
    }
    let mut bs_er = Vec::with_capacity(cfg.num_ers);
    let mut ris_er = Vec::with_capacity(cfg.num_ers);
    for pos in &er_positions {
        let g_d = path_loss(dist(cfg.bs_position, *pos), alpha.bs_er, l)?;
        bs_er.push(cvec(&mut rng, nt, g_d));
        let g_r = path_loss(dist(cfg.ris_position, *pos), alpha.ris_er, l)?;
        ris_er.push(cvec(&mut rng, n, g_r));
    }

    Ok(ChannelSet {
        bs_ris,
        bs_ir,
        bs_er,
        ris_ir,
        ris_er,
        ir_positions,
        er_positions,
    })
}

impl ChannelSet {
    pub fn num_irs(&self) -> usize {
        self.bs_ir.len()
    }

    pub fn num_ers(&self) -> usize {
        self.bs_er.len()
    }

    pub fn num_tx_antennas(&self) -> usize {
        self.bs_ris.ncols()
    }

    pub fn num_ris_elements(&self) -> usize {
        self.bs_ris.nrows()
    }

    /// Effective channel h_k (resp. g_j) as a column vector, so that
    /// h_k^H = h_{r,k}^H Θ H + h_{d,k}^H. With `phases` absent the RIS is
    /// bypassed and the direct channel is returned.
    pub fn effective_channel(
        &self,
        phases: Option<&PhaseShifts>,
        receiver: Receiver,
    ) -> Result<DVector<Complex64>> {
        let (direct, reflected) = match receiver {
            Receiver::Ir(k) => {
                if k >= self.num_irs() {
                    return Err(Error::ReceiverIndex {
                        index: k,
                        count: self.num_irs(),
                    });
                }
                (&self.bs_ir[k], &self.ris_ir[k])
            }
            Receiver::Er(j) => {
                if j >= self.num_ers() {
                    return Err(Error::ReceiverIndex {
                        index: j,
                        count: self.num_ers(),
                    });
                }
                (&self.bs_er[j], &self.ris_er[j])
            }
        };
        let mut h = direct.clone();
        if let Some(ph) = phases {
            if ph.len() != self.num_ris_elements() {
                return Err(Error::Domain(format!(
                    "phase vector has {} elements, RIS has {}",
                    ph.len(),
                    self.num_ris_elements()
                )));
            }
            // h += H^H Θ^H h_r, the conjugate transpose of h_r^H Θ H.
            let s = ph.coefficients();
            let scaled = DVector::from_iterator(
                ph.len(),
                reflected.iter().zip(s.iter()).map(|(r, sn)| sn.conj() * r),
            );
            h += self.bs_ris.adjoint() * scaled;
        }
        Ok(h)
    }

    /// Effective channels for all IRs.
    pub fn effective_ir_channels(
        &self,
        phases: Option<&PhaseShifts>,
    ) -> Result<Vec<DVector<Complex64>>> {
        (0..self.num_irs())
            .map(|k| self.effective_channel(phases, Receiver::Ir(k)))
            .collect()
    }

    /// Effective channels for all ERs.
    pub fn effective_er_channels(
        &self,
        phases: Option<&PhaseShifts>,
    ) -> Result<Vec<DVector<Complex64>>> {
        (0..self.num_ers())
            .map(|j| self.effective_channel(phases, Receiver::Er(j)))
            .collect()
    }
}
