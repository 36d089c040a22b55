//! RIS-assisted RSMA transmit design for SWIPT networks.
//!
//! A base station sends rate-split information streams to information
//! receivers and energy signals to energy receivers, assisted by a
//! reconfigurable intelligent surface. The library jointly designs the
//! transmit precoders, the common-rate allocation, and the RIS phase shifts
//! to maximize the weighted sum-rate subject to a sum harvested-energy
//! constraint and a transmit power budget, via alternating optimization over
//! two convex subproblems (WMMSE/SCA beamforming and penalized SCA phase
//! tuning). An experiments layer reproduces rate-energy tradeoffs, rate
//! regions, and convergence traces for RSMA/SDMA/NOMA with and without the
//! RIS.

pub mod ao;
pub mod channel;
pub mod conic;
pub mod error;
pub mod experiments;
pub mod metrics;
pub mod phase;
pub mod scenario;
pub mod wmmse;

pub use ao::{run_ao, AoRun, MultipleAccess, Strategy};
pub use channel::{generate_channels, path_loss, ChannelSet, PhaseShifts, Receiver};
pub use error::{Error, Result};
pub use metrics::{check_feasibility, summarize, FeasibilityReport, SolutionSummary, TransmitDesign};
pub use scenario::{LogMode, ScenarioConfig};
