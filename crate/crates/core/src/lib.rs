//! Link-level simulation of single-carrier frequency-domain equalization
//! (SC-FDE) over frequency-selective Rayleigh block-fading channels.
//!
//! The crate covers the channel and its circulant spectrum ([`spectrum`]),
//! MMSE/ZF equalization ([`equalizer`]), closed-form information measures and
//! the analytic diversity order ([`infotheory`]), Monte Carlo outage and
//! symbol-error sweeps with slope fitting ([`montecarlo`]), and numerical
//! checks of the underlying tail-probability results ([`oracles`]).

pub mod dft;
pub mod equalizer;
pub mod error;
pub mod infotheory;
pub mod montecarlo;
pub mod oracles;
pub mod rng;
pub mod spectrum;

pub use equalizer::{
    decision_sinr, equalize, fde_coefficients, residual_noise_stats, slicer, Constellation,
    EqualizerKind, ResidualNoiseStats,
};
pub use error::{Error, Result};
pub use infotheory::{
    analytic_diversity, mutual_info, outage_indicator, rate_intervals, rate_shift, union_bound_pep,
    DiversityReport, RateInterval, RateSpec, Regime,
};
pub use montecarlo::{
    estimate_outage, estimate_outage_rates, estimate_ser, fit_slope, CurvePoint, EstimatePoint,
    SlopeFit, SweepConfig, SweepResult, Target,
};
pub use num_complex::Complex64;
pub use rng::TrialStream;
pub use spectrum::{
    circulant_apply, cp_transmit, draw_channel, exponential_orders, frequency_response,
    ChannelTaps, ExponentialOrders, FrequencyResponse,
};
