//! Analytical per-device link metrics.
//!
//! For a device at slant distance `d` on spreading factor `k`:
//!
//! * `P_SNR = exp(-g(d) q_k sigma^2 / (P_t G_t G_r))` under unit-mean Rayleigh fading,
//! * `P_SIR = exp(-(2 N_k ToA_k / (T_p N_c)) 2F1(1, 2/eta; 1 + 2/eta; -d_max^eta / (delta d^eta)))`,
//! * `P_S = P_SNR P_SIR`, and `EPP = V I ToA_k / P_S`.
//!
//! `N_k` counts every device on SF `k`, the tagged device included. All math
//! is in linear units.

use crate::channel::{from_db, PathLoss};
use crate::exec::Execution;
use crate::quad;
use crate::scenario::{EndDevice, ScenarioConfig};
use crate::sf::{SpreadingFactor, NUM_SF};
use crate::special::hyp2f1_special;
use crate::{Error, Result};

/// Demodulation SNR thresholds for SF7..SF12, dB.
pub const SNR_THRESHOLDS_DB: [f64; NUM_SF] = [-6.0, -9.0, -12.0, -15.0, -17.5, -20.0];

/// Finite stand-in for an infinite EPP when it feeds a reward or a state.
pub const EPP_SENTINEL_J: f64 = 1e6;

/// Thermal noise density at room temperature, dBm/Hz.
pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;

const PREAMBLE_SYMBOLS: f64 = 8.0;
/// Coding rate 4/5.
const CODING_RATE: u32 = 1;

/// LoRa airtime with an 8-symbol preamble, explicit header, CRC on, coding
/// rate 4/5, and low-data-rate optimisation for SF11/SF12 at 125 kHz or below.
pub fn time_on_air(sf: SpreadingFactor, payload_bytes: u32, bandwidth_hz: f64) -> f64 {
    let sf_bits = sf.value() as i64;
    let symbol_s = 2f64.powi(sf_bits as i32) / bandwidth_hz;
    let ldro = (sf_bits >= 11 && bandwidth_hz <= 125e3) as i64;
    let crc = 1i64;
    let implicit_header = 0i64;
    let numerator = 8 * payload_bytes as i64 - 4 * sf_bits + 28 + 16 * crc - 20 * implicit_header;
    let denominator = 4 * (sf_bits - 2 * ldro);
    let blocks = if numerator > 0 {
        (numerator + denominator - 1) / denominator
    } else {
        0
    };
    let payload_symbols = 8 + blocks * (CODING_RATE as i64 + 4);
    (PREAMBLE_SYMBOLS + 4.25 + payload_symbols as f64) * symbol_s
}

/// Receiver noise power in watts: `-174 dBm/Hz + 10 log10(B) + NF`.
pub fn noise_power(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    dbm_to_watts(THERMAL_NOISE_DBM_PER_HZ + 10.0 * bandwidth_hz.log10() + noise_figure_db)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    from_db(dbm - 30.0)
}

/// Per-SF thresholds and airtimes for one configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct SfTable {
    pub snr_threshold_db: [f64; NUM_SF],
    pub toa_s: [f64; NUM_SF],
}

impl SfTable {
    pub fn new(payload_bytes: u32, bandwidth_hz: f64) -> Self {
        Self {
            snr_threshold_db: SNR_THRESHOLDS_DB,
            toa_s: SpreadingFactor::ALL.map(|sf| time_on_air(sf, payload_bytes, bandwidth_hz)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkMetrics {
    pub p_snr: f64,
    pub p_sir: f64,
    pub p_s: f64,
    pub epp_j: f64,
}

/// A network-wide SF assignment with its per-SF device counts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assignment {
    sfs: Vec<SpreadingFactor>,
    counts: [usize; NUM_SF],
}

impl Assignment {
    pub fn new(sfs: Vec<SpreadingFactor>) -> Self {
        let mut counts = [0; NUM_SF];
        for sf in &sfs {
            counts[sf.index()] += 1;
        }
        Self { sfs, counts }
    }

    pub fn uniform(n: usize, sf: SpreadingFactor) -> Self {
        Self::new(vec![sf; n])
    }

    pub fn from_devices(devices: &[EndDevice]) -> Self {
        Self::new(devices.iter().map(|d| d.sf).collect())
    }

    pub fn len(&self) -> usize {
        self.sfs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sfs.is_empty()
    }

    pub fn sf(&self, device: usize) -> SpreadingFactor {
        self.sfs[device]
    }

    pub fn as_slice(&self) -> &[SpreadingFactor] {
        &self.sfs
    }

    pub fn counts(&self) -> [usize; NUM_SF] {
        self.counts
    }

    pub fn shares(&self) -> [f64; NUM_SF] {
        let n = self.sfs.len().max(1) as f64;
        self.counts.map(|c| c as f64 / n)
    }

    pub fn apply_to(&self, devices: &mut [EndDevice]) {
        for (d, sf) in devices.iter_mut().zip(&self.sfs) {
            d.sf = *sf;
        }
    }
}

/// Constants of the link model that do not depend on the deployment.
#[derive(Clone, Debug)]
pub struct LinkModel {
    pub path_loss: PathLoss,
    pub sf_table: SfTable,
    noise_w: f64,
    /// `P_t G_t G_r` in watts.
    eirp_w: f64,
    q_lin: [f64; NUM_SF],
    /// `2 ToA_k / (T_p N_c)`.
    load_coef: [f64; NUM_SF],
    energy_per_tx_j: [f64; NUM_SF],
    delta: f64,
    d_max: f64,
    eta: f64,
}

impl LinkModel {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let radio = &config.radio;
        let sf_table = SfTable::new(config.network.payload_bytes, radio.bandwidth_hz);
        let period = config.network.report_period_s;
        let channels = radio.n_channels as f64;
        Ok(Self {
            path_loss: PathLoss::new(config)?,
            noise_w: noise_power(radio.bandwidth_hz, radio.noise_figure_db),
            eirp_w: dbm_to_watts(radio.tx_power_dbm + radio.gain_tx_dbi + radio.gain_rx_dbi),
            q_lin: SNR_THRESHOLDS_DB.map(from_db),
            load_coef: sf_table.toa_s.map(|toa| 2.0 * toa / (period * channels)),
            energy_per_tx_j: sf_table.toa_s.map(|toa| radio.supply_v * radio.tx_current_a * toa),
            sf_table,
            delta: from_db(radio.sir_threshold_db),
            d_max: config.max_slant_m(),
            eta: radio.pathloss_exp,
        })
    }

    pub fn noise_w(&self) -> f64 {
        self.noise_w
    }

    pub fn eirp_w(&self) -> f64 {
        self.eirp_w
    }

    pub fn snr_threshold(&self, sf: SpreadingFactor) -> f64 {
        self.q_lin[sf.index()]
    }

    pub fn sir_threshold(&self) -> f64 {
        self.delta
    }

    pub fn max_slant_m(&self) -> f64 {
        self.d_max
    }

    /// Received power without fading, watts.
    pub fn mean_rx_power(&self, slant_m: f64) -> f64 {
        self.eirp_w / self.path_loss.at(slant_m)
    }

    /// Fade-free SNR, linear.
    pub fn mean_snr(&self, slant_m: f64) -> f64 {
        self.mean_rx_power(slant_m) / self.noise_w
    }

    pub fn snr_success(&self, slant_m: f64, sf: SpreadingFactor) -> f64 {
        (-self.path_loss.at(slant_m) * self.q_lin[sf.index()] * self.noise_w / self.eirp_w).exp()
    }

    /// The hypergeometric factor of the SIR exponent; depends on distance only.
    pub fn interference_kernel(&self, slant_m: f64) -> Result<f64> {
        hyp2f1_special(self.eta, self.kernel_argument(slant_m))
    }

    fn kernel_argument(&self, slant_m: f64) -> f64 {
        (self.d_max / slant_m).powf(self.eta) / self.delta
    }

    pub fn sir_from_kernel(&self, sf: SpreadingFactor, n_same_sf: usize, kernel: f64) -> f64 {
        (-self.load_coef[sf.index()] * n_same_sf as f64 * kernel).exp()
    }

    /// SIR success probability from the integral (pre-hypergeometric) form,
    /// evaluated by adaptive quadrature.
    pub fn sir_success_integral(&self, slant_m: f64, sf: SpreadingFactor, n_same_sf: usize) -> Result<f64> {
        // substituting d_i = t d_max turns the integral into d_max^2 \int_0^1 t delta / ((t rho)^eta + delta) dt
        let rho = self.d_max / slant_m;
        let (delta, eta) = (self.delta, self.eta);
        let integral = quad::integrate(
            |t| t * delta / ((t * rho).powf(eta) + delta),
            0.0,
            1.0,
            1e-13,
            1e-300,
        )?;
        // -4 N_k ToA_k / (T_p N_c) times the normalised integral
        Ok((-2.0 * self.load_coef[sf.index()] * n_same_sf as f64 * integral).exp())
    }

    /// `V I ToA / P_S`; infinite when `p_s == 0`.
    pub fn energy_per_packet(&self, sf: SpreadingFactor, p_s: f64) -> f64 {
        let e = self.energy_per_tx_j[sf.index()];
        if p_s > 0.0 {
            e / p_s
        } else {
            f64::INFINITY
        }
    }

    pub fn metrics(&self, sf: SpreadingFactor, p_snr: f64, n_same_sf: usize, kernel: f64) -> LinkMetrics {
        let p_sir = self.sir_from_kernel(sf, n_same_sf, kernel);
        let p_s = delivery_ratio(p_snr, p_sir);
        LinkMetrics {
            p_snr,
            p_sir,
            p_s,
            epp_j: self.energy_per_packet(sf, p_s),
        }
    }
}

pub fn snr_success(slant_m: f64, sf: SpreadingFactor, config: &ScenarioConfig) -> Result<f64> {
    check_slant(slant_m)?;
    Ok(LinkModel::new(config)?.snr_success(slant_m, sf))
}

pub fn sir_success(
    slant_m: f64,
    sf: SpreadingFactor,
    n_same_sf: usize,
    config: &ScenarioConfig,
) -> Result<f64> {
    check_slant(slant_m)?;
    let model = LinkModel::new(config)?;
    let kernel = model.interference_kernel(slant_m)?;
    Ok(model.sir_from_kernel(sf, n_same_sf, kernel))
}

pub fn sir_success_integral(
    slant_m: f64,
    sf: SpreadingFactor,
    n_same_sf: usize,
    config: &ScenarioConfig,
) -> Result<f64> {
    check_slant(slant_m)?;
    LinkModel::new(config)?.sir_success_integral(slant_m, sf, n_same_sf)
}

pub fn delivery_ratio(p_snr: f64, p_sir: f64) -> f64 {
    p_snr * p_sir
}

pub fn energy_per_packet(sf: SpreadingFactor, p_s: f64, config: &ScenarioConfig) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_s) {
        return Err(Error::Domain(format!("success probability {p_s} outside [0, 1]")));
    }
    Ok(LinkModel::new(config)?.energy_per_packet(sf, p_s))
}

fn check_slant(slant_m: f64) -> Result<()> {
    if slant_m > 0.0 && slant_m.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("slant distance must be > 0, got {slant_m}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkEvaluation {
    pub metrics: Vec<LinkMetrics>,
    /// Mean EPP over devices, the quantity every allocator minimises.
    pub avg_epp_j: f64,
}

/// Link model specialised to one deployment: per-device `P_SNR` for every SF
/// and the distance-only interference kernel are computed once, so each
/// evaluation only needs the per-SF counts.
#[derive(Clone, Debug)]
pub struct NetworkModel {
    link: LinkModel,
    p_snr: Vec<[f64; NUM_SF]>,
    kernel: Vec<f64>,
    exec: Execution,
}

impl NetworkModel {
    pub fn new(devices: &[EndDevice], config: &ScenarioConfig, exec: Execution) -> Result<Self> {
        let link = LinkModel::new(config)?;
        for d in devices {
            check_slant(d.slant_m)?;
        }
        let p_snr = exec.map(devices, |_, d| SpreadingFactor::ALL.map(|sf| link.snr_success(d.slant_m, sf)));
        let kernel = exec
            .map(devices, |_, d| link.interference_kernel(d.slant_m))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            link,
            p_snr,
            kernel,
            exec,
        })
    }

    pub fn link(&self) -> &LinkModel {
        &self.link
    }

    pub fn len(&self) -> usize {
        self.kernel.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernel.is_empty()
    }

    pub fn snr_success(&self, device: usize, sf: SpreadingFactor) -> f64 {
        self.p_snr[device][sf.index()]
    }

    pub fn device_metrics(&self, device: usize, sf: SpreadingFactor, n_same_sf: usize) -> LinkMetrics {
        self.link
            .metrics(sf, self.p_snr[device][sf.index()], n_same_sf, self.kernel[device])
    }

    pub fn evaluate(&self, assignment: &Assignment) -> Result<NetworkEvaluation> {
        if assignment.len() != self.len() {
            return Err(Error::Domain(format!(
                "assignment covers {} devices, deployment has {}",
                assignment.len(),
                self.len()
            )));
        }
        let counts = assignment.counts();
        let metrics = self.exec.map(assignment.as_slice(), |i, &sf| {
            self.device_metrics(i, sf, counts[sf.index()])
        });
        let avg_epp_j = mean_epp(&metrics);
        Ok(NetworkEvaluation { metrics, avg_epp_j })
    }
}

/// Sequential mean, so the result does not depend on the thread count.
pub fn mean_epp(metrics: &[LinkMetrics]) -> f64 {
    metrics.iter().map(|m| m.epp_j).sum::<f64>() / metrics.len() as f64
}

pub fn evaluate_network(
    devices: &[EndDevice],
    assignment: &Assignment,
    config: &ScenarioConfig,
) -> Result<NetworkEvaluation> {
    NetworkModel::new(devices, config, Execution::default())?.evaluate(assignment)
}
