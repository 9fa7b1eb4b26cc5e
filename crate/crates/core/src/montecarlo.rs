//! Packet-level uplink simulation used to check the analytical link model.
//!
//! Every device sends one packet per report period at a uniformly random
//! instant inside that period, on a uniformly chosen channel, with an
//! independent unit-mean exponential power fade. Time wraps around at the
//! simulation horizon so that no packet sees a truncated interference window.
//! A packet is delivered when its SNR meets the SF threshold and its power is
//! at least `delta` times the summed power of every other packet on the same
//! SF and channel whose airtime overlaps it.
//!
//! By default one fade drives both checks. [`FadeCoupling::Independent`]
//! draws a separate fade for the SNR check instead, which is the assumption
//! behind multiplying the analytical SNR and SIR probabilities.

use rand::Rng;
use rand_distr::Exp1;

use crate::exec::Execution;
use crate::link::{Assignment, LinkModel, NetworkModel};
use crate::scenario::{EndDevice, ScenarioConfig};
use crate::seeds::{self, Domain};
use crate::sf::SpreadingFactor;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Packet {
    pub device: usize,
    pub start_s: f64,
    pub channel: u32,
    /// Faded received power, used for capture and as interference.
    pub rx_power_w: f64,
    /// Power compared against the noise floor.
    pub snr_power_w: f64,
}

impl Packet {
    pub fn new(device: usize, start_s: f64, channel: u32, rx_power_w: f64) -> Self {
        Self { device, start_s, channel, rx_power_w, snr_power_w: rx_power_w }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FadeCoupling {
    /// One fade per packet for both checks.
    #[default]
    Shared,
    /// Separate fades for the SNR check and the capture check.
    Independent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PacketFate {
    Delivered,
    /// Below the SNR threshold (checked first).
    SnrFailure,
    /// SNR fine but lost the capture contest.
    CollisionFailure,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DeviceTally {
    pub attempts: u64,
    pub snr_failures: u64,
    pub collision_failures: u64,
    pub successes: u64,
}

impl DeviceTally {
    fn record(&mut self, fate: PacketFate) {
        self.attempts += 1;
        match fate {
            PacketFate::Delivered => self.successes += 1,
            PacketFate::SnrFailure => self.snr_failures += 1,
            PacketFate::CollisionFailure => self.collision_failures += 1,
        }
    }

    fn merge(&mut self, other: &DeviceTally) {
        self.attempts += other.attempts;
        self.snr_failures += other.snr_failures;
        self.collision_failures += other.collision_failures;
        self.successes += other.successes;
    }

    pub fn success_ratio(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            self.successes as f64 / self.attempts as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimOutcome {
    pub devices: Vec<DeviceTally>,
}

impl SimOutcome {
    pub fn total(&self) -> DeviceTally {
        let mut t = DeviceTally::default();
        for d in &self.devices {
            t.merge(d);
        }
        t
    }

    fn merge(&mut self, other: &SimOutcome) {
        for (a, b) in self.devices.iter_mut().zip(&other.devices) {
            a.merge(b);
        }
    }
}

/// Per-bin comparison of simulated and analytical delivery ratio.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceBin {
    pub lo_m: f64,
    pub hi_m: f64,
    pub devices: usize,
    pub packets: u64,
    pub successes: u64,
    pub empirical_p_s: f64,
    /// 95 % normal-approximation binomial half-width.
    pub half_width: f64,
    /// Mean analytical `P_S` of the devices in the bin.
    pub analytic_p_s: f64,
}

/// Resolves the fate of every packet. Packets are compared only within the
/// same (channel, SF) group; a device never interferes with itself.
pub fn resolve_packets(
    packets: &[Packet],
    sfs: &[SpreadingFactor],
    link: &LinkModel,
    horizon_s: f64,
) -> Vec<PacketFate> {
    let mut groups: std::collections::BTreeMap<(u32, usize), Vec<usize>> = Default::default();
    for (i, p) in packets.iter().enumerate() {
        groups.entry((p.channel, sfs[p.device].index())).or_default().push(i);
    }
    let mut fates = vec![PacketFate::Delivered; packets.len()];
    let noise = link.noise_w();
    let delta = link.sir_threshold();
    for ((_, k), mut members) in groups {
        let sf = SpreadingFactor::ALL[k];
        let toa = link.sf_table.toa_s[k];
        let q = link.snr_threshold(sf);
        members.sort_by(|&a, &b| packets[a].start_s.total_cmp(&packets[b].start_s).then(a.cmp(&b)));
        let m = members.len();
        for (pos, &i) in members.iter().enumerate() {
            let me = &packets[i];
            let mut interference = 0.0;
            // forward then backward around the circular timeline; each other
            // member is visited at most once
            let mut ahead = 0;
            for step in 1..m {
                let other = &packets[members[(pos + step) % m]];
                if (other.start_s - me.start_s).rem_euclid(horizon_s) >= toa {
                    break;
                }
                ahead = step;
                if other.device != me.device {
                    interference += other.rx_power_w;
                }
            }
            for step in 1..m - ahead {
                let other = &packets[members[(pos + m - step) % m]];
                if (me.start_s - other.start_s).rem_euclid(horizon_s) >= toa {
                    break;
                }
                if other.device != me.device {
                    interference += other.rx_power_w;
                }
            }
            fates[i] = if me.snr_power_w / noise < q {
                PacketFate::SnrFailure
            } else {
                packet_fate(me.rx_power_w, interference, noise, 0.0, delta)
            };
        }
    }
    fates
}

pub fn packet_fate(rx_power_w: f64, interference_w: f64, noise_w: f64, q: f64, delta: f64) -> PacketFate {
    if rx_power_w / noise_w < q {
        PacketFate::SnrFailure
    } else if interference_w > 0.0 && rx_power_w < delta * interference_w {
        PacketFate::CollisionFailure
    } else {
        PacketFate::Delivered
    }
}

/// One replication over `floor(sim_duration_s / T_p)` report periods.
pub fn simulate_uplink(
    devices: &[EndDevice],
    assignment: &Assignment,
    config: &ScenarioConfig,
    sim_duration_s: f64,
    seed: u64,
) -> Result<SimOutcome> {
    simulate_uplink_with(devices, assignment, config, sim_duration_s, seed, FadeCoupling::Shared)
}

pub fn simulate_uplink_with(
    devices: &[EndDevice],
    assignment: &Assignment,
    config: &ScenarioConfig,
    sim_duration_s: f64,
    seed: u64,
    coupling: FadeCoupling,
) -> Result<SimOutcome> {
    let link = LinkModel::new(config)?;
    simulate_with_model(devices, assignment, config, &link, sim_duration_s, seed, coupling)
}

fn simulate_with_model(
    devices: &[EndDevice],
    assignment: &Assignment,
    config: &ScenarioConfig,
    link: &LinkModel,
    sim_duration_s: f64,
    seed: u64,
    coupling: FadeCoupling,
) -> Result<SimOutcome> {
    let period = config.network.report_period_s;
    if !(sim_duration_s >= period) {
        return Err(Error::Domain(format!(
            "simulation duration {sim_duration_s} s shorter than the report period {period} s"
        )));
    }
    if assignment.len() != devices.len() {
        return Err(Error::Domain(format!(
            "assignment covers {} devices, deployment has {}",
            assignment.len(),
            devices.len()
        )));
    }
    let periods = (sim_duration_s / period).floor() as usize;
    let horizon = periods as f64 * period;
    let channels = config.radio.n_channels;
    let mut rng = seeds::stream(seed, Domain::MonteCarlo, 0);
    let mut packets = Vec::with_capacity(periods * devices.len());
    for (i, d) in devices.iter().enumerate() {
        let mean = link.mean_rx_power(d.slant_m);
        for j in 0..periods {
            let offset: f64 = rng.random();
            let channel = rng.random_range(0..channels);
            let fade: f64 = rng.sample(Exp1);
            let mut packet = Packet::new(i, (j as f64 + offset) * period, channel, mean * fade);
            if coupling == FadeCoupling::Independent {
                packet.snr_power_w = mean * rng.sample::<f64, _>(Exp1);
            }
            packets.push(packet);
        }
    }
    let fates = resolve_packets(&packets, assignment.as_slice(), link, horizon);
    let mut tallies = vec![DeviceTally::default(); devices.len()];
    for (p, fate) in packets.iter().zip(fates) {
        tallies[p.device].record(fate);
    }
    Ok(SimOutcome { devices: tallies })
}

/// Independent replications run in parallel and pooled; replication `r`
/// uses seed `seed + r`.
pub fn simulate_replications(
    devices: &[EndDevice],
    assignment: &Assignment,
    config: &ScenarioConfig,
    sim_duration_s: f64,
    seed: u64,
    replications: usize,
    coupling: FadeCoupling,
    exec: Execution,
) -> Result<SimOutcome> {
    let link = LinkModel::new(config)?;
    let runs = exec.map_range(replications.max(1), |r| {
        let seed = seed.wrapping_add(r as u64);
        simulate_with_model(devices, assignment, config, &link, sim_duration_s, seed, coupling)
    });
    let mut pooled: Option<SimOutcome> = None;
    for run in runs {
        let run = run?;
        match pooled.as_mut() {
            Some(p) => p.merge(&run),
            None => pooled = Some(run),
        }
    }
    Ok(pooled.expect("at least one replication"))
}

/// Groups devices into `n_bins` equal-width slant-distance bins over
/// `[H, d_max]` and compares pooled empirical `P_S` with the analytical mean.
pub fn compare_by_distance(
    devices: &[EndDevice],
    assignment: &Assignment,
    config: &ScenarioConfig,
    outcome: &SimOutcome,
    n_bins: usize,
) -> Result<Vec<DistanceBin>> {
    let model = NetworkModel::new(devices, config, Execution::default())?;
    let analytic = model.evaluate(assignment)?;
    let lo = config.satellite.orbit_height_m;
    let hi = config.max_slant_m();
    let width = (hi - lo) / n_bins as f64;
    let mut bins: Vec<DistanceBin> = (0..n_bins)
        .map(|b| DistanceBin {
            lo_m: lo + width * b as f64,
            hi_m: lo + width * (b + 1) as f64,
            devices: 0,
            packets: 0,
            successes: 0,
            empirical_p_s: 0.0,
            half_width: 0.0,
            analytic_p_s: 0.0,
        })
        .collect();
    for (i, d) in devices.iter().enumerate() {
        let b = (((d.slant_m - lo) / width).floor().max(0.0) as usize).min(n_bins - 1);
        let bin = &mut bins[b];
        bin.devices += 1;
        bin.packets += outcome.devices[i].attempts;
        bin.successes += outcome.devices[i].successes;
        bin.analytic_p_s += analytic.metrics[i].p_s;
    }
    for bin in &mut bins {
        if bin.devices > 0 {
            bin.analytic_p_s /= bin.devices as f64;
        }
        if bin.packets > 0 {
            let p = bin.successes as f64 / bin.packets as f64;
            bin.empirical_p_s = p;
            bin.half_width = 1.96 * (p * (1.0 - p) / bin.packets as f64).sqrt();
        }
    }
    Ok(bins)
}

/// Analytical `P_S` on an even slant-distance grid for `n_same_sf` devices on `sf`.
pub fn analytic_curve(
    config: &ScenarioConfig,
    sf: SpreadingFactor,
    n_same_sf: usize,
    points: usize,
) -> Result<Vec<(f64, f64)>> {
    let link = LinkModel::new(config)?;
    let lo = config.satellite.orbit_height_m;
    let hi = config.max_slant_m();
    (0..points)
        .map(|i| {
            let d = lo + (hi - lo) * i as f64 / (points.max(2) - 1) as f64;
            let kernel = link.interference_kernel(d)?;
            Ok((d, link.metrics(sf, link.snr_success(d, sf), n_same_sf, kernel).p_s))
        })
        .collect()
}

/// Share of each failure cause over all packets, `[snr, collision]`.
pub fn failure_shares(outcome: &SimOutcome) -> [f64; 2] {
    let t = outcome.total();
    let n = t.attempts.max(1) as f64;
    [t.snr_failures as f64 / n, t.collision_failures as f64 / n]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::sample_deployment;

    #[test]
    fn tallies_add_up() {
        let c = ScenarioConfig::default().with_devices(200);
        let d = sample_deployment(&c, 1).unwrap();
        let a = Assignment::uniform(200, SpreadingFactor::SF10);
        let out = simulate_uplink(&d, &a, &c, 6000.0, 3).unwrap();
        for t in &out.devices {
            assert_eq!(t.attempts, 10);
            assert_eq!(t.successes + t.snr_failures + t.collision_failures, t.attempts);
            assert!((0.0..=1.0).contains(&t.success_ratio()));
        }
    }

    #[test]
    fn reproducible_per_seed() {
        let c = ScenarioConfig::default().with_devices(100);
        let d = sample_deployment(&c, 1).unwrap();
        let a = Assignment::uniform(100, SpreadingFactor::SF12);
        let x = simulate_uplink(&d, &a, &c, 3000.0, 5).unwrap();
        assert_eq!(x, simulate_uplink(&d, &a, &c, 3000.0, 5).unwrap());
        assert_ne!(x, simulate_uplink(&d, &a, &c, 3000.0, 6).unwrap());
        let seq = simulate_replications(&d, &a, &c, 3000.0, 5, 4, FadeCoupling::Shared, Execution::Sequential).unwrap();
        let par = simulate_replications(&d, &a, &c, 3000.0, 5, 4, FadeCoupling::Shared, Execution::Parallel).unwrap();
        assert_eq!(seq, par);
    }

    #[test]
    fn short_duration_rejected() {
        let c = ScenarioConfig::default().with_devices(3);
        let d = sample_deployment(&c, 1).unwrap();
        let a = Assignment::uniform(3, SpreadingFactor::SF7);
        assert!(matches!(simulate_uplink(&d, &a, &c, 100.0, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn pairwise_capture_rule() {
        let c = ScenarioConfig::default();
        let link = LinkModel::new(&c).unwrap();
        let strong = link.noise_w() * 1e3;
        let delta = link.sir_threshold();
        let sfs = [SpreadingFactor::SF9; 2];
        let pair = |p0: f64, p1: f64| {
            let packets = [
                Packet::new(0, 10.0, 0, p0),
                Packet::new(1, 10.0, 0, p1),
            ];
            resolve_packets(&packets, &sfs, &link, 600.0)
        };
        assert_eq!(pair(strong, strong), [PacketFate::CollisionFailure; 2]);
        assert_eq!(
            pair(strong * delta * 1.01, strong),
            [PacketFate::Delivered, PacketFate::CollisionFailure]
        );
        assert_eq!(
            pair(strong, strong * delta * 1.01),
            [PacketFate::CollisionFailure, PacketFate::Delivered]
        );
        // different channels or SFs never collide
        let packets = [
            Packet::new(0, 10.0, 0, strong),
            Packet::new(1, 10.0, 1, strong),
        ];
        assert_eq!(resolve_packets(&packets, &sfs, &link, 600.0), [PacketFate::Delivered; 2]);
        let mixed = [SpreadingFactor::SF9, SpreadingFactor::SF10];
        let packets = [
            Packet::new(0, 10.0, 0, strong),
            Packet::new(1, 10.0, 0, strong),
        ];
        assert_eq!(resolve_packets(&packets, &mixed, &link, 600.0), [PacketFate::Delivered; 2]);
    }

    #[test]
    fn overlap_window_and_wraparound() {
        let c = ScenarioConfig::default();
        let link = LinkModel::new(&c).unwrap();
        let toa = link.sf_table.toa_s[SpreadingFactor::SF9.index()];
        let p = link.noise_w() * 1e3;
        let sfs = [SpreadingFactor::SF9; 2];
        let at = |t0: f64, t1: f64| {
            let packets = [
                Packet::new(0, t0, 0, p),
                Packet::new(1, t1, 0, p),
            ];
            resolve_packets(&packets, &sfs, &link, 600.0)[0]
        };
        assert_eq!(at(100.0, 100.0 + 0.99 * toa), PacketFate::CollisionFailure);
        assert_eq!(at(100.0, 100.0 + 1.01 * toa), PacketFate::Delivered);
        assert_eq!(at(100.0, 100.0 - 0.99 * toa), PacketFate::CollisionFailure);
        // across the horizon
        assert_eq!(at(599.99, 0.05), PacketFate::CollisionFailure);
    }

    #[test]
    fn snr_checked_before_sir() {
        assert_eq!(packet_fate(0.5, 10.0, 1.0, 1.0, 4.0), PacketFate::SnrFailure);
        assert_eq!(packet_fate(2.0, 1.0, 1.0, 1.0, 4.0), PacketFate::CollisionFailure);
        assert_eq!(packet_fate(2.0, 0.0, 1.0, 1.0, 4.0), PacketFate::Delivered);
    }
}
