//! Downlink spectral efficiency.
//!
//! Works in units normalized to the receiver noise: `beta_mk` is the linear
//! SNR of link `(m, k)` at full AP power, the noise variance is 1 and every AP
//! has unit power budget, split equally over the UEs it serves.
//!
//! Per fading realization: i.i.d. Rayleigh channels `h_mk ~ CN(0, beta_mk)`,
//! orthogonal-pilot MMSE estimates, and centralized MMSE precoding directions
//! over each UE's serving set. The directions are then scaled so that no AP
//! spends more than `1 / load` on average on any served UE (see
//! [`PowerScaling`]), averages taken over the same realizations. SINR uses the
//! hardening bound with the signal `y_k = sum_i h_k^H w_i s_i + n_k`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cfnet::{ap_load, ServingAssignment};
use crate::channel::{db_to_linear, GainTable, RadioParams};

/// Noise variance in normalized units.
pub const N0: f64 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum SephyError {
    #[error("{tau_p} pilots cannot serve {k} UEs without pilot reuse")]
    PilotShortage { tau_p: usize, k: usize },
    #[error("invalid frame parameters: {0}")]
    InvalidFrame(String),
    #[error("assignment covers {assigned} UEs, gain table has {table}")]
    UeMismatch { assigned: usize, table: usize },
    #[error("singular precoding system for UE {0}")]
    Singular(usize),
}

/// How MMSE directions are turned into power-limited precoders. Either way
/// AP `m` spends at most `P / load_m` on average on each UE it serves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerScaling {
    /// One factor per UE, set by the serving AP whose share is exhausted
    /// first. Keeps the MMSE direction.
    #[default]
    PerUe,
    /// Every entry scaled to exactly `P / load_m`. Keeps only the phases and
    /// the per-realization amplitude profile of each entry.
    PerEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameParams {
    /// Symbols per coherence block.
    pub tau_c: usize,
    /// Pilot symbols; the number of UEs when unset.
    pub tau_p: Option<usize>,
    /// Pilot transmit power (dBm); the AP transmit power when unset.
    pub pilot_power_dbm: Option<f64>,
    /// Fading realizations per drop.
    pub n_fading: usize,
    pub power_scaling: PowerScaling,
}

impl Default for FrameParams {
    fn default() -> Self {
        Self {
            tau_c: 200,
            tau_p: None,
            pilot_power_dbm: None,
            n_fading: 100,
            power_scaling: PowerScaling::PerUe,
        }
    }
}

impl FrameParams {
    pub fn tau_p_for(&self, k: usize) -> usize {
        self.tau_p.unwrap_or(k)
    }

    /// Checks the frame for `k` UEs. `tau_p == tau_c` is accepted and yields
    /// a zero prelog.
    pub fn validate(&self, k: usize) -> Result<(), SephyError> {
        let tau_p = self.tau_p_for(k);
        if self.n_fading == 0 {
            return Err(SephyError::InvalidFrame(
                "n_fading must be at least 1".into(),
            ));
        }
        if self.tau_c == 0 || tau_p > self.tau_c {
            return Err(SephyError::InvalidFrame(format!(
                "need tau_p <= tau_c, got {tau_p} and {}",
                self.tau_c
            )));
        }
        if tau_p < k {
            return Err(SephyError::PilotShortage { tau_p, k });
        }
        Ok(())
    }

    /// Fraction of the coherence block carrying data.
    pub fn prelog(&self, k: usize) -> f64 {
        1.0 - self.tau_p_for(k) as f64 / self.tau_c as f64
    }

    /// Pilot power relative to the AP data power.
    pub fn pilot_ratio(&self, radio: &RadioParams) -> f64 {
        match self.pilot_power_dbm {
            Some(p) if radio.tx_power_dbm.is_finite() => db_to_linear(p - radio.tx_power_dbm),
            _ => 1.0,
        }
    }
}

/// One `M x K` channel draw.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingRealization {
    pub h: DMatrix<Complex64>,
}

fn cn<R: Rng + ?Sized>(var: f64, rng: &mut R) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

/// Independent `CN(0, beta_mk)` entries. Every entry consumes two normal
/// draws, UE-major, whatever its variance.
pub fn sample_fading<R: Rng + ?Sized>(beta: &DMatrix<f64>, rng: &mut R) -> FadingRealization {
    let (m, k) = beta.shape();
    let mut h = DMatrix::zeros(m, k);
    for j in 0..k {
        for i in 0..m {
            h[(i, j)] = cn(beta[(i, j)], rng);
        }
    }
    FadingRealization { h }
}

/// MMSE estimate variance for prior `beta` and pilot energy `p_tau`.
pub fn estimate_variance(beta: f64, p_tau: f64, n0: f64) -> f64 {
    if beta == 0.0 {
        0.0
    } else {
        p_tau * beta * beta / (p_tau * beta + n0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub h_hat: DMatrix<Complex64>,
    /// `beta_mk - gamma_mk`.
    pub error_var: DMatrix<f64>,
}

/// Per-entry MMSE estimates from orthogonal pilots of energy
/// `pilot_ratio * tau_p` each.
pub fn mmse_estimate<R: Rng + ?Sized>(
    fading: &FadingRealization,
    beta: &DMatrix<f64>,
    pilot_ratio: f64,
    tau_p: usize,
    rng: &mut R,
) -> Result<ChannelEstimate, SephyError> {
    let (m, k) = beta.shape();
    if tau_p < k {
        return Err(SephyError::PilotShortage { tau_p, k });
    }
    let p_tau = pilot_ratio * tau_p as f64;
    let sp = p_tau.sqrt();
    let mut h_hat = DMatrix::zeros(m, k);
    let mut error_var = DMatrix::zeros(m, k);
    for j in 0..k {
        for i in 0..m {
            let b = beta[(i, j)];
            let y = fading.h[(i, j)] * sp + cn(N0, rng);
            if b > 0.0 {
                h_hat[(i, j)] = y * (sp * b / (p_tau * b + N0));
                error_var[(i, j)] = b - estimate_variance(b, p_tau, N0);
            }
        }
    }
    Ok(ChannelEstimate { h_hat, error_var })
}

/// Unnormalized centralized MMSE directions, zero outside each serving set:
/// `v_k = (sum_i D h_i h_i^H D + D C D + n0 I)^-1 D h_k` with `C` the
/// diagonal sum of all UEs' estimation error variances.
pub fn mmse_directions(
    est: &ChannelEstimate,
    assignment: &ServingAssignment,
) -> Result<DMatrix<Complex64>, SephyError> {
    let (m, k) = est.h_hat.shape();
    let mut a = &est.h_hat * est.h_hat.adjoint();
    for i in 0..m {
        let err: f64 = est.error_var.row(i).iter().sum();
        a[(i, i)] += Complex64::new(err + N0, 0.0);
    }
    let mut v = DMatrix::zeros(m, k);
    for j in 0..k {
        let s = assignment.serving(j);
        if s.is_empty() {
            continue;
        }
        let sub = DMatrix::from_fn(s.len(), s.len(), |r, c| a[(s[r], s[c])]);
        let rhs = DMatrix::from_fn(s.len(), 1, |r, _| est.h_hat[(s[r], j)]);
        let chol = sub.cholesky().ok_or(SephyError::Singular(j))?;
        let x = chol.solve(&rhs);
        for (r, &ap) in s.iter().enumerate() {
            v[(ap, j)] = x[(r, 0)];
        }
    }
    Ok(v)
}

/// Scale `directions` in place into precoders, using the average of
/// `|v_mk|^2` over the whole set. Entries with zero average stay zero.
pub fn scale_precoders(
    directions: &mut [DMatrix<Complex64>],
    assignment: &ServingAssignment,
    loads: &[usize],
    power: f64,
    rule: PowerScaling,
) {
    let Some(first) = directions.first() else {
        return;
    };
    let (m, k) = first.shape();
    let n = directions.len() as f64;
    let mut mean = DMatrix::<f64>::zeros(m, k);
    for d in directions.iter() {
        for j in 0..k {
            for i in 0..m {
                mean[(i, j)] += d[(i, j)].norm_sqr();
            }
        }
    }
    mean /= n;
    let share = |i: usize| {
        if loads[i] > 0 {
            power / loads[i] as f64
        } else {
            0.0
        }
    };
    let scale = match rule {
        PowerScaling::PerEntry => DMatrix::from_fn(m, k, |i, j| {
            let e = mean[(i, j)];
            if e > 0.0 {
                (share(i) / e).sqrt()
            } else {
                0.0
            }
        }),
        PowerScaling::PerUe => {
            let mut scale = DMatrix::zeros(m, k);
            for j in 0..k {
                let rho = assignment
                    .serving(j)
                    .iter()
                    .filter(|&&i| mean[(i, j)] > 0.0)
                    .map(|&i| share(i) / mean[(i, j)])
                    .fold(f64::INFINITY, f64::min);
                if rho.is_finite() {
                    scale.column_mut(j).fill(rho.sqrt());
                }
            }
            scale
        }
    };
    let scale = scale.map(|s| Complex64::new(s, 0.0));
    for d in directions.iter_mut() {
        d.component_mul_assign(&scale);
    }
}

/// Precoders for a set of estimates sharing one assignment: MMSE directions
/// scaled to the per-AP equal power split over the whole set.
pub fn mmse_precoders(
    estimates: &[ChannelEstimate],
    assignment: &ServingAssignment,
    loads: &[usize],
    power: f64,
    rule: PowerScaling,
) -> Result<Vec<DMatrix<Complex64>>, SephyError> {
    let mut w = estimates
        .iter()
        .map(|e| mmse_directions(e, assignment))
        .collect::<Result<Vec<_>, _>>()?;
    scale_precoders(&mut w, assignment, loads, power, rule);
    Ok(w)
}

/// Hardening-bound SINR from the mean desired gain and the mean total
/// received power `sum_i E|h_k^H w_i|^2`.
pub fn hardening_sinr(signal_mean: Complex64, total_power: f64, n0: f64) -> f64 {
    let s = signal_mean.norm_sqr();
    let denom = (total_power - s).max(0.0) + n0;
    s / denom
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeResult {
    /// bit/s/Hz.
    pub se: Vec<f64>,
    /// Linear.
    pub sinr: Vec<f64>,
    pub serving_size: Vec<usize>,
}

/// SE of every UE given linear SNRs `beta`.
pub fn downlink_se_linear<R: Rng + ?Sized>(
    beta: &DMatrix<f64>,
    assignment: &ServingAssignment,
    frame: &FrameParams,
    pilot_ratio: f64,
    rng: &mut R,
) -> Result<SeResult, SephyError> {
    let (m, k) = beta.shape();
    if assignment.n_ues() != k {
        return Err(SephyError::UeMismatch {
            assigned: assignment.n_ues(),
            table: k,
        });
    }
    frame.validate(k)?;
    let tau_p = frame.tau_p_for(k);
    let loads = ap_load(assignment, m);

    let mut channels = Vec::with_capacity(frame.n_fading);
    let mut directions = Vec::with_capacity(frame.n_fading);
    for _ in 0..frame.n_fading {
        let f = sample_fading(beta, rng);
        let est = mmse_estimate(&f, beta, pilot_ratio, tau_p, rng)?;
        directions.push(mmse_directions(&est, assignment)?);
        channels.push(f.h);
    }
    scale_precoders(
        &mut directions,
        assignment,
        &loads,
        1.0,
        frame.power_scaling,
    );

    let mut signal = vec![Complex64::new(0.0, 0.0); k];
    let mut power = vec![0.0; k];
    for (h, w) in channels.iter().zip(&directions) {
        for i in 0..k {
            let s = assignment.serving(i);
            for kk in 0..k {
                let g: Complex64 = s.iter().map(|&ap| h[(ap, kk)].conj() * w[(ap, i)]).sum();
                power[kk] += g.norm_sqr();
                if kk == i {
                    signal[kk] += g;
                }
            }
        }
    }
    let n = frame.n_fading as f64;
    let prelog = frame.prelog(k);
    let mut se = Vec::with_capacity(k);
    let mut sinr = Vec::with_capacity(k);
    for j in 0..k {
        let alive = assignment.serving(j).iter().any(|&ap| beta[(ap, j)] > 0.0);
        let x = if alive {
            hardening_sinr(signal[j] / n, power[j] / n, N0)
        } else {
            0.0
        };
        sinr.push(x);
        se.push(if prelog > 0.0 {
            prelog * (1.0 + x).log2()
        } else {
            0.0
        });
    }
    Ok(SeResult {
        se,
        sinr,
        serving_size: (0..k).map(|j| assignment.serving_size(j)).collect(),
    })
}

/// SE of every UE of `gains` under `assignment`.
pub fn downlink_se<R: Rng + ?Sized>(
    gains: &GainTable,
    assignment: &ServingAssignment,
    frame: &FrameParams,
    radio: &RadioParams,
    rng: &mut R,
) -> Result<SeResult, SephyError> {
    let beta = gains.snr_matrix().map(db_to_linear);
    downlink_se_linear(&beta, assignment, frame, frame.pilot_ratio(radio), rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfnet::ServingEntry;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn full_assignment(m: usize, k: usize) -> ServingAssignment {
        ServingAssignment {
            e: m,
            entries: (0..k)
                .map(|_| ServingEntry {
                    anchors: vec![0],
                    serving: (0..m).collect(),
                })
                .collect(),
        }
    }

    fn frame(n: usize) -> FrameParams {
        FrameParams {
            n_fading: n,
            ..FrameParams::default()
        }
    }

    #[test]
    fn fading_statistics() {
        let beta = DMatrix::from_element(1, 1, 2.5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        let mut pow = 0.0;
        let mut mean = Complex64::new(0.0, 0.0);
        for _ in 0..n {
            let h = sample_fading(&beta, &mut rng).h[(0, 0)];
            pow += h.norm_sqr();
            mean += h;
        }
        let var = pow / n as f64;
        assert!((var / 2.5 - 1.0).abs() < 0.02, "var {var}");
        let sd = (2.5 / 2.0 / n as f64).sqrt();
        mean /= n as f64;
        assert!(mean.re.abs() < 3.0 * sd && mean.im.abs() < 3.0 * sd);

        let zero = DMatrix::from_element(2, 2, 0.0);
        assert!(sample_fading(&zero, &mut rng)
            .h
            .iter()
            .all(|z| *z == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn estimate_variance_examples() {
        assert_eq!(estimate_variance(1.0, 1.0, 1.0), 0.5);
        assert!((estimate_variance(3.0, 1e12, 1.0) - 3.0).abs() < 1e-9);
        assert!(estimate_variance(3.0, 1e-12, 1.0) < 1e-9);
        assert_eq!(estimate_variance(0.0, 5.0, 1.0), 0.0);
    }

    #[test]
    fn estimate_is_consistent() {
        let beta = DMatrix::from_element(1, 1, 4.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let (mut est_pow, mut err_pow) = (0.0, 0.0);
        for _ in 0..n {
            let f = sample_fading(&beta, &mut rng);
            let e = mmse_estimate(&f, &beta, 0.25, 1, &mut rng).unwrap();
            est_pow += e.h_hat[(0, 0)].norm_sqr();
            err_pow += (f.h[(0, 0)] - e.h_hat[(0, 0)]).norm_sqr();
            assert!((e.error_var[(0, 0)] - 2.0).abs() < 1e-12);
        }
        // p * tau * beta = n0 gives gamma = beta / 2
        assert!((est_pow / n as f64 / 2.0 - 1.0).abs() < 0.02);
        assert!((err_pow / n as f64 / 2.0 - 1.0).abs() < 0.02);

        let two = DMatrix::from_element(1, 2, 1.0);
        let f = sample_fading(&two, &mut rng);
        assert_eq!(
            mmse_estimate(&f, &two, 1.0, 1, &mut rng),
            Err(SephyError::PilotShortage { tau_p: 1, k: 2 })
        );
    }

    fn inv2(a: [[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        [
            [a[1][1] / det, -a[0][1] / det],
            [-a[1][0] / det, a[0][0] / det],
        ]
    }

    #[test]
    fn directions_match_dense_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let beta = DMatrix::from_row_slice(2, 2, &[3.0, 0.4, 0.7, 5.0]);
        let f = sample_fading(&beta, &mut rng);
        let est = mmse_estimate(&f, &beta, 1.0, 2, &mut rng).unwrap();
        let v = mmse_directions(&est, &full_assignment(2, 2)).unwrap();
        let h = &est.h_hat;
        let mut a = [[Complex64::new(0.0, 0.0); 2]; 2];
        for r in 0..2 {
            for c in 0..2 {
                for i in 0..2 {
                    a[r][c] += h[(r, i)] * h[(c, i)].conj();
                }
            }
            a[r][r] += est.error_var[(r, 0)] + est.error_var[(r, 1)] + 1.0;
        }
        let inv = inv2(a);
        for k in 0..2 {
            for r in 0..2 {
                let want = inv[r][0] * h[(0, k)] + inv[r][1] * h[(1, k)];
                assert!((v[(r, k)] - want).norm() <= 1e-9 * want.norm());
            }
        }
    }

    #[test]
    fn single_link_matched_filter_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let beta = DMatrix::from_element(1, 1, 2.0);
        let ests: Vec<_> = (0..50)
            .map(|_| {
                let f = sample_fading(&beta, &mut rng);
                mmse_estimate(&f, &beta, 1.0, 1, &mut rng).unwrap()
            })
            .collect();
        for rule in [PowerScaling::PerUe, PowerScaling::PerEntry] {
            let w = mmse_precoders(&ests, &full_assignment(1, 1), &[1], 1.0, rule).unwrap();
            let mean: f64 = w.iter().map(|x| x[(0, 0)].norm_sqr()).sum::<f64>() / 50.0;
            assert!((mean - 1.0).abs() < 1e-12);
        }
        let w = mmse_precoders(
            &ests,
            &full_assignment(1, 1),
            &[1],
            1.0,
            PowerScaling::PerUe,
        )
        .unwrap();
        for (e, x) in ests.iter().zip(&w) {
            // parallel to the estimate with a positive real factor
            let r = x[(0, 0)] / e.h_hat[(0, 0)];
            assert!(r.re > 0.0 && r.im.abs() < 1e-9 * r.re);
        }
    }

    #[test]
    fn per_ap_power_within_equal_share() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let beta = DMatrix::from_row_slice(3, 3, &[10.0, 0.1, 3.0, 0.5, 20.0, 1.0, 2.0, 2.0, 0.01]);
        let a = full_assignment(3, 3);
        let loads = ap_load(&a, 3);
        let ests: Vec<_> = (0..40)
            .map(|_| {
                let f = sample_fading(&beta, &mut rng);
                mmse_estimate(&f, &beta, 1.0, 3, &mut rng).unwrap()
            })
            .collect();
        for rule in [PowerScaling::PerUe, PowerScaling::PerEntry] {
            let w = mmse_precoders(&ests, &a, &loads, 1.0, rule).unwrap();
            for k in 0..3 {
                let p: Vec<f64> = (0..3)
                    .map(|m| w.iter().map(|x| x[(m, k)].norm_sqr()).sum::<f64>() / 40.0)
                    .collect();
                assert!(p.iter().all(|&v| v <= 1.0 / 3.0 + 1e-12));
                // some serving AP spends exactly its share
                assert!(p.iter().any(|&v| (v - 1.0 / 3.0).abs() < 1e-12));
                if rule == PowerScaling::PerEntry {
                    assert!(p.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-12));
                }
            }
        }
    }

    #[test]
    fn orthogonal_users_get_their_own_direction() {
        let est = ChannelEstimate {
            h_hat: DMatrix::from_row_slice(
                2,
                2,
                &[
                    Complex64::new(1.0, 1.0),
                    Complex64::new(0.0, 0.0),
                    Complex64::new(0.0, 0.0),
                    Complex64::new(2.0, -1.0),
                ],
            ),
            error_var: DMatrix::zeros(2, 2),
        };
        let v = mmse_directions(&est, &full_assignment(2, 2)).unwrap();
        assert_eq!(v[(1, 0)], Complex64::new(0.0, 0.0));
        assert_eq!(v[(0, 1)], Complex64::new(0.0, 0.0));
        assert!((v[(0, 0)] - est.h_hat[(0, 0)] / 3.0).norm() < 1e-12);
        assert!((v[(1, 1)] - est.h_hat[(1, 1)] / 6.0).norm() < 1e-12);
    }

    #[test]
    fn zero_power_and_zero_prelog() {
        let a = full_assignment(3, 2);
        let zero = DMatrix::from_element(3, 2, 0.0);
        let r = downlink_se_linear(
            &zero,
            &a,
            &frame(20),
            1.0,
            &mut ChaCha8Rng::seed_from_u64(5),
        )
        .unwrap();
        assert_eq!(r.se, vec![0.0, 0.0]);

        let beta = DMatrix::from_element(3, 2, 10.0);
        let f = FrameParams {
            tau_c: 2,
            ..frame(20)
        };
        let r = downlink_se_linear(&beta, &a, &f, 1.0, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(r.se, vec![0.0, 0.0]);
        assert!(r.sinr.iter().all(|&s| s > 0.0));
        assert_eq!(r.serving_size, vec![3, 3]);
    }

    #[test]
    fn frame_validation() {
        let f = FrameParams {
            tau_p: Some(3),
            ..FrameParams::default()
        };
        assert_eq!(
            f.validate(4),
            Err(SephyError::PilotShortage { tau_p: 3, k: 4 })
        );
        let f = FrameParams {
            tau_c: 10,
            tau_p: Some(11),
            ..FrameParams::default()
        };
        assert!(matches!(f.validate(4), Err(SephyError::InvalidFrame(_))));
        assert!(matches!(
            frame(0).validate(1),
            Err(SephyError::InvalidFrame(_))
        ));
        assert_eq!(FrameParams::default().prelog(50), 0.75);
    }

    #[test]
    fn prelog_scaling_exact() {
        let beta = DMatrix::from_row_slice(2, 2, &[30.0, 2.0, 1.0, 50.0]);
        let a = full_assignment(2, 2);
        for tau_p in [2, 4] {
            let f = FrameParams {
                tau_p: Some(tau_p),
                ..frame(50)
            };
            let r =
                downlink_se_linear(&beta, &a, &f, 1.0, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
            for k in 0..2 {
                let want = (1.0 - tau_p as f64 / 200.0) * (1.0 + r.sinr[k]).log2();
                assert_eq!(r.se[k], want);
            }
        }
    }

    #[test]
    fn deterministic_given_stream() {
        let beta = DMatrix::from_row_slice(3, 2, &[30.0, 2.0, 1.0, 50.0, 0.0, 7.0]);
        let a = full_assignment(3, 2);
        let run = || {
            downlink_se_linear(
                &beta,
                &a,
                &frame(30),
                1.0,
                &mut ChaCha8Rng::seed_from_u64(7),
            )
            .unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn interference_lowers_sinr() {
        let s = Complex64::new(2.0, 0.0);
        assert!(hardening_sinr(s, 5.0 + 3.0, 1.0) < hardening_sinr(s, 5.0, 1.0));
    }

    #[test]
    fn more_aps_more_se_for_a_lone_user() {
        let mut prev = 0.0;
        for m in 1..=4 {
            let beta = DMatrix::from_element(m, 1, 4.0);
            let r = downlink_se_linear(
                &beta,
                &full_assignment(m, 1),
                &frame(2000),
                1.0,
                &mut ChaCha8Rng::seed_from_u64(8),
            )
            .unwrap();
            assert!(r.se[0] >= prev);
            prev = r.se[0];
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn se_bounded_by_coherent_snr(
            b in proptest::collection::vec(-20.0..30.0f64, 6),
            seed in any::<u64>(),
        ) {
            let beta = DMatrix::from_column_slice(3, 2, &b.iter().map(|&d| db_to_linear(d)).collect::<Vec<_>>());
            let a = full_assignment(3, 2);
            let f = frame(400);
            let r = downlink_se_linear(&beta, &a, &f, 1.0, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            for k in 0..2 {
                let coherent: f64 = (0..3).map(|m| beta[(m, k)].sqrt()).sum::<f64>().powi(2);
                prop_assert!(r.se[k] >= 0.0);
                // slack for the sample-mean channel power over 400 draws
                prop_assert!(r.sinr[k] <= 1.5 * coherent);
            }
        }
    }
}
