// SPDX-License-Identifier: MIT OR Apache-2.0

//! Synthetic point processes.
//!
//! Life times are Gamma distributed throughout. A [`LifetimeSchedule`] fixes
//! the law of the `i`-th life time; all laws of one schedule share the same
//! mean, so the resulting renewal process with varying variance keeps a
//! constant rate. [`ChangePointModel`] glues independent schedules together
//! at change points, and [`RandomChangePointModel`] draws the change points
//! themselves from a renewal process.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::{stream, StreamRng};
use crate::series::EventSeries;

/// `Gamma(shape, rate)` with density proportional to `x^(shape-1) e^(-rate x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaLaw {
    pub shape: f64,
    pub rate: f64,
}

impl GammaLaw {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        let law = Self { shape, rate };
        law.validate()?;
        Ok(law)
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        Self::new(1.0, rate)
    }

    /// Law with the given mean and variance (`shape = m²/v`, `rate = m/v`).
    pub fn with_moments(mean: f64, variance: f64) -> Result<Self> {
        if !(mean > 0.0 && variance > 0.0) {
            return Err(invalid(format!(
                "mean {mean} and variance {variance} must be positive"
            )));
        }
        Self::new(mean * mean / variance, mean / variance)
    }

    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    pub fn variance(&self) -> f64 {
        self.shape / (self.rate * self.rate)
    }

    /// Event rate `1/mean` of a renewal process with this life time law.
    pub fn event_rate(&self) -> f64 {
        self.rate / self.shape
    }

    fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if ok(self.shape) && ok(self.rate) {
            Ok(())
        } else {
            Err(invalid(format!(
                "Gamma parameters must be positive, got shape {} rate {}",
                self.shape, self.rate
            )))
        }
    }

    fn sampler(&self) -> Gamma<f64> {
        Gamma::new(self.shape, 1.0 / self.rate).expect("validated Gamma parameters")
    }
}

/// Per-index life time laws of a rate stationary process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LifetimeSchedule {
    /// Independent, identically distributed life times.
    Iid { law: GammaLaw },
    /// Variances converging to `mean²/limit_shape`.
    ///
    /// The `i`-th law has shape `limit_shape + shape_offset / i` and mean
    /// `mean`. This decay profile is illustrative; any bounded sequence with
    /// a Cesàro limit qualifies.
    Converging {
        mean: f64,
        limit_shape: f64,
        shape_offset: f64,
    },
    /// `grid/2` life times from `first`, then `grid/2` from `second`, repeating.
    Alternating {
        first: GammaLaw,
        second: GammaLaw,
        grid: usize,
    },
    /// Variances ramp linearly inside each block of `grid` life times so that
    /// every block has mean variance `variance`.
    ///
    /// Index `j = 0..grid` within a block gets
    /// `variance * (1 + amplitude * (2j - grid + 1) / (grid - 1))`.
    GridBalanced {
        mean: f64,
        variance: f64,
        amplitude: f64,
        grid: usize,
    },
}

impl LifetimeSchedule {
    pub fn iid(shape: f64, rate: f64) -> Result<Self> {
        Ok(Self::Iid {
            law: GammaLaw::new(shape, rate)?,
        })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Iid { law } => law.validate(),
            Self::Converging {
                mean,
                limit_shape,
                shape_offset,
            } => {
                if !(mean.is_finite() && mean > 0.0 && limit_shape.is_finite() && limit_shape > 0.0)
                {
                    return Err(invalid(
                        "converging schedule needs positive mean and limit shape",
                    ));
                }
                if !shape_offset.is_finite() || limit_shape + shape_offset.min(0.0) <= 0.0 {
                    return Err(invalid("converging schedule produces a non-positive shape"));
                }
                Ok(())
            }
            Self::Alternating {
                first,
                second,
                grid,
            } => {
                first.validate()?;
                second.validate()?;
                if grid < 2 || grid % 2 != 0 {
                    return Err(invalid(format!(
                        "alternating grid must be even and >= 2, got {grid}"
                    )));
                }
                let (m1, m2) = (first.mean(), second.mean());
                if (m1 - m2).abs() > 1e-12 * m1.max(m2) {
                    return Err(invalid(format!(
                        "alternating laws must share one mean, got {m1} and {m2}"
                    )));
                }
                Ok(())
            }
            Self::GridBalanced {
                mean,
                variance,
                amplitude,
                grid,
            } => {
                if !(mean > 0.0 && variance > 0.0 && mean.is_finite() && variance.is_finite()) {
                    return Err(invalid(
                        "grid-balanced schedule needs positive mean and variance",
                    ));
                }
                if !(0.0..1.0).contains(&amplitude) {
                    return Err(invalid(format!(
                        "amplitude must lie in [0, 1), got {amplitude}"
                    )));
                }
                if grid == 0 {
                    return Err(invalid("grid must be positive"));
                }
                Ok(())
            }
        }
    }

    /// Law of life time `i` (1-based).
    pub fn law(&self, i: usize) -> GammaLaw {
        assert!(i >= 1, "life times are indexed from 1");
        match *self {
            Self::Iid { law } => law,
            Self::Converging {
                mean,
                limit_shape,
                shape_offset,
            } => {
                let shape = limit_shape + shape_offset / i as f64;
                GammaLaw {
                    shape,
                    rate: shape / mean,
                }
            }
            Self::Alternating {
                first,
                second,
                grid,
            } => {
                if ((i - 1) / (grid / 2)).is_multiple_of(2) {
                    first
                } else {
                    second
                }
            }
            Self::GridBalanced {
                mean,
                variance,
                amplitude,
                grid,
            } => {
                let v = if grid == 1 {
                    variance
                } else {
                    let j = ((i - 1) % grid) as f64;
                    let g = grid as f64;
                    variance * (1.0 + amplitude * (2.0 * j - g + 1.0) / (g - 1.0))
                };
                GammaLaw {
                    shape: mean * mean / v,
                    rate: mean / v,
                }
            }
        }
    }

    /// Common mean life time `μ`.
    pub fn mean(&self) -> f64 {
        self.law(1).mean()
    }

    pub fn variance(&self, i: usize) -> f64 {
        self.law(i).variance()
    }

    /// Draws event times in `(0, horizon]`. Life times are drawn until their
    /// cumulative sum exceeds the horizon; the overshooting event is dropped.
    pub fn sample_events(&self, horizon: f64, rng: &mut StreamRng) -> Vec<f64> {
        let mut times = Vec::with_capacity((horizon / self.mean() * 1.1) as usize + 8);
        let mut t = 0.0;
        let push = |t: f64, times: &mut Vec<f64>| -> bool {
            if t > horizon {
                false
            } else {
                times.push(t);
                true
            }
        };
        match *self {
            Self::Iid { law } => {
                let g = law.sampler();
                loop {
                    t += g.sample(rng);
                    if !push(t, &mut times) {
                        break;
                    }
                }
            }
            Self::Alternating {
                first,
                second,
                grid,
            } => {
                let samplers = [first.sampler(), second.sampler()];
                let half = grid / 2;
                let mut i = 0usize;
                loop {
                    t += samplers[(i / half) % 2].sample(rng);
                    i += 1;
                    if !push(t, &mut times) {
                        break;
                    }
                }
            }
            Self::Converging { .. } | Self::GridBalanced { .. } => {
                let mut i = 1usize;
                loop {
                    t += self.law(i).sampler().sample(rng);
                    i += 1;
                    if !push(t, &mut times) {
                        break;
                    }
                }
            }
        }
        // Gamma draws can underflow to zero for tiny shapes; keep the series
        // strictly increasing.
        times.dedup();
        times
    }
}

/// Draws a renewal process with varying variance on `(0, horizon]`.
pub fn simulate_rpvv(schedule: &LifetimeSchedule, horizon: f64, seed: u64) -> Result<EventSeries> {
    schedule.validate()?;
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(invalid(format!("horizon must be positive, got {horizon}")));
    }
    let mut rng = stream(seed, &[0]);
    let times = schedule.sample_events(horizon, &mut rng);
    Ok(EventSeries::from_sorted_unchecked(times, horizon))
}

/// Piecewise composition of independent rate-stationary processes.
///
/// Segment `i` covers `(c_{i-1}, c_i]` with `c_0 = 0` and `c_{k+1} = T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangePointModel {
    pub horizon: f64,
    pub segments: Vec<LifetimeSchedule>,
    pub change_points: Vec<f64>,
}

impl ChangePointModel {
    pub fn new(
        horizon: f64,
        segments: Vec<LifetimeSchedule>,
        change_points: Vec<f64>,
    ) -> Result<Self> {
        let model = Self {
            horizon,
            segments,
            change_points,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn stationary(horizon: f64, schedule: LifetimeSchedule) -> Result<Self> {
        Self::new(horizon, vec![schedule], Vec::new())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(invalid(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if self.segments.len() != self.change_points.len() + 1 {
            return Err(invalid(format!(
                "{} change points need {} segments, got {}",
                self.change_points.len(),
                self.change_points.len() + 1,
                self.segments.len()
            )));
        }
        let mut prev = 0.0;
        for &c in &self.change_points {
            if !(c > prev && c < self.horizon) {
                return Err(invalid(format!(
                    "change points must increase strictly inside (0, {}), got {c}",
                    self.horizon
                )));
            }
            prev = c;
        }
        for s in &self.segments {
            s.validate()?;
        }
        for (i, pair) in self.segments.windows(2).enumerate() {
            let (a, b) = (pair[0].mean(), pair[1].mean());
            if (a - b).abs() <= 1e-12 * a.max(b) {
                return Err(invalid(format!(
                    "segments {i} and {} share the mean life time {a}",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    /// Segment boundaries `0, c_1, …, c_k, T`.
    pub fn boundaries(&self) -> Vec<f64> {
        let mut b = Vec::with_capacity(self.change_points.len() + 2);
        b.push(0.0);
        b.extend_from_slice(&self.change_points);
        b.push(self.horizon);
        b
    }

    /// Event rate `1/μ_i` of every segment.
    pub fn segment_rates(&self) -> Vec<f64> {
        self.segments.iter().map(|s| 1.0 / s.mean()).collect()
    }

    /// Four-segment example with rates 8, 13, 18 and 16.5 on `(0, 700]`.
    pub fn three_change_points() -> Self {
        let seg = |shape: f64, rate: f64| LifetimeSchedule::Iid {
            law: GammaLaw { shape, rate },
        };
        Self {
            horizon: 700.0,
            segments: vec![
                seg(1.0, 8.0),
                seg(2.0, 26.0),
                seg(1.0, 18.0),
                seg(2.0, 33.0),
            ],
            change_points: vec![150.0, 180.0, 500.0],
        }
    }
}

/// Simulates every segment process from time 0 on its own stream and keeps
/// its events inside the segment.
pub fn simulate_change_point_process(model: &ChangePointModel, seed: u64) -> Result<EventSeries> {
    model.validate()?;
    let bounds = model.boundaries();
    let mut times = Vec::new();
    for (i, schedule) in model.segments.iter().enumerate() {
        let (lo, hi) = (bounds[i], bounds[i + 1]);
        let mut rng = stream(seed, &[i as u64]);
        let events = schedule.sample_events(hi, &mut rng);
        times.extend(events.into_iter().filter(|&t| t > lo));
    }
    Ok(EventSeries::from_sorted_unchecked(times, model.horizon))
}

/// Law of the gaps between consecutive change points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GapLaw {
    /// Uniform on `(0, upper]`.
    Uniform { upper: f64 },
    /// Every gap equals `value`.
    Fixed { value: f64 },
}

impl GapLaw {
    fn sample(&self, rng: &mut StreamRng) -> f64 {
        match *self {
            Self::Uniform { upper } => upper * (1.0 - rng.random::<f64>()),
            Self::Fixed { value } => value,
        }
    }
}

/// Rate alternating between a base process and one of three others, with
/// change points drawn from a stationary renewal process.
///
/// Segments with even index (0, 2, …) come from the base process; each odd
/// segment picks one of the other three uniformly at random.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomChangePointModel {
    pub horizon: f64,
    /// Common Gamma shape of the four processes.
    pub shape: f64,
    /// Gamma rate parameters; index 0 is the base process.
    pub rates: [f64; 4],
    pub gap: GapLaw,
}

impl Default for RandomChangePointModel {
    fn default() -> Self {
        Self {
            horizon: 700.0,
            shape: 2.0,
            rates: [28.0, 24.0, 20.0, 18.0],
            gap: GapLaw::Uniform { upper: 100.0 },
        }
    }
}

/// One draw of a [`RandomChangePointModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct RandomChangePointRealization {
    pub series: EventSeries,
    pub change_points: Vec<f64>,
    /// Process index (0..4) used on each of the `change_points.len() + 1` segments.
    pub segment_process: Vec<usize>,
}

pub fn simulate_random_cp_model(
    model: &RandomChangePointModel,
    seed: u64,
) -> Result<RandomChangePointRealization> {
    let horizon = model.horizon;
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(invalid(format!("horizon must be positive, got {horizon}")));
    }
    let laws = model
        .rates
        .iter()
        .map(|&r| GammaLaw::new(model.shape, r))
        .collect::<Result<Vec<_>>>()?;
    if laws[1..].iter().any(|l| l.mean() == laws[0].mean()) {
        return Err(invalid("base process must differ in rate from the others"));
    }
    match model.gap {
        GapLaw::Uniform { upper } if upper.is_finite() && upper > 0.0 => {}
        GapLaw::Fixed { value } if value.is_finite() && value > 0.0 => {}
        other => return Err(invalid(format!("invalid gap law {other:?}"))),
    }

    let mut cp_rng = stream(seed, &[0]);
    let mut change_points = Vec::new();
    let mut c = model.gap.sample(&mut cp_rng);
    while c < horizon {
        change_points.push(c);
        c += model.gap.sample(&mut cp_rng);
    }

    let mut choice_rng = stream(seed, &[1]);
    let segment_process: Vec<usize> = (0..=change_points.len())
        .map(|i| {
            if i % 2 == 0 {
                0
            } else {
                1 + choice_rng.random_range(0..3)
            }
        })
        .collect();

    let processes: Vec<Vec<f64>> = laws
        .iter()
        .enumerate()
        .map(|(j, law)| {
            let schedule = LifetimeSchedule::Iid { law: *law };
            schedule.sample_events(horizon, &mut stream(seed, &[2 + j as u64]))
        })
        .collect();

    let mut bounds = Vec::with_capacity(change_points.len() + 2);
    bounds.push(0.0);
    bounds.extend_from_slice(&change_points);
    bounds.push(horizon);
    let mut times = Vec::new();
    for (i, &p) in segment_process.iter().enumerate() {
        let (lo, hi) = (bounds[i], bounds[i + 1]);
        let src = &processes[p];
        let start = src.partition_point(|&t| t <= lo);
        let end = src.partition_point(|&t| t <= hi);
        times.extend_from_slice(&src[start..end]);
    }
    Ok(RandomChangePointRealization {
        series: EventSeries::from_sorted_unchecked(times, horizon),
        change_points,
        segment_process,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_moments(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn gamma_five_five_moments() {
        let schedule = LifetimeSchedule::iid(5.0, 5.0).unwrap();
        let mut lifes = Vec::new();
        for seed in 0..200 {
            lifes.extend(simulate_rpvv(&schedule, 100.0, seed).unwrap().life_times());
        }
        let (m, v) = sample_moments(&lifes);
        assert!((m - 1.0).abs() < 0.01, "mean {m}");
        assert!((v - 0.2).abs() < 0.01, "variance {v}");
    }

    #[test]
    fn exponential_mean_equals_sd() {
        let schedule = LifetimeSchedule::iid(1.0, 4.0).unwrap();
        let lifes = simulate_rpvv(&schedule, 5000.0, 3).unwrap().life_times();
        let (m, v) = sample_moments(&lifes);
        assert!((m - 0.25).abs() < 0.01, "mean {m}");
        assert!((v.sqrt() - 0.25).abs() < 0.01, "sd {}", v.sqrt());
    }

    #[test]
    fn alternating_segments_have_both_variances() {
        let schedule = LifetimeSchedule::Alternating {
            first: GammaLaw::new(1.0, 1.0).unwrap(),
            second: GammaLaw::new(20.0, 20.0).unwrap(),
            grid: 40,
        };
        assert_eq!(schedule.variance(1), 1.0);
        assert_eq!(schedule.variance(20), 1.0);
        assert_eq!(schedule.variance(21), 0.05);
        assert_eq!(schedule.variance(41), 1.0);
        let series = simulate_rpvv(&schedule, 40_000.0, 11).unwrap();
        let mut t_prev = 0.0;
        let (mut odd, mut even) = (Vec::new(), Vec::new());
        for (i, &t) in series.times().iter().enumerate() {
            let xi = t - t_prev;
            t_prev = t;
            if (i / 20) % 2 == 0 {
                odd.push(xi)
            } else {
                even.push(xi)
            }
        }
        let (_, v1) = sample_moments(&odd);
        let (_, v2) = sample_moments(&even);
        assert!((v1 - 1.0).abs() < 0.05, "{v1}");
        assert!((v2 - 0.05).abs() < 0.005, "{v2}");
    }

    #[test]
    fn schedules_keep_mean_constant_and_variance_bounded() {
        let schedules = [
            LifetimeSchedule::Converging {
                mean: 1.0,
                limit_shape: 10.0,
                shape_offset: -5.0,
            },
            LifetimeSchedule::GridBalanced {
                mean: 1.0,
                variance: 1.0,
                amplitude: 0.9,
                grid: 40,
            },
            LifetimeSchedule::Alternating {
                first: GammaLaw::new(0.5, 15.0).unwrap(),
                second: GammaLaw::new(5.0, 150.0).unwrap(),
                grid: 10,
            },
        ];
        for s in &schedules {
            s.validate().unwrap();
            let mu = s.mean();
            let mut sup: f64 = 0.0;
            for i in 1..500 {
                assert!((s.law(i).mean() - mu).abs() < 1e-12);
                sup = sup.max(s.variance(i));
            }
            assert!(sup.is_finite());
        }
        // Converging variances approach mean²/limit_shape.
        assert!((schedules[0].variance(100_000) - 0.1).abs() < 1e-4);
        // Grid-balanced blocks average to the target variance.
        let block: f64 = (1..=40).map(|i| schedules[1].variance(i)).sum::<f64>() / 40.0;
        assert!((block - 1.0).abs() < 1e-12);
        let block2: f64 = (41..=80).map(|i| schedules[1].variance(i)).sum::<f64>() / 40.0;
        assert!((block2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(LifetimeSchedule::iid(0.0, 1.0).is_err());
        assert!(LifetimeSchedule::iid(1.0, -1.0).is_err());
        let s = LifetimeSchedule::iid(1.0, 1.0).unwrap();
        assert!(simulate_rpvv(&s, 0.0, 1).is_err());
        let bad = LifetimeSchedule::Alternating {
            first: GammaLaw::new(1.0, 1.0).unwrap(),
            second: GammaLaw::new(1.0, 2.0).unwrap(),
            grid: 4,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn equal_adjacent_means_rejected() {
        let a = LifetimeSchedule::iid(2.0, 24.0).unwrap();
        let b = LifetimeSchedule::iid(1.0, 12.0).unwrap();
        assert!(ChangePointModel::new(700.0, vec![a.clone(), b], vec![350.0]).is_err());
        let c = LifetimeSchedule::iid(2.0, 26.0).unwrap();
        assert!(ChangePointModel::new(700.0, vec![a.clone(), c.clone()], vec![700.0]).is_err());
        assert!(ChangePointModel::new(700.0, vec![a, c], vec![350.0]).is_ok());
    }

    #[test]
    fn zero_change_points_match_rpvv() {
        let s = LifetimeSchedule::iid(2.0, 24.0).unwrap();
        let model = ChangePointModel::stationary(300.0, s.clone()).unwrap();
        assert_eq!(
            simulate_change_point_process(&model, 42).unwrap(),
            simulate_rpvv(&s, 300.0, 42).unwrap()
        );
    }

    #[test]
    fn three_change_point_segment_rates() {
        let model = ChangePointModel::three_change_points();
        model.validate().unwrap();
        let bounds = model.boundaries();
        let expected = [8.0, 13.0, 18.0, 16.5];
        let reps = 100;
        let mut sums = [0.0; 4];
        for seed in 0..reps {
            let s = simulate_change_point_process(&model, seed).unwrap();
            for i in 0..4 {
                let n = s.counting(bounds[i + 1]) - s.counting(bounds[i]);
                sums[i] += n as f64 / (bounds[i + 1] - bounds[i]);
            }
        }
        for i in 0..4 {
            let r = sums[i] / reps as f64;
            assert!(
                (r - expected[i]).abs() < 0.03 * expected[i],
                "segment {i}: {r}"
            );
        }
    }

    #[test]
    fn segments_use_independent_streams() {
        let base = ChangePointModel::three_change_points();
        let mut altered = base.clone();
        altered.segments[3] = LifetimeSchedule::iid(2.0, 40.0).unwrap();
        let a = simulate_change_point_process(&base, 5).unwrap();
        let b = simulate_change_point_process(&altered, 5).unwrap();
        let cut = |s: &EventSeries| s.times()[..s.counting(500.0)].to_vec();
        assert_eq!(cut(&a), cut(&b));
        assert_ne!(a, b);
    }

    #[test]
    fn random_cp_parity_and_degenerate_gap() {
        let model = RandomChangePointModel::default();
        for seed in 0..50 {
            let r = simulate_random_cp_model(&model, seed).unwrap();
            assert_eq!(r.segment_process.len(), r.change_points.len() + 1);
            for (i, &p) in r.segment_process.iter().enumerate() {
                if i % 2 == 0 {
                    assert_eq!(p, 0)
                } else {
                    assert!((1..4).contains(&p))
                }
            }
            assert!(r.change_points.windows(2).all(|w| w[0] < w[1]));
            assert!(r.change_points.iter().all(|&c| c > 0.0 && c < 700.0));
        }
        let fixed = RandomChangePointModel {
            gap: GapLaw::Fixed { value: 701.0 },
            ..model
        };
        let r = simulate_random_cp_model(&fixed, 1).unwrap();
        assert!(r.change_points.is_empty());
        assert_eq!(r.segment_process, vec![0]);
    }

    #[test]
    fn reproducible_given_seed() {
        let m = RandomChangePointModel::default();
        assert_eq!(
            simulate_random_cp_model(&m, 9).unwrap().series,
            simulate_random_cp_model(&m, 9).unwrap().series
        );
        assert_ne!(
            simulate_random_cp_model(&m, 9).unwrap().series,
            simulate_random_cp_model(&m, 10).unwrap().series
        );
    }
}
