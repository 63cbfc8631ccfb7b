//! Jump and outlier detection in high-degree detrending residues.
//!
//! A step or an isolated spike in the data leaves a characteristic ringing
//! pattern in the residue, `(I - P) s` where `P` projects onto the kept
//! polynomial degrees. Because `P` is known exactly, the detector fits these
//! position-specific patterns directly: find the strongest unmasked spike,
//! fit jump and outlier patterns anchored around it by local least squares,
//! record the best one, subtract it from the whole residue and repeat.

mod sliding;

pub use sliding::{
    analyze_store, merge_votes, sliding_analysis, window_starts, write_events_csv, write_events_jsonl, Analysis,
    AnomalyEvent, EventKind, Vote, WindowReport,
};

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::basis::{build_basis, OrthoBasis, DEFAULT_ORTH_TOL};
use crate::error::{Error, Result};
use crate::fit::{detrend, DataSeries};
use crate::lattice::Lattice;
use crate::summation::dot_compensated;
use crate::synth::{impulse_series, step_series};

/// Normal-consistency factor turning a median absolute deviation into a
/// standard deviation.
pub const MAD_TO_SIGMA: f64 = 1.482_602_218_505_602;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub window_points: usize,
    pub degree: usize,
    pub step_points: usize,
    /// Spike threshold in robust sigma units.
    pub spike_threshold_factor: f64,
    /// Points at each window edge where no event is reported.
    pub boundary_mask_points: usize,
    /// Edge points where a unit spike keeps less than this fraction of itself
    /// after detrending are masked as well.
    pub min_observability: f64,
    pub orth_tol: f64,
    pub max_gap_fraction: f64,
    /// Windows whose robust sigma exceeds this (km) are rejected.
    pub noise_ceiling_km: Option<f64>,
    /// Lower bound on sigma relative to the window's value spread, so that
    /// floating-point noise on exact inputs is never flagged.
    pub sigma_floor_rel: f64,
    /// Half width of the neighbourhood used to fit patterns.
    pub fit_half_width: usize,
    /// Minimum coefficient of determination for a pattern match.
    pub min_fit_quality: f64,
    /// Midnight jumps at or above this magnitude (km) are anomalous.
    pub anomalous_jump_floor_km: f64,
    /// Unmatched shapes at or above this magnitude (km) are maneuver-like.
    pub maneuver_floor_km: f64,
    pub max_events_per_window: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            window_points: 384,
            degree: 200,
            step_points: 96,
            spike_threshold_factor: 6.0,
            boundary_mask_points: 8,
            min_observability: 0.01,
            orth_tol: DEFAULT_ORTH_TOL,
            max_gap_fraction: crate::sp3::DEFAULT_MAX_GAP_FRACTION,
            noise_ceiling_km: None,
            sigma_floor_rel: 1e-12,
            fit_half_width: 12,
            min_fit_quality: 0.8,
            anomalous_jump_floor_km: 1e-4,
            maneuver_floor_km: 2e-4,
            max_events_per_window: 32,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.degree >= self.window_points {
            return Err(Error::params(format!(
                "degree {} must be below window size {}",
                self.degree, self.window_points
            )));
        }
        if self.step_points == 0 {
            return Err(Error::params("step must be at least one point"));
        }
        if 2 * self.boundary_mask_points >= self.window_points {
            return Err(Error::params("boundary mask covers the whole window"));
        }
        if !(0.0..1.0).contains(&self.min_observability) {
            return Err(Error::params("min observability must lie in [0, 1)"));
        }
        if !(self.spike_threshold_factor > 0.0) {
            return Err(Error::params("spike threshold must be positive"));
        }
        if !(self.orth_tol > 0.0) {
            return Err(Error::params("orth_tol must be positive"));
        }
        if !(0.0..=1.0).contains(&self.max_gap_fraction) {
            return Err(Error::params("max gap fraction must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.min_fit_quality) {
            return Err(Error::params("min fit quality must lie in [0, 1]"));
        }
        if self.fit_half_width == 0 {
            return Err(Error::params("fit half width must be positive"));
        }
        Ok(())
    }
}

/// Residue response to unit anomalies at a given window geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub window_points: usize,
    pub degree: usize,
    /// Where the unit anomalies were placed.
    pub position: usize,
    /// Mean height of the two spikes flanking a unit jump.
    pub jump_spike_ratio: f64,
    /// Central residue value for a unit outlier.
    pub outlier_recovery_ratio: f64,
    /// Central value minus the mean of its two neighbours for a unit outlier.
    pub outlier_total: f64,
    /// Residues of the unit experiments around `position`, `-half..=half`.
    pub jump_shape: Vec<f64>,
    pub outlier_shape: Vec<f64>,
}

const SHAPE_HALF_WIDTH: usize = 10;

type CalibrationCache = Mutex<HashMap<(usize, usize), Arc<Calibration>>>;

fn calibration_cache() -> &'static CalibrationCache {
    static CACHE: OnceLock<CalibrationCache> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Run the unit-jump and unit-outlier experiments on `window_points`
/// equidistant points with a degree-`degree` fit. Cached per geometry.
pub fn calibrate_templates(window_points: usize, degree: usize) -> Result<Arc<Calibration>> {
    if degree >= window_points || window_points < 3 {
        return Err(Error::params(format!(
            "calibration needs degree < window size, got {degree} and {window_points}"
        )));
    }
    let key = (window_points, degree);
    if let Some(c) = calibration_cache().lock().unwrap().get(&key) {
        return Ok(c.clone());
    }
    let lattice = Lattice::equidistant(window_points - 1)?;
    let basis = build_basis(&lattice, degree, DEFAULT_ORTH_TOL)?;
    // Same relative placement as the 101-point experiment with the anomaly at t = 40.
    let p = ((window_points - 1) as f64 * 0.4).round() as usize;
    let p = p.clamp(1, window_points - 2);
    let jump = detrend(&basis, &DataSeries::new(lattice.clone(), step_series(window_points, p, 1.0), "")?, degree)?.residue;
    let outlier = detrend(&basis, &DataSeries::new(lattice, impulse_series(window_points, p, 1.0), "")?, degree)?.residue;
    let lo = p.saturating_sub(SHAPE_HALF_WIDTH);
    let hi = (p + SHAPE_HALF_WIDTH).min(window_points - 1);
    let c = Arc::new(Calibration {
        window_points,
        degree,
        position: p,
        jump_spike_ratio: 0.5 * (jump[p] - jump[p - 1]),
        outlier_recovery_ratio: outlier[p],
        outlier_total: outlier[p] - 0.5 * (outlier[p - 1] + outlier[p + 1]),
        jump_shape: jump[lo..=hi].to_vec(),
        outlier_shape: outlier[lo..=hi].to_vec(),
    });
    calibration_cache().lock().unwrap().insert(key, c.clone());
    Ok(c)
}

/// Robust noise estimate and the spikes above threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanResult {
    pub sigma: f64,
    pub threshold: f64,
    /// Indices with `|residue| > threshold`, outside the masked edges, ascending.
    pub spikes: Vec<usize>,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn robust_sigma<'a>(values: impl Iterator<Item = &'a f64>) -> f64 {
    let v: Vec<f64> = values.copied().collect();
    let m = median(v.clone());
    MAD_TO_SIGMA * median(v.into_iter().map(|x| (x - m).abs()).collect())
}

fn unmasked(len: usize, mask: usize) -> std::ops::Range<usize> {
    mask.min(len)..len.saturating_sub(mask)
}

/// Threshold the residue against a robust noise scale estimated over the
/// unmasked interior. `sigma_floor` bounds the scale from below.
pub fn scan_residue(residue: &[f64], sigma_floor: f64, config: &DetectorConfig) -> Result<ScanResult> {
    let range = unmasked(residue.len(), config.boundary_mask_points);
    let sigma = robust_sigma(residue[range.clone()].iter()).max(sigma_floor);
    if let Some(ceiling) = config.noise_ceiling_km {
        if sigma > ceiling {
            return Err(Error::WindowTooNoisy { sigma, ceiling });
        }
    }
    let threshold = config.spike_threshold_factor * sigma;
    let spikes = range.filter(|&j| residue[j].abs() > threshold).collect();
    Ok(ScanResult {
        sigma,
        threshold,
        spikes,
    })
}

/// Split ascending spike indices into runs of adjacent points.
pub fn cluster_spikes(spikes: &[usize]) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for &s in spikes {
        match out.last_mut() {
            Some(c) if s == c[c.len() - 1] + 1 => c.push(s),
            _ => out.push(vec![s]),
        }
    }
    out
}

/// The complement projector `I - P` for the first `degree + 1` basis columns.
pub struct Projector<'a> {
    basis: &'a OrthoBasis,
    degree: usize,
}

impl<'a> Projector<'a> {
    pub fn new(basis: &'a OrthoBasis, degree: usize) -> Result<Self> {
        if degree > basis.max_degree() {
            return Err(Error::DegreeOutOfRange {
                degree,
                max: basis.max_degree(),
            });
        }
        Ok(Projector { basis, degree })
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn complement(&self, v: &[f64]) -> Vec<f64> {
        let mut out = v.to_vec();
        for k in 0..=self.degree {
            let q = self.basis.column_unchecked(k);
            let c = dot_compensated(v, q);
            out.iter_mut().zip(q).for_each(|(o, qj)| *o = (-c).mul_add(*qj, *o));
        }
        out
    }

    /// Residue of a unit step starting at point `p`.
    pub fn jump_template(&self, p: usize) -> Vec<f64> {
        self.complement(&step_series(self.len(), p, 1.0))
    }

    /// Residue of a unit spike at point `p`.
    pub fn outlier_template(&self, p: usize) -> Vec<f64> {
        self.complement(&impulse_series(self.len(), p, 1.0))
    }

    /// Fraction of a unit spike at `p` that survives detrending.
    pub fn observability(&self, p: usize) -> f64 {
        let leverage = crate::summation::sum_compensated((0..=self.degree).map(|k| {
            let q = self.basis.column_unchecked(k)[p];
            q * q
        }));
        1.0 - leverage
    }

    /// Points outside the mask where anomalies can still be seen.
    pub fn interior(&self, config: &DetectorConfig) -> std::ops::Range<usize> {
        let n = self.len();
        let mut r = unmasked(n, config.boundary_mask_points);
        while !r.is_empty() && self.observability(r.start) < config.min_observability {
            r.start += 1;
        }
        while !r.is_empty() && self.observability(r.end - 1) < config.min_observability {
            r.end -= 1;
        }
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pattern {
    Jump,
    Outlier,
}

/// A pattern fitted to the residue near a spike.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatternFit {
    pub pattern: Pattern,
    /// Jump: first point at the new level. Outlier: the displaced point.
    pub position: usize,
    /// Signed anomaly size in the units of the series.
    pub amplitude: f64,
    /// Coefficient of determination of the local fit.
    pub quality: f64,
    /// Full-length residue of the fitted anomaly, `amplitude * template`.
    #[serde(skip)]
    pub contribution: Vec<f64>,
}

/// Outcome of matching the residue near `peak` against the patterns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Classification {
    Matched(PatternFit),
    /// No pattern explains the shape; `peak_abs` is the raw residue height.
    Unmatched { peak: usize, peak_abs: f64, best_quality: f64 },
}

fn local_fit(residue: &[f64], template: &[f64], range: std::ops::Range<usize>) -> Option<(f64, f64)> {
    let r = &residue[range.clone()];
    let t = &template[range];
    let tt = dot_compensated(t, t);
    let rr = dot_compensated(r, r);
    if !(tt > 0.0) || !(rr > 0.0) {
        return None;
    }
    let a = dot_compensated(r, t) / tt;
    let sse: f64 = r.iter().zip(t).map(|(x, y)| (x - a * y).powi(2)).sum();
    Some((a, 1.0 - sse / rr))
}

/// Fit jump and outlier patterns anchored near `peak` and return the best.
///
/// Positions inside the masked edges are tried too when `peak` is close to
/// them, so that ringing from an anomaly hidden by the mask is explained
/// rather than mistaken for a new event.
pub fn classify_pattern(
    projector: &Projector<'_>,
    residue: &[f64],
    peak: usize,
    config: &DetectorConfig,
) -> Classification {
    let n = residue.len();
    let half = config.fit_half_width;
    let interior = projector.interior(config);
    let range = peak.saturating_sub(half)..(peak + half + 1).min(n);

    let mut candidates: Vec<(Pattern, usize)> = Vec::new();
    for p in peak.saturating_sub(1)..=(peak + 2).min(n - 1) {
        if p >= 1 {
            candidates.push((Pattern::Jump, p));
        }
    }
    for p in peak.saturating_sub(1)..=(peak + 1).min(n - 1) {
        candidates.push((Pattern::Outlier, p));
    }
    if peak < interior.start + half {
        candidates.extend((1..interior.start.max(1)).map(|p| (Pattern::Jump, p)));
        candidates.extend((0..interior.start).map(|p| (Pattern::Outlier, p)));
    }
    if peak + half >= interior.end {
        candidates.extend((interior.end..n).map(|p| (Pattern::Jump, p)));
        candidates.extend((interior.end..n).map(|p| (Pattern::Outlier, p)));
    }
    candidates.sort_by_key(|&(pat, p)| (p, pat == Pattern::Outlier));
    candidates.dedup();

    let mut best: Option<PatternFit> = None;
    for (pattern, p) in candidates {
        let template = match pattern {
            Pattern::Jump => projector.jump_template(p),
            Pattern::Outlier => projector.outlier_template(p),
        };
        let Some((amplitude, quality)) = local_fit(residue, &template, range.clone()) else {
            continue;
        };
        if best.as_ref().is_none_or(|b| quality > b.quality) {
            let contribution = template.into_iter().map(|t| amplitude * t).collect();
            best = Some(PatternFit {
                pattern,
                position: p,
                amplitude,
                quality,
                contribution,
            });
        }
    }
    match best {
        Some(b) if b.quality >= config.min_fit_quality => Classification::Matched(b),
        b => Classification::Unmatched {
            peak,
            peak_abs: residue[peak].abs(),
            best_quality: b.map_or(0.0, |b| b.quality),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocalKind {
    Jump,
    Outlier,
    Unmatched,
}

/// An anomaly found in one window, located by point index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalEvent {
    pub index: usize,
    pub kind: LocalKind,
    /// Signed size; for unmatched shapes the signed residue peak.
    pub amplitude: f64,
    pub confidence: f64,
    /// Size implied by the calibrated spike heights alone.
    pub spike_estimate: f64,
}

impl LocalEvent {
    pub fn magnitude(&self) -> f64 {
        self.amplitude.abs()
    }
}

/// Result of analysing one residue.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowScan {
    pub sigma: f64,
    pub events: Vec<LocalEvent>,
    /// Anomalies explained by a pattern anchored inside the mask; they are
    /// removed but reported by a neighbouring window instead.
    pub hidden: usize,
}

fn spike_estimate(isolated: &[f64], pattern: Pattern, p: usize, cal: Option<&Calibration>) -> f64 {
    let Some(cal) = cal else { return f64::NAN };
    match pattern {
        Pattern::Jump if p >= 1 => 0.5 * (isolated[p] - isolated[p - 1]) / cal.jump_spike_ratio,
        Pattern::Outlier => isolated[p] / cal.outlier_recovery_ratio,
        _ => f64::NAN,
    }
}

#[derive(Clone)]
struct Component {
    pattern: Pattern,
    position: usize,
    template: Vec<f64>,
    amplitude: f64,
    quality: f64,
    reported: bool,
}

/// Solve the symmetric positive definite system `a x = b` in place by
/// Cholesky factorization. Returns `None` when `a` is not positive definite.
fn solve_spd(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let k = b.len();
    for j in 0..k {
        let d = a[j][j] - (0..j).map(|m| a[j][m] * a[j][m]).sum::<f64>();
        if !(d > 0.0) {
            return None;
        }
        a[j][j] = d.sqrt();
        for i in j + 1..k {
            let s = a[i][j] - (0..j).map(|m| a[i][m] * a[j][m]).sum::<f64>();
            a[i][j] = s / a[j][j];
        }
    }
    for i in 0..k {
        b[i] = (b[i] - (0..i).map(|m| a[i][m] * b[m]).sum::<f64>()) / a[i][i];
    }
    for i in (0..k).rev() {
        b[i] = (b[i] - (i + 1..k).map(|m| a[m][i] * b[m]).sum::<f64>()) / a[i][i];
    }
    Some(b)
}

/// Least-squares amplitudes of all components against `residue`, ignoring
/// points where `excluded` is set.
fn joint_refit(components: &mut [Component], residue: &[f64], excluded: &[bool]) {
    let k = components.len();
    let wdot = |x: &[f64], y: &[f64]| -> f64 {
        crate::summation::sum_compensated(
            x.iter().zip(y).zip(excluded).filter(|(_, e)| !**e).map(|((a, b), _)| a * b),
        )
    };
    let mut g = vec![vec![0.0; k]; k];
    let mut b = vec![0.0; k];
    for i in 0..k {
        for j in 0..=i {
            g[i][j] = wdot(&components[i].template, &components[j].template);
            g[j][i] = g[i][j];
        }
        b[i] = wdot(&components[i].template, residue);
    }
    if let Some(x) = solve_spd(g, b) {
        components.iter_mut().zip(x).for_each(|(c, a)| c.amplitude = a);
    }
}

fn remainder(residue: &[f64], components: &[Component]) -> Vec<f64> {
    let mut r = residue.to_vec();
    for c in components {
        r.iter_mut().zip(&c.template).for_each(|(x, t)| *x = (-c.amplitude).mul_add(*t, *x));
    }
    r
}

fn misfit(residue: &[f64], components: &[Component], excluded: &[bool]) -> f64 {
    let r = remainder(residue, components);
    crate::summation::sum_compensated(r.iter().zip(excluded).filter(|(_, e)| !**e).map(|(x, _)| x * x))
}

// Anomalies hidden at the edges ring across the whole window, so a local fit
// can pick a neighbouring position. Settle each one on the full window.
fn polish_hidden(
    projector: &Projector<'_>,
    interior: &std::ops::Range<usize>,
    components: &mut [Component],
    residue: &[f64],
    excluded: &[bool],
) {
    let n = residue.len();
    for i in 0..components.len() {
        if components[i].reported {
            continue;
        }
        let zone = if components[i].position < interior.start { 0..interior.start } else { interior.end..n };
        let mut best = misfit(residue, components, excluded);
        let current = (components[i].pattern, components[i].position);
        for pattern in [Pattern::Jump, Pattern::Outlier] {
            for p in zone.clone() {
                let taken = components.iter().any(|c| c.pattern == pattern && c.position == p);
                if taken || (pattern == Pattern::Jump && p == 0) {
                    continue;
                }
                let mut trial = components.to_vec();
                trial[i].pattern = pattern;
                trial[i].position = p;
                trial[i].template = match pattern {
                    Pattern::Jump => projector.jump_template(p),
                    Pattern::Outlier => projector.outlier_template(p),
                };
                joint_refit(&mut trial, residue, excluded);
                let m = misfit(residue, &trial, excluded);
                if m < best {
                    best = m;
                    components.clone_from_slice(&trial);
                }
            }
        }
        if (components[i].pattern, components[i].position) != current {
            log::trace!("hidden component moved from {current:?} to {:?}", (components[i].pattern, components[i].position));
        }
    }
}

/// Iteratively extract anomalies from a residue computed with `projector`.
///
/// Every accepted pattern is refitted jointly with the earlier ones, so the
/// ringing of one anomaly does not bias the size of its neighbours.
pub fn analyze_residue(
    projector: &Projector<'_>,
    residue: &[f64],
    sigma_floor: f64,
    calibration: Option<&Calibration>,
    config: &DetectorConfig,
) -> Result<WindowScan> {
    let n = residue.len();
    let mut r = residue.to_vec();
    let interior = projector.interior(config);
    let mut consumed = vec![false; n];
    let mut components: Vec<Component> = Vec::new();
    let mut unmatched: Vec<LocalEvent> = Vec::new();
    let mut first_sigma = None;

    for _ in 0..4 * config.max_events_per_window {
        let reported = components.iter().filter(|c| c.reported).count() + unmatched.len();
        if reported >= config.max_events_per_window {
            break;
        }
        let live = interior.clone().filter(|&j| !consumed[j]);
        let sigma = robust_sigma(live.clone().map(|j| &r[j])).max(sigma_floor);
        if first_sigma.is_none() {
            if let Some(ceiling) = config.noise_ceiling_km {
                if sigma > ceiling {
                    return Err(Error::WindowTooNoisy { sigma, ceiling });
                }
            }
            first_sigma = Some(sigma);
        }
        let threshold = config.spike_threshold_factor * sigma;
        let Some(peak) = live.max_by(|&a, &b| r[a].abs().total_cmp(&r[b].abs()).then(b.cmp(&a))) else {
            break;
        };
        if r[peak].abs() <= threshold {
            break;
        }
        match classify_pattern(projector, &r, peak, config) {
            Classification::Matched(fit) => {
                let known = components
                    .iter_mut()
                    .find(|c| c.pattern == fit.pattern && c.position == fit.position);
                match known {
                    Some(c) => c.quality = c.quality.max(fit.quality),
                    None => components.push(Component {
                        pattern: fit.pattern,
                        position: fit.position,
                        template: match fit.pattern {
                            Pattern::Jump => projector.jump_template(fit.position),
                            Pattern::Outlier => projector.outlier_template(fit.position),
                        },
                        amplitude: fit.amplitude,
                        quality: fit.quality,
                        reported: interior.contains(&fit.position),
                    }),
                }
                let before = r.clone();
                joint_refit(&mut components, residue, &consumed);
                polish_hidden(projector, &interior, &mut components, residue, &consumed);
                r = remainder(residue, &components);
                if r[peak].abs() >= 0.5 * before[peak].abs() {
                    consumed[peak] = true;
                }
            }
            Classification::Unmatched { peak, best_quality, .. } => {
                let lo = peak.saturating_sub(config.fit_half_width);
                let hi = (peak + config.fit_half_width + 1).min(n);
                consumed[lo..hi].iter_mut().for_each(|c| *c = true);
                unmatched.push(LocalEvent {
                    index: peak,
                    kind: LocalKind::Unmatched,
                    amplitude: r[peak],
                    confidence: best_quality.clamp(0.0, 1.0),
                    spike_estimate: f64::NAN,
                });
            }
        }
    }

    let hidden = components.iter().filter(|c| !c.reported).count();
    let mut events: Vec<LocalEvent> = components
        .iter()
        .filter(|c| c.reported)
        .map(|c| {
            let isolated: Vec<f64> = r.iter().zip(&c.template).map(|(x, t)| c.amplitude.mul_add(*t, *x)).collect();
            LocalEvent {
                index: c.position,
                kind: match c.pattern {
                    Pattern::Jump => LocalKind::Jump,
                    Pattern::Outlier => LocalKind::Outlier,
                },
                amplitude: c.amplitude,
                confidence: c.quality.clamp(0.0, 1.0),
                spike_estimate: spike_estimate(&isolated, c.pattern, c.position, calibration),
            }
        })
        .chain(unmatched)
        .collect();
    events.sort_by(|a, b| a.index.cmp(&b.index).then((a.kind as u8).cmp(&(b.kind as u8))));
    Ok(WindowScan {
        sigma: first_sigma.unwrap_or(sigma_floor),
        events,
        hidden,
    })
}

/// Spread of the series used to scale the sigma floor.
pub fn series_spread(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mean = crate::summation::sum_compensated(values.iter().copied()) / values.len() as f64;
    values.iter().fold(0.0f64, |a, v| a.max((v - mean).abs()))
}

/// Detrend one series and extract its anomalies.
pub fn detect_in_series(
    basis: &OrthoBasis,
    series: &DataSeries,
    config: &DetectorConfig,
) -> Result<WindowScan> {
    config.validate()?;
    let fit = detrend(basis, series, config.degree)?;
    let projector = Projector::new(basis, config.degree)?;
    let calibration = calibrate_templates(series.len(), config.degree).ok();
    let floor = config.sigma_floor_rel * series_spread(series.values());
    analyze_residue(&projector, &fit.residue, floor, calibration.as_deref(), config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clusters_are_contiguous_runs() {
        assert_eq!(cluster_spikes(&[3, 4, 9, 11, 12]), vec![vec![3, 4], vec![9], vec![11, 12]]);
        assert!(cluster_spikes(&[]).is_empty());
    }

    #[test]
    fn mask_suppresses_edge_spike() {
        let mut r = vec![0.0; 50];
        r[0] = 10.0;
        r[25] = 10.0;
        let cfg = DetectorConfig {
            boundary_mask_points: 8,
            ..DetectorConfig::default()
        };
        let s = scan_residue(&r, 1e-3, &cfg).unwrap();
        assert_eq!(s.spikes, vec![25]);
    }

    #[test]
    fn zero_residue_has_no_spikes() {
        let s = scan_residue(&[0.0; 40], 0.0, &DetectorConfig::default()).unwrap();
        assert!(s.spikes.is_empty());
    }

    #[test]
    fn noise_ceiling() {
        let r: Vec<f64> = (0..60).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let cfg = DetectorConfig {
            noise_ceiling_km: Some(0.5),
            ..DetectorConfig::default()
        };
        assert!(matches!(scan_residue(&r, 0.0, &cfg), Err(Error::WindowTooNoisy { .. })));
    }

    #[test]
    fn config_validation() {
        assert!(DetectorConfig::default().validate().is_ok());
        let bad = DetectorConfig {
            degree: 384,
            ..DetectorConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = DetectorConfig {
            step_points: 0,
            ..DetectorConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn small_geometry_calibration() {
        let c = calibrate_templates(101, 50).unwrap();
        assert_eq!(c.position, 40);
        assert!((c.jump_spike_ratio - 0.33).abs() < 0.02, "{c:?}");
        assert!(c.outlier_total > 0.8 && c.outlier_total < 1.0);
        assert!(c.outlier_recovery_ratio > 0.5 && c.outlier_recovery_ratio < 1.0);
        assert_eq!(c.jump_shape.len(), 21);
        assert!(Arc::ptr_eq(&c, &calibrate_templates(101, 50).unwrap()));
        assert!(calibrate_templates(50, 50).is_err());
    }
}
