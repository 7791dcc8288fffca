//! Synthetic visit-log generator with a planted community signal.
//!
//! Clinicians are partitioned into communities; each patient is anchored to
//! one community and draws most visits from it, concentrated on a primary
//! clinician per role. A small set of hub providers (large facilities) sees
//! patients from every community and absorbs the top of the visit-frequency
//! ranking. A subset of "hot" communities initiates treatment more readily:
//! a patient's treatment probability is (base + gap * hot) scaled by a
//! latent severity factor, where `gap` is the configured signal strength.
//! Severity also drives a set of marker service codes, so the bag-of-words
//! baseline carries signal too — the community membership, visible only
//! through the graph structure, is what the relational features add:
//! individually, community clinicians are too low-volume for id indicators
//! to track.
//!
//! The base probability is calibrated by bisection so that the pooled
//! labeled rows across all intervals hit the configured positive rate in
//! expectation. Everything is driven by one seeded generator: equal
//! configs produce byte-identical logs.

use chrono::{Duration, NaiveDate};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::cohort::Interval;
use crate::error::{Error, Result};
use crate::graph::{EventType, Role, VisitEvent};

/// Fraction of communities that are treatment-eager.
const HOT_COMMUNITY_FRACTION: f64 = 0.2;
/// Probability that a visit goes to the patient's own primary clinician
/// for the role. Care concentrates on one clinician per patient, so raw
/// clinician-id indicators only describe patients whose primary happens to
/// be individually tracked, while the visit graph pools patients per
/// clinician and recovers the community for everyone.
const PRIMARY_CLINICIAN_RATE: f64 = 0.70;
/// For non-primary visits: probability of staying inside the patient's own
/// community rather than going to a uniformly random clinician.
const BASE_AFFINITY_LO: f64 = 0.50;
const BASE_AFFINITY_HI: f64 = 0.80;
/// Hot communities are tighter-knit: referral patterns concentrate around
/// treatment-eager groups. The higher cohesion also separates the
/// hot-community contrast from the other community contrasts in the graph
/// spectrum, so the contrast keeps a stable eigenvector position across
/// observation windows instead of mixing into a degenerate cluster.
const HOT_COMMUNITY_AFFINITY: f64 = 0.99;

/// Per-community home affinity. Each community gets a distinct cohesion
/// level: communities with equal cohesion would produce (near-)degenerate
/// contrast eigenvalues, and eigenvectors inside a degenerate cluster are
/// only determined up to rotation — they could not be matched up across
/// observation windows.
fn community_affinity(c: usize, n_hot: usize, n_communities: usize) -> f64 {
    if c < n_hot {
        return HOT_COMMUNITY_AFFINITY;
    }
    let n_base = n_communities - n_hot;
    if n_base <= 1 {
        return BASE_AFFINITY_LO;
    }
    let t = (c - n_hot) as f64 / (n_base - 1) as f64;
    BASE_AFFINITY_LO + (BASE_AFFINITY_HI - BASE_AFFINITY_LO) * t
}
/// Visit-kind mix: clinician-less lab results, diagnostic-role visits, and
/// follow-up visits.
const LAB_VISIT_RATE: f64 = 0.15;
const DIAG_VISIT_RATE: f64 = 0.425;
/// Hub providers per role: regional centers every patient visits now and
/// then, regardless of community. Their volume dwarfs any community
/// clinician's, so they fill the top-frequency clinician list — which makes
/// tracked-id indicators encode hub exposure, not community membership.
const N_HUB_CLINICIANS: usize = 25;
/// Share of clinician visits routed to a uniformly chosen hub.
const HUB_VISIT_RATE: f64 = 0.15;
/// Severity multiplier range: risk scales by 0.8 + 0.4 * severity, which
/// has mean 1 over the uniform severity draw.
const SEVERITY_BASE: f64 = 0.8;
const SEVERITY_SLOPE: f64 = 0.4;
/// Treatment probabilities are clamped away from 1 so calibration always
/// has headroom.
const MAX_TREAT_PROB: f64 = 0.97;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_patients: usize,
    pub n_diag_clinicians: usize,
    pub n_followup_clinicians: usize,
    pub n_communities: usize,
    /// Gap in expected treatment probability between hot and base
    /// communities.
    pub signal_strength: f64,
    /// Poisson mean of background visits per patient.
    pub visits_per_patient: f64,
    /// Target fraction of positive rows in the pooled labeled cohort.
    pub positive_rate_target: f64,
    pub seed: u64,
    /// Diagnoses are spread from here up to the start of the last interval.
    pub study_start: NaiveDate,
    /// Prediction intervals (consecutive, as produced by `split_intervals`);
    /// treatments are timed to land inside one of them.
    pub intervals: Vec<Interval>,
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.n_patients == 0
            || self.n_diag_clinicians == 0
            || self.n_followup_clinicians == 0
            || self.n_communities == 0
        {
            return Err(Error::Data(
                "synth: patient, clinician, and community counts must be positive".into(),
            ));
        }
        if self.n_diag_clinicians < self.n_communities
            || self.n_followup_clinicians < self.n_communities
        {
            return Err(Error::Data(
                "synth: each community needs at least one clinician of every role".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.signal_strength) {
            return Err(Error::Data(format!(
                "synth: signal_strength {} must lie in [0, 1)",
                self.signal_strength
            )));
        }
        if !(self.positive_rate_target > 0.0 && self.positive_rate_target < 1.0) {
            return Err(Error::Data(format!(
                "synth: positive_rate_target {} must lie in (0, 1)",
                self.positive_rate_target
            )));
        }
        if self.visits_per_patient.is_nan() || self.visits_per_patient <= 0.0 {
            return Err(Error::Data(
                "synth: visits_per_patient must be positive".into(),
            ));
        }
        if self.intervals.is_empty() {
            return Err(Error::Data("synth: no prediction intervals".into()));
        }
        for w in self.intervals.windows(2) {
            if w[0].end() != w[1].start() {
                return Err(Error::Data(
                    "synth: intervals must be consecutive".into(),
                ));
            }
        }
        if self.study_start >= self.intervals[self.intervals.len() - 1].start() {
            return Err(Error::Data(
                "synth: study_start must precede the last interval start".into(),
            ));
        }
        Ok(())
    }
}

struct PatientDraft {
    community: usize,
    severity: f64,
    diag_date: NaiveDate,
    /// Number of intervals whose start lies strictly after the diagnosis.
    eligible: usize,
}

/// Expected pooled positive rate if the base treatment probability were
/// `base`; monotone increasing in `base`.
fn expected_rate(base: f64, gap: f64, hot: &[bool], drafts: &[PatientDraft]) -> f64 {
    let mut pos = 0.0;
    let mut rows = 0.0;
    for d in drafts {
        let q = treat_probability(base, gap, hot[d.community], d.severity);
        let e = d.eligible as f64;
        pos += q;
        // A treated patient occupies, on average, (e+1)/2 rows (the
        // intervals up to and including the treated one); an untreated
        // patient occupies all e.
        rows += q * (e + 1.0) / 2.0 + (1.0 - q) * e;
    }
    pos / rows
}

fn treat_probability(base: f64, gap: f64, hot: bool, severity: f64) -> f64 {
    let community_prob = base + if hot { gap } else { 0.0 };
    (community_prob * (SEVERITY_BASE + SEVERITY_SLOPE * severity)).clamp(0.0, MAX_TREAT_PROB)
}

/// Calibrates the base community treatment probability so the expected
/// pooled positive rate matches the target.
fn calibrate_base(
    target: f64,
    gap: f64,
    hot: &[bool],
    drafts: &[PatientDraft],
) -> Result<f64> {
    let hi_limit = 1.0 - gap;
    let lo_rate = expected_rate(0.0, gap, hot, drafts);
    let hi_rate = expected_rate(hi_limit, gap, hot, drafts);
    if target < lo_rate || target > hi_rate {
        return Err(Error::Data(format!(
            "synth: positive_rate_target {target:.4} is infeasible with signal_strength \
             {gap:.4}; achievable range is [{lo_rate:.4}, {hi_rate:.4}]"
        )));
    }
    let (mut lo, mut hi) = (0.0, hi_limit);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if expected_rate(mid, gap, hot, drafts) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn uniform_date(rng: &mut ChaCha8Rng, from: NaiveDate, to: NaiveDate) -> NaiveDate {
    let span = (to - from).num_days();
    debug_assert!(span > 0);
    from + Duration::days(rng.gen_range(0..span))
}

/// Generates a synthetic event log. See the module docs for the model.
pub fn synth_generate(cfg: &SynthConfig) -> Result<Vec<VisitEvent>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let c = cfg.n_communities;
    let n_hot = (((c as f64) * HOT_COMMUNITY_FRACTION).round() as usize).clamp(1, c);
    let hot: Vec<bool> = (0..c).map(|i| i < n_hot).collect();

    // Contiguous community blocks on both clinician sides; hub ids sit past
    // the community range.
    let diag_ids: Vec<String> = (0..cfg.n_diag_clinicians + N_HUB_CLINICIANS)
        .map(|i| format!("D{i:04}"))
        .collect();
    let followup_ids: Vec<String> = (0..cfg.n_followup_clinicians + N_HUB_CLINICIANS)
        .map(|i| format!("F{i:04}"))
        .collect();
    let community_of = |i: usize, n: usize| i * c / n;
    let mut diag_by_community: Vec<Vec<usize>> = vec![Vec::new(); c];
    for i in 0..cfg.n_diag_clinicians {
        diag_by_community[community_of(i, cfg.n_diag_clinicians)].push(i);
    }
    let mut followup_by_community: Vec<Vec<usize>> = vec![Vec::new(); c];
    for i in 0..cfg.n_followup_clinicians {
        followup_by_community[community_of(i, cfg.n_followup_clinicians)].push(i);
    }

    let holdout_start = cfg.intervals[cfg.intervals.len() - 1].start();
    let study_end = cfg.intervals[cfg.intervals.len() - 1].end();

    // Latent patient state first, so calibration can see the population.
    let mut drafts = Vec::with_capacity(cfg.n_patients);
    for _ in 0..cfg.n_patients {
        let community = rng.gen_range(0..c);
        let severity: f64 = rng.gen_range(0.0..1.0);
        let diag_date = uniform_date(&mut rng, cfg.study_start, holdout_start);
        let eligible = cfg
            .intervals
            .iter()
            .filter(|iv| iv.start() > diag_date)
            .count();
        debug_assert!(eligible >= 1);
        drafts.push(PatientDraft {
            community,
            severity,
            diag_date,
            eligible,
        });
    }
    let base = calibrate_base(cfg.positive_rate_target, cfg.signal_strength, &hot, &drafts)?;

    let mut events: Vec<VisitEvent> = Vec::new();
    let poisson = Poisson::new(cfg.visits_per_patient)
        .map_err(|e| Error::Data(format!("synth: bad visit rate: {e}")))?;

    for (pi, d) in drafts.iter().enumerate() {
        let patient_id = format!("P{pi:06}");
        let affinity = community_affinity(d.community, n_hot, c);
        // Care concentrates on one primary clinician per role.
        let primary_diag = {
            let block = &diag_by_community[d.community];
            block[rng.gen_range(0..block.len())]
        };
        let primary_followup = {
            let block = &followup_by_community[d.community];
            block[rng.gen_range(0..block.len())]
        };
        let pick_clinician =
            |rng: &mut ChaCha8Rng, pool: &[String], by_comm: &[Vec<usize>], primary: usize| {
                let n_community = pool.len() - N_HUB_CLINICIANS;
                let r: f64 = rng.gen_range(0.0..1.0);
                let idx = if r < HUB_VISIT_RATE {
                    n_community + rng.gen_range(0..N_HUB_CLINICIANS)
                } else {
                    // Rescale the remaining mass over primary/home/anywhere.
                    let r = (r - HUB_VISIT_RATE) / (1.0 - HUB_VISIT_RATE);
                    if r < PRIMARY_CLINICIAN_RATE {
                        primary
                    } else if r
                        < PRIMARY_CLINICIAN_RATE + (1.0 - PRIMARY_CLINICIAN_RATE) * affinity
                    {
                        let block = &by_comm[d.community];
                        block[rng.gen_range(0..block.len())]
                    } else {
                        rng.gen_range(0..n_community)
                    }
                };
                pool[idx].clone()
            };

        // Diagnosis event anchors the record.
        events.push(VisitEvent {
            patient_id: patient_id.clone(),
            clinician_id: Some(pick_clinician(
                &mut rng,
                &diag_ids,
                &diag_by_community,
                primary_diag,
            )),
            date: d.diag_date,
            event_type: EventType::Diagnosis,
            role: Role::Diag,
            code: "CLL".to_string(),
        });

        // Treatment decision.
        let q = treat_probability(base, cfg.signal_strength, hot[d.community], d.severity);
        if rng.gen_bool(q) {
            let eligible: Vec<&Interval> = cfg
                .intervals
                .iter()
                .filter(|iv| iv.start() > d.diag_date)
                .collect();
            let iv = eligible[rng.gen_range(0..eligible.len())];
            events.push(VisitEvent {
                patient_id: patient_id.clone(),
                clinician_id: None,
                date: uniform_date(&mut rng, iv.start(), iv.end()),
                event_type: EventType::Treatment,
                role: Role::Na,
                code: "TRT".to_string(),
            });
        }

        // Background visits across the whole study window: care history
        // exists before diagnosis, so every look-back graph sees the
        // patient's referral pattern.
        let n_visits = poisson.sample(&mut rng) as usize;
        for _ in 0..n_visits {
            let date = uniform_date(&mut rng, cfg.study_start, study_end);
            let kind: f64 = rng.gen_range(0.0..1.0);
            // Service codes: 40 common codes with quadratically skewed
            // frequencies, plus a 10% tail of 1000 rare codes that fall
            // under any sensible vocabulary support threshold.
            let code = if rng.gen_bool(0.9) {
                let u: f64 = rng.gen_range(0.0..1.0);
                format!("S{:02}", (40.0 * u * u) as usize)
            } else {
                format!("R{:03}", rng.gen_range(0..1000))
            };
            if kind < LAB_VISIT_RATE {
                events.push(VisitEvent {
                    patient_id: patient_id.clone(),
                    clinician_id: None,
                    date,
                    event_type: EventType::Service,
                    role: Role::Na,
                    code: format!("L{:02}", rng.gen_range(0..20)),
                });
            } else if kind < LAB_VISIT_RATE + DIAG_VISIT_RATE {
                events.push(VisitEvent {
                    patient_id: patient_id.clone(),
                    clinician_id: Some(pick_clinician(
                        &mut rng,
                        &diag_ids,
                        &diag_by_community,
                        primary_diag,
                    )),
                    date,
                    event_type: EventType::Service,
                    role: Role::Diag,
                    code,
                });
            } else {
                events.push(VisitEvent {
                    patient_id: patient_id.clone(),
                    clinician_id: Some(pick_clinician(
                        &mut rng,
                        &followup_ids,
                        &followup_by_community,
                        primary_followup,
                    )),
                    date,
                    event_type: EventType::Service,
                    role: Role::Followup,
                    code,
                });
            }
        }

        // Severity-correlated condition markers, visible to the
        // bag-of-words baseline.
        for marker in crate::cohort::HISTORY_MARKER_CODES.iter() {
            if rng.gen_bool(0.15 + 0.55 * d.severity) {
                let repeats = 1 + usize::from(rng.gen_bool(0.4));
                for _ in 0..repeats {
                    events.push(VisitEvent {
                        patient_id: patient_id.clone(),
                        clinician_id: Some(pick_clinician(
                            &mut rng,
                            &followup_ids,
                            &followup_by_community,
                            primary_followup,
                        )),
                        date: uniform_date(&mut rng, cfg.study_start, study_end),
                        event_type: EventType::Service,
                        role: Role::Followup,
                        code: marker.to_string(),
                    });
                }
            }
        }
    }

    // Chronological log with a deterministic total order.
    events.sort_by(|a, b| {
        (a.date, &a.patient_id, a.event_type.as_str(), &a.code, &a.clinician_id).cmp(&(
            b.date,
            &b.patient_id,
            b.event_type.as_str(),
            &b.code,
            &b.clinician_id,
        ))
    });
    Ok(events)
}
