use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::finite_dpp::{enumerate_probabilities, random_projection, Sampler};
use crate::gamma_kernel::{AdmissibleParams, LatticePoint};
use crate::palm::{
    palm_idempotency, verify_hierarchy_mc_weightings, verify_range_inclusion_with, PalmContext, Weighting,
};

use super::CheckResult;

fn pjson(label: &str, p: &AdmissibleParams, site: LatticePoint) -> Value {
    json!({ "label": label, "z": [p.z().re, p.z().im], "zp": [p.zp().re, p.zp().im], "p": site.x() })
}

fn palm_sets() -> Vec<(&'static str, AdmissibleParams)> {
    vec![
        ("principal", AdmissibleParams::principal(0.4, 0.7).unwrap()),
        ("complementary", AdmissibleParams::real(0.2, 0.6).unwrap()),
        ("degenerate", AdmissibleParams::real(0.3, 0.3).unwrap()),
    ]
}

/// `‖K(p)² − K(p)‖_max` on `X_R∖{p}` for the gamma kernel.
pub fn check_palm_idempotency(label: &str, p: &AdmissibleParams, site: LatticePoint, radius: usize, tol: f64) -> CheckResult {
    let params = json!({ "params": pjson(label, p, site), "radius": radius });
    CheckResult::run("check_palm_idempotency", params, tol, || {
        let r = palm_idempotency(&PalmContext::new(*p, site)?, radius, tol)?;
        Ok((r.residual, json!({ "residual_without_tail": r.residual_without_tail, "inner_radius": r.inner_radius,
                                "outer_radius": r.outer_radius })))
    })
}

pub(super) fn idempotency_battery() -> Vec<CheckResult> {
    palm_sets()
        .into_iter()
        .map(|(l, p)| check_palm_idempotency(l, &p, LatticePoint(0), 200, 1e-3))
        .collect()
}

/// Range inclusion residuals for `m ≤ m_max`, the corrected-basis variant, and
/// the point-mass negative control.
pub fn check_range_inclusion(
    label: &str,
    p: &AdmissibleParams,
    site: LatticePoint,
    m_max: usize,
    radius: usize,
    tol: f64,
) -> Vec<CheckResult> {
    let base = pjson(label, p, site);
    let start = std::time::Instant::now();
    let report = PalmContext::new(*p, site)
        .and_then(|ctx| verify_range_inclusion_with(&ctx, m_max, radius, 200_000, tol));
    let elapsed = start.elapsed().as_millis() as u64;
    let part = |name: &str, tolerance: f64, f: &dyn Fn(&crate::palm::RangeInclusionReport) -> (f64, Value)| {
        let params = json!({ "part": name, "params": base, "m_max": m_max, "radius": radius });
        CheckResult::run("check_range_inclusion", params, tolerance, || {
            let r = report.as_ref().map_err(Clone::clone)?;
            Ok(f(r))
        })
    };
    let mut out = vec![
        part("range", tol, &|r| {
            let worst = r.rows.iter().map(|row| row.residual).fold(0.0, f64::max);
            (worst, json!({ "rows": r.rows }))
        }),
        part("corrected_basis", tol, &|r| {
            let worst = r.corrected_basis_residuals.iter().cloned().fold(0.0, f64::max);
            (worst, json!({ "residuals": r.corrected_basis_residuals }))
        }),
        part("negative_control", 0.05, &|r| ((1.0 - r.negative_control).abs(), json!({ "residual": r.negative_control }))),
    ];
    // The three parts share one computation; each reports its full cost.
    for r in &mut out {
        r.runtime_ms += elapsed;
    }
    out
}

pub(super) fn range_battery() -> Vec<CheckResult> {
    palm_sets()
        .into_iter()
        .flat_map(|(l, p)| check_range_inclusion(l, &p, LatticePoint(0), 3, 200, 1e-3))
        .collect()
}

/// Reweighted samples of the shifted measure against the exact reduced Palm
/// probabilities on `T`, and the unweighted ablation, which must disagree.
pub fn check_hierarchy_mc(
    label: &str,
    p: &AdmissibleParams,
    site: LatticePoint,
    radius: usize,
    t: &[LatticePoint],
    samples: usize,
    seed: u64,
) -> Vec<CheckResult> {
    let base = json!({ "params": pjson(label, p, site), "radius": radius, "samples": samples, "seed": seed,
                       "sites": t.iter().map(|x| x.x()).collect::<Vec<_>>() });
    let start = std::time::Instant::now();
    let reports = PalmContext::new(*p, site).and_then(|ctx| {
        verify_hierarchy_mc_weightings(&ctx, radius, t, samples, seed, &[Weighting::PsiCheck, Weighting::Unit])
    });
    let elapsed = start.elapsed().as_millis() as u64;
    let mut weighted = base.clone();
    weighted["part"] = json!("reweighted");
    let mut ablation = base;
    ablation["part"] = json!("ablation");
    let mut out = vec![
        CheckResult::run("check_hierarchy_mc", weighted, 4.0, || {
            let r = &reports.as_ref().map_err(Clone::clone)?[0];
            Ok((r.max_abs_z, serde_json::to_value(r).unwrap_or(Value::Null)))
        }),
        // Passes when some pattern is more than 4σ off, i.e. 4/max|z| ≤ 1.
        CheckResult::run("check_hierarchy_mc", ablation, 1.0, || {
            let r = &reports.as_ref().map_err(Clone::clone)?[1];
            Ok((4.0 / r.max_abs_z, json!({ "max_abs_z": r.max_abs_z, "total_variation": r.total_variation })))
        }),
    ];
    for r in &mut out {
        r.runtime_ms += elapsed;
    }
    out
}

pub(super) fn hierarchy_battery(seed: u64, samples: usize) -> Vec<CheckResult> {
    let t: Vec<LatticePoint> = [-2, -1, 1, 2].iter().map(|&k| LatticePoint(k)).collect();
    palm_sets()
        .into_iter()
        .take(2)
        .flat_map(|(l, p)| check_hierarchy_mc(l, &p, LatticePoint(0), 30, &t, samples, seed))
        .collect()
}

/// Chi-square goodness of fit of sampler draws against enumeration on 8 sites,
/// and exact cardinality for random projections.
pub fn check_sampler(seed: u64, samples: usize) -> Vec<CheckResult> {
    let chi = CheckResult::run(
        "check_sampler",
        json!({ "part": "chi_square", "sites": 8, "rank": 3, "samples": samples, "seed": seed }),
        4.0,
        || {
            let k = random_projection(8, 3, seed);
            let probs = enumerate_probabilities(&k)?;
            let sampler = Sampler::new(&k)?;
            let mut counts = vec![0usize; probs.len()];
            for omega in sampler.sample_many(seed, samples) {
                counts[omega.mask(k.window())? as usize] += 1;
            }
            let n = samples as f64;
            let (mut stat, mut cells) = (0.0, 0usize);
            let (mut pooled_obs, mut pooled_exp) = (0.0, 0.0);
            for (c, q) in counts.iter().zip(&probs) {
                let e = q.max(0.0) * n;
                if e >= 5.0 {
                    stat += (*c as f64 - e).powi(2) / e;
                    cells += 1;
                } else {
                    pooled_obs += *c as f64;
                    pooled_exp += e;
                }
            }
            if pooled_exp >= 5.0 {
                stat += (pooled_obs - pooled_exp).powi(2) / pooled_exp;
                cells += 1;
            }
            let dof = (cells - 1) as f64;
            let p_value = ChiSquared::new(dof).map(|d| d.sf(stat)).unwrap_or(0.0);
            Ok((-p_value.max(1e-300).log10(), json!({ "statistic": stat, "dof": dof, "p_value": p_value })))
        },
    );
    let cardinality = CheckResult::run(
        "check_sampler",
        json!({ "part": "cardinality", "seed": seed }),
        0.0,
        || {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut bad = 0usize;
            for trial in 0..20u64 {
                let n = rng.random_range(2..=12usize);
                let r = rng.random_range(0..=n);
                let k = random_projection(n, r, rng.random());
                let sampler = Sampler::new(&k)?;
                bad += sampler.sample_many(seed ^ trial, 200).iter().filter(|o| o.len() != r).count();
            }
            Ok((bad as f64, Value::Null))
        },
    );
    vec![chi, cardinality]
}
