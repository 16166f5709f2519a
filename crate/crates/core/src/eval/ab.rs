use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::EvalError;
use crate::marketplace::{DisplayPolicy, SessionConfig, SessionEvent, Simulator, UserId};
use crate::rng::{derive_seed, mix64};

const ARM: u64 = 41;

/// How users are assigned to arms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbDesign {
    /// Users are hash-partitioned into two disjoint arms.
    #[default]
    UserSplit,
    /// Both arms replay the same sessions (same users and contexts), so only
    /// the policy differs. Not realizable online; useful for variance-free
    /// comparisons.
    Paired,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbConfig {
    pub n_sessions: usize,
    pub seed: u64,
    pub design: AbDesign,
    /// Pre-experiment covariate per user index. Under
    /// [`AbDesign::UserSplit`] users are then paired by it and each pair is
    /// split across the arms, so both pools hold comparable users at every
    /// position.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariate: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbReport {
    pub control_id: String,
    pub variant_id: String,
    pub design: AbDesign,
    pub n_sessions: usize,
    pub control_users: usize,
    pub variant_users: usize,
    pub control_purchases: usize,
    pub variant_purchases: usize,
    pub ccr_control: f64,
    pub ccr_variant: f64,
    /// `(ccr_variant - ccr_control) / ccr_control`.
    pub ccr_lift: f64,
    pub z: f64,
    pub p_value: f64,
}

/// Arm of `user` under `seed`: `false` for control, `true` for variant.
pub fn in_variant_arm(user: UserId, seed: u64) -> bool {
    mix64(user.0 as u64 ^ derive_seed(seed, &[ARM])) & 1 == 1
}

/// Control and variant user pools. With a `covariate` (indexed by user),
/// users are sorted by it, ties by id, and consecutive pairs are split one
/// per arm; the pools keep that order. An odd user out goes by hash.
pub fn arm_pools(
    users: &[UserId],
    seed: u64,
    design: AbDesign,
    covariate: Option<&[f64]>,
) -> (Vec<UserId>, Vec<UserId>) {
    match (design, covariate) {
        (AbDesign::Paired, _) => (users.to_vec(), users.to_vec()),
        (AbDesign::UserSplit, None) => users.iter().partition(|u| !in_variant_arm(**u, seed)),
        (AbDesign::UserSplit, Some(x)) => {
            let key = |u: &UserId| x.get(u.index()).copied().unwrap_or(f64::NAN);
            let mut sorted = users.to_vec();
            sorted.sort_by(|a, b| key(a).total_cmp(&key(b)).then(a.cmp(b)));
            let (mut control, mut variant) = (Vec::new(), Vec::new());
            for pair in sorted.chunks(2) {
                match *pair {
                    [a, b] if in_variant_arm(a, seed) => {
                        variant.push(a);
                        control.push(b);
                    }
                    [a, b] => {
                        control.push(a);
                        variant.push(b);
                    }
                    [a] if in_variant_arm(a, seed) => variant.push(a),
                    [a] => control.push(a),
                    _ => unreachable!("chunks(2) yields one or two users"),
                }
            }
            (control, variant)
        }
    }
}

/// Each user's smoothed conversion rate, `(purchases + 1) / (sessions + 2)`,
/// over `events`; a pre-experiment covariate for [`arm_pools`].
pub fn user_conversion(n_users: usize, events: &[SessionEvent]) -> Vec<f64> {
    let mut counts = vec![(0u32, 0u32); n_users];
    for e in events {
        if let Some(c) = counts.get_mut(e.user_id.index()) {
            c.0 += e.purchased_collection_id.is_some() as u32;
            c.1 += 1;
        }
    }
    counts
        .into_iter()
        .map(|(x, n)| (x as f64 + 1.0) / (n as f64 + 2.0))
        .collect()
}

/// Pooled two-proportion z-test of `x2/n2` against `x1/n1`. Returns
/// `(z, two-sided p)`; a zero standard error gives `(0, 1)`.
pub fn two_proportion_z_test(x1: usize, n1: usize, x2: usize, n2: usize) -> (f64, f64) {
    let (p1, p2) = (x1 as f64 / n1 as f64, x2 as f64 / n2 as f64);
    let pooled = (x1 + x2) as f64 / (n1 + n2) as f64;
    let se = (pooled * (1.0 - pooled) * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt();
    if !(se > 0.0) {
        return (0.0, 1.0);
    }
    let z = (p2 - p1) / se;
    let phi = Normal::standard().cdf(z.abs());
    (z, 2.0 * (1.0 - phi))
}

/// Runs `n_sessions` card sessions per arm. Both arms share the session
/// seed, so session `i` gets the same draws in both arms apart from the
/// policy (and, under [`AbDesign::UserSplit`], the user pool).
pub fn simulate_ab_test(
    sim: &Simulator<'_>,
    control: (&str, &dyn DisplayPolicy),
    variant: (&str, &dyn DisplayPolicy),
    cfg: &AbConfig,
) -> Result<AbReport, EvalError> {
    if cfg.n_sessions < 2 {
        return Err(EvalError::Config(format!(
            "an A/B test needs at least 2 sessions per arm, got {}",
            cfg.n_sessions
        )));
    }
    let (pool_c, pool_v) = arm_pools(
        &sim.market.user_ids(),
        cfg.seed,
        cfg.design,
        cfg.covariate.as_deref(),
    );
    if pool_c.is_empty() || pool_v.is_empty() {
        return Err(EvalError::Config("an A/B arm has no users".into()));
    }
    let run = |pool: &Vec<UserId>, policy: &dyn DisplayPolicy| -> Result<usize, EvalError> {
        let sc = SessionConfig {
            users: Some(pool.clone()),
            ..SessionConfig::new(sim.market, cfg.n_sessions, cfg.seed)
        };
        let events = sim.run(policy, &sc)?;
        Ok(events.iter().filter(|e| e.purchased_collection_id.is_some()).count())
    };
    let xc = run(&pool_c, control.1)?;
    let xv = run(&pool_v, variant.1)?;
    let n = cfg.n_sessions;
    let (ccr_control, ccr_variant) = (xc as f64 / n as f64, xv as f64 / n as f64);
    let ccr_lift = if xc == xv { 0.0 } else { (ccr_variant - ccr_control) / ccr_control };
    let (z, p_value) = two_proportion_z_test(xc, n, xv, n);
    Ok(AbReport {
        control_id: control.0.to_string(),
        variant_id: variant.0.to_string(),
        design: cfg.design,
        n_sessions: n,
        control_users: pool_c.len(),
        variant_users: pool_v.len(),
        control_purchases: xc,
        variant_purchases: xv,
        ccr_control,
        ccr_variant,
        ccr_lift,
        z,
        p_value,
    })
}
