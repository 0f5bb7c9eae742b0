//! AFDMA: orthogonal DAFT-domain resource allocation.
//!
//! A path `(l, k)` moves a symbol by a fixed DAFT-domain offset, so a user's
//! channel smears every symbol over a window `[-below, +above]` around it.
//! Users are kept orthogonal by separating their index blocks with guards
//! wide enough that no smeared symbol reaches another user's block.

use std::collections::BTreeSet;
use std::path::Path;

use itertools::Itertools;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::path_offset;
use crate::error::{AfdmError, Result};
use crate::estimation::{Frame, SymbolRole};
use crate::params::AfdmParams;
use crate::profile::{DdProfile, PathRecord, ProfileDocument, PROFILE_SCHEMA_VERSION};

/// Largest user count for which every ordering is tried.
pub const EXHAUSTIVE_ORDER_LIMIT: usize = 7;
/// Guard margin per side for profiles with fractional Doppler.
pub const FRACTIONAL_MARGIN_PER_SIDE: usize = 2;

/// One-sided DAFT-domain extents of a profile's spread.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Spread {
    pub below: usize,
    pub above: usize,
}

impl Spread {
    pub fn of(profile: &DdProfile, params: &AfdmParams, margin: usize) -> Self {
        let l = profile.l_max();
        let k = profile.k_max() as f64;
        let corners = [(0, -k), (0, k), (l, -k), (l, k)];
        let offsets = corners.iter().map(|&(l, k)| path_offset(params, l, k));
        let (lo, hi) = offsets.fold((0.0f64, 0.0f64), |(lo, hi), o| (lo.min(o), hi.max(o)));
        Self {
            below: (-lo - 1e-9).ceil().max(0.0) as usize + margin.div_ceil(2),
            above: (hi - 1e-9).ceil().max(0.0) as usize + margin / 2,
        }
    }

    pub fn width(&self) -> usize {
        self.below + self.above
    }
}

/// Default guard margin: zero for integer Doppler, two per side otherwise.
pub fn default_margin(profile: &DdProfile) -> usize {
    if profile.all_integer_doppler() {
        0
    } else {
        2 * FRACTIONAL_MARGIN_PER_SIDE
    }
}

/// Guard count `2N|c1| l_max + 2 k_max + margin`, clamped to `N - 1`.
pub fn compute_guard(profile: &DdProfile, params: &AfdmParams, margin: usize) -> usize {
    Spread::of(profile, params, margin)
        .width()
        .min(params.n_sub() - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Downlink,
    Uplink,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserSpec {
    pub user_id: u32,
    pub profile: DdProfile,
    pub demand: usize,
}

impl UserSpec {
    pub fn new(user_id: u32, profile: DdProfile, demand: usize) -> Self {
        Self {
            user_id,
            profile,
            demand,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AllocationOptions {
    /// Guard margin for every user; `None` picks [`default_margin`] per user.
    pub margin: Option<usize>,
    /// Downlink only: give each user its own pilot instead of a shared one.
    pub per_user_pilot: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserAllocation {
    pub user_id: u32,
    pub gamma: usize,
    pub spread: Spread,
    pub pilot: Option<usize>,
    pub guard: Vec<usize>,
    pub data: Vec<usize>,
}

impl UserAllocation {
    /// First and last index of the user's block (pilot, own guard, data).
    fn bounds(&self) -> Option<(usize, usize)> {
        let all = self.pilot.iter().chain(&self.guard).chain(&self.data);
        all.minmax().into_option().map(|(a, b)| (*a, *b))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationPlan {
    pub n: usize,
    pub direction: Direction,
    /// Downlink shared pilot and its guards.
    pub shared_pilot: Option<usize>,
    pub shared_guard: Vec<usize>,
    /// Users in frame order.
    pub users: Vec<UserAllocation>,
    /// Guards between user blocks.
    pub gap_guard: Vec<usize>,
    pub padding: Vec<usize>,
}

impl AllocationPlan {
    pub fn user(&self, user_id: u32) -> Option<&UserAllocation> {
        self.users.iter().find(|u| u.user_id == user_id)
    }

    /// All guard indices, shared, per-user and between blocks.
    pub fn total_guards(&self) -> usize {
        self.shared_guard.len() + self.gap_guard.len() + self.users.iter().map(|u| u.guard.len()).sum::<usize>()
    }

    /// Checks that no index is assigned twice and that every index is covered.
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        let sets = self
            .shared_pilot
            .iter()
            .chain(&self.shared_guard)
            .chain(&self.gap_guard)
            .chain(&self.padding)
            .chain(self.users.iter().flat_map(|u| u.pilot.iter().chain(&u.guard).chain(&u.data)));
        for &i in sets {
            if i >= self.n || !seen.insert(i) {
                return Err(AfdmError::InvalidParams(format!("index {i} assigned twice or out of range")));
            }
        }
        if seen.len() != self.n {
            return Err(AfdmError::InvalidParams(format!(
                "plan covers {} of {} indices",
                seen.len(),
                self.n
            )));
        }
        Ok(())
    }

    /// Rows a user's own symbols can reach through its channel.
    pub fn footprint(&self, user_id: u32) -> Option<Vec<usize>> {
        let u = self.user(user_id)?;
        let (first, last) = u.bounds()?;
        let n = self.n as i64;
        let rows = (first as i64 - u.spread.below as i64..=last as i64 + u.spread.above as i64)
            .map(|r| r.rem_euclid(n) as usize)
            .collect::<BTreeSet<_>>();
        Some(rows.into_iter().collect())
    }

    /// Frame a user transmits in the uplink: its pilot and data, zeros elsewhere.
    pub fn user_frame(&self, user_id: u32, data: &[Complex64], pilot_amplitude: f64) -> Result<Frame> {
        let u = self
            .user(user_id)
            .ok_or_else(|| AfdmError::InvalidParams(format!("unknown user {user_id}")))?;
        let mut frame = self.empty_frame();
        self.place(&mut frame, u, data, pilot_amplitude)?;
        Ok(frame)
    }

    /// Composite downlink frame carrying every user's data, in plan order.
    pub fn downlink_frame(&self, data: &[Vec<Complex64>], pilot_amplitude: f64) -> Result<Frame> {
        if data.len() != self.users.len() {
            return Err(AfdmError::LengthMismatch {
                expected: self.users.len(),
                actual: data.len(),
            });
        }
        let mut frame = self.empty_frame();
        if let Some(p) = self.shared_pilot {
            frame.symbols[p] = Complex64::new(pilot_amplitude, 0.0);
            frame.roles[p] = SymbolRole::Pilot;
        }
        for (u, d) in self.users.iter().zip(data) {
            self.place(&mut frame, u, d, pilot_amplitude)?;
        }
        Ok(frame)
    }

    fn empty_frame(&self) -> Frame {
        Frame {
            symbols: vec![Complex64::default(); self.n],
            roles: vec![SymbolRole::Guard; self.n],
        }
    }

    fn place(&self, frame: &mut Frame, u: &UserAllocation, data: &[Complex64], pilot_amplitude: f64) -> Result<()> {
        if data.len() != u.data.len() {
            return Err(AfdmError::LengthMismatch {
                expected: u.data.len(),
                actual: data.len(),
            });
        }
        if let Some(p) = u.pilot {
            frame.symbols[p] = Complex64::new(pilot_amplitude, 0.0);
            frame.roles[p] = SymbolRole::Pilot;
        }
        for (&i, &x) in u.data.iter().zip(data) {
            frame.symbols[i] = x;
            frame.roles[i] = SymbolRole::Data;
        }
        Ok(())
    }

    pub fn to_document(&self) -> PlanDocument {
        let role = |name: &str, idx: &[usize]| RoleRanges {
            role: name.to_string(),
            ranges: ranges(idx),
        };
        let mut shared = Vec::new();
        if let Some(p) = self.shared_pilot {
            shared.push(role("pilot", &[p]));
        }
        shared.push(role("guard", &self.shared_guard));
        shared.push(role("gap_guard", &self.gap_guard));
        shared.push(role("padding", &self.padding));
        shared.retain(|r| !r.ranges.is_empty());
        PlanDocument {
            n: self.n,
            direction: self.direction,
            total_guards: self.total_guards(),
            shared,
            users: self
                .users
                .iter()
                .map(|u| UserDocument {
                    user_id: u.user_id,
                    gamma: u.gamma,
                    roles: [
                        role("pilot", &u.pilot.into_iter().collect::<Vec<_>>()),
                        role("guard", &u.guard),
                        role("data", &u.data),
                    ]
                    .into_iter()
                    .filter(|r| !r.ranges.is_empty())
                    .collect(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("plan serializes")
    }
}

/// Half-open index ranges `[start, end)`.
fn ranges(indices: &[usize]) -> Vec<[usize; 2]> {
    let mut sorted = indices.to_vec();
    sorted.sort_unstable();
    let mut out: Vec<[usize; 2]> = Vec::new();
    for i in sorted {
        match out.last_mut() {
            Some(r) if r[1] == i => r[1] += 1,
            _ => out.push([i, i + 1]),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanDocument {
    pub n: usize,
    pub direction: Direction,
    pub total_guards: usize,
    pub shared: Vec<RoleRanges>,
    pub users: Vec<UserDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserDocument {
    pub user_id: u32,
    pub gamma: usize,
    pub roles: Vec<RoleRanges>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoleRanges {
    pub role: String,
    pub ranges: Vec<[usize; 2]>,
}

struct Demand {
    id: u32,
    demand: usize,
    spread: Spread,
    gamma: usize,
}

/// Guard overhead of placing users in `order`.
fn overhead(users: &[Demand], order: &[usize], direction: Direction, opts: &AllocationOptions) -> usize {
    let k = order.len();
    match (direction, opts.per_user_pilot) {
        (Direction::Uplink, _) => (0..k)
            .map(|i| {
                let (u, v) = (&users[order[i]], &users[order[(i + 1) % k]]);
                u.gamma + u.spread.above + v.spread.below
            })
            .sum(),
        (Direction::Downlink, false) => {
            let gmax = users.iter().map(|u| u.gamma).max().unwrap_or(0);
            2 * gmax + order.windows(2).map(|w| users[w[0]].gamma.max(users[w[1]].gamma)).sum::<usize>()
        }
        (Direction::Downlink, true) => (0..k)
            .map(|i| {
                let (u, v) = (&users[order[i]], &users[order[(i + 1) % k]]);
                u.gamma + u.gamma.max(v.gamma)
            })
            .sum(),
    }
}

/// Guard-minimizing user order: descending guard count, improved by an
/// exhaustive search for small user counts, never worse than input order.
fn choose_order(users: &[Demand], direction: Direction, opts: &AllocationOptions) -> Vec<usize> {
    let identity: Vec<usize> = (0..users.len()).collect();
    let mut best: Vec<usize> = identity.clone();
    best.sort_by_key(|&i| std::cmp::Reverse(users[i].gamma));
    let mut best_cost = overhead(users, &best, direction, opts);
    let mut consider = |order: Vec<usize>| {
        let cost = overhead(users, &order, direction, opts);
        if cost < best_cost {
            best_cost = cost;
            best = order;
        }
    };
    consider(identity.clone());
    if users.len() <= EXHAUSTIVE_ORDER_LIMIT {
        for perm in identity.iter().copied().permutations(users.len()) {
            consider(perm);
        }
    }
    best
}

/// A user set and frame size to allocate, as read from a TOML document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationRequest {
    pub n: usize,
    /// AFDM `c2`; `c1` is chosen for the largest Doppler across users.
    #[serde(default)]
    pub c2: f64,
    pub direction: Direction,
    #[serde(default)]
    pub options: AllocationOptions,
    pub users: Vec<UserRequest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserRequest {
    pub user_id: u32,
    pub demand: usize,
    pub paths: Vec<PathRecord>,
}

impl AllocationRequest {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| AfdmError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AfdmError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| AfdmError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn user_specs(&self) -> Result<Vec<UserSpec>> {
        self.users
            .iter()
            .map(|u| {
                let doc = ProfileDocument {
                    version: PROFILE_SCHEMA_VERSION,
                    paths: u.paths.clone(),
                };
                Ok(UserSpec::new(u.user_id, DdProfile::from_document(&doc)?, u.demand))
            })
            .collect()
    }

    /// AFDM parameters covering every user's delay and Doppler spread.
    pub fn params(&self) -> Result<AfdmParams> {
        let specs = self.user_specs()?;
        let l_max = specs.iter().map(|u| u.profile.l_max()).max().unwrap_or(0);
        let k_max = specs.iter().map(|u| u.profile.k_max()).max().unwrap_or(0);
        AfdmParams::afdm_for_doppler(self.n, l_max, k_max, self.c2)
    }

    pub fn allocate(&self) -> Result<AllocationPlan> {
        allocate_afdma_with(&self.user_specs()?, &self.params()?, self.direction, &self.options)
    }
}

pub fn allocate_afdma(users: &[UserSpec], params: &AfdmParams, direction: Direction) -> Result<AllocationPlan> {
    allocate_afdma_with(users, params, direction, &AllocationOptions::default())
}

pub fn allocate_afdma_with(
    users: &[UserSpec],
    params: &AfdmParams,
    direction: Direction,
    opts: &AllocationOptions,
) -> Result<AllocationPlan> {
    if users.is_empty() {
        return Err(AfdmError::InvalidParams("no users to allocate".into()));
    }
    let ids: BTreeSet<u32> = users.iter().map(|u| u.user_id).collect();
    if ids.len() != users.len() {
        return Err(AfdmError::InvalidParams("duplicate user ids".into()));
    }
    let n = params.n_sub();
    let sized: Vec<Demand> = users
        .iter()
        .map(|u| {
            let margin = opts.margin.unwrap_or_else(|| default_margin(&u.profile));
            let spread = Spread::of(&u.profile, params, margin);
            Demand {
                id: u.user_id,
                demand: u.demand,
                spread,
                gamma: spread.width(),
            }
        })
        .collect();
    let order = choose_order(&sized, direction, opts);
    let pilots = match (direction, opts.per_user_pilot) {
        (Direction::Downlink, false) => 1,
        _ => users.len(),
    };
    let required = sized.iter().map(|u| u.demand).sum::<usize>() + pilots + overhead(&sized, &order, direction, opts);
    if required > n {
        return Err(AfdmError::CapacityExceeded { required, available: n });
    }

    let mut cursor = 0usize;
    let mut take = |count: usize| -> Vec<usize> {
        let r: Vec<usize> = (cursor..cursor + count).collect();
        cursor += count;
        r
    };
    let mut plan = AllocationPlan {
        n,
        direction,
        shared_pilot: None,
        shared_guard: Vec::new(),
        users: Vec::new(),
        gap_guard: Vec::new(),
        padding: Vec::new(),
    };
    let k = order.len();
    let shared = direction == Direction::Downlink && !opts.per_user_pilot;
    if shared {
        let gmax = sized.iter().map(|u| u.gamma).max().unwrap_or(0);
        plan.shared_guard.extend(take(gmax));
        plan.shared_pilot = Some(take(1)[0]);
        plan.shared_guard.extend(take(gmax));
    }
    for (pos, &i) in order.iter().enumerate() {
        let u = &sized[i];
        let (pilot, guard) = if shared {
            (None, Vec::new())
        } else {
            (Some(take(1)[0]), take(u.gamma))
        };
        plan.users.push(UserAllocation {
            user_id: u.id,
            gamma: u.gamma,
            spread: u.spread,
            pilot,
            guard,
            data: take(u.demand),
        });
        let next = &sized[order[(pos + 1) % k]];
        let gap = match direction {
            Direction::Uplink => u.spread.above + next.spread.below,
            Direction::Downlink if shared => {
                if pos + 1 < k {
                    u.gamma.max(next.gamma)
                } else {
                    0
                }
            }
            Direction::Downlink => u.gamma.max(next.gamma),
        };
        if pos + 1 < k {
            plan.gap_guard.extend(take(gap));
        } else {
            // the closing gap wraps around; padding sits in front of it
            plan.padding.extend(take(n - required));
            plan.gap_guard.extend(take(gap));
        }
    }
    plan.validate()?;
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::DdPath;

    fn profile(paths: &[(usize, f64)]) -> DdProfile {
        DdProfile::new(
            paths
                .iter()
                .map(|&(l, k)| DdPath::new(Complex64::new(1.0, 0.0), l, k))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn guard_examples() {
        let p = AfdmParams::new(16, 3.0 / 32.0, 0.0, 2).unwrap();
        assert_eq!(compute_guard(&DdProfile::identity(), &p, 0), 0);
        assert_eq!(compute_guard(&profile(&[(0, 0.0), (1, 1.0), (1, -1.0)]), &p, 0), 5);
        assert_eq!(compute_guard(&profile(&[(2, 1.0)]), &p, 100), 15);
    }

    #[test]
    fn single_user_takes_whole_frame() {
        let p = AfdmParams::new(16, 3.0 / 32.0, 0.0, 2).unwrap();
        for dir in [Direction::Downlink, Direction::Uplink] {
            let plan = allocate_afdma(&[UserSpec::new(7, DdProfile::identity(), 15)], &p, dir).unwrap();
            let u = plan.user(7).unwrap();
            assert_eq!(u.data.len(), 15);
            assert_eq!(plan.total_guards(), 0);
            assert!(plan.padding.is_empty());
            assert!(plan.shared_pilot.is_some() || u.pilot.is_some());
        }
    }

    #[test]
    fn capacity_shortfall_named() {
        let p = AfdmParams::new(16, 3.0 / 32.0, 0.0, 2).unwrap();
        let users = [UserSpec::new(0, profile(&[(1, 1.0)]), 10)];
        match allocate_afdma(&users, &p, Direction::Uplink) {
            Err(AfdmError::CapacityExceeded { required, available }) => {
                assert_eq!(available, 16);
                assert!(required > 16);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ranges_compress() {
        assert_eq!(ranges(&[5, 1, 2, 3, 9]), vec![[1, 4], [5, 6], [9, 10]]);
        assert!(ranges(&[]).is_empty());
    }
}
