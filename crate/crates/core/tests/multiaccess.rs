mod common;

use std::collections::BTreeSet;

use afdm::channel::build_ecm;
use afdm::constellation::{Constellation, ConstellationKind};
use afdm::detection::{data_model, detect_zf};
use afdm::multiaccess::{
    allocate_afdma, allocate_afdma_with, compute_guard, AllocationOptions, AllocationRequest, Direction, UserSpec,
};
use afdm::params::AfdmParams;
use afdm::profile::{DdPath, DdProfile};
use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;

use common::*;

fn profile(cells: &[(usize, f64)]) -> DdProfile {
    DdProfile::new(cells.iter().map(|&(l, k)| DdPath::new(c(1.0, 0.0), l, k)).collect()).unwrap()
}

#[test]
fn guard_examples() {
    let p = AfdmParams::new(16, 3.0 / 32.0, 0.0, 1).unwrap();
    assert_eq!(compute_guard(&profile(&[(0, 0.0)]), &p, 0), 0);
    assert_eq!(compute_guard(&profile(&[(1, 1.0), (0, -1.0)]), &p, 0), 5);
}

#[test]
fn ecm_energy_stays_inside_guard_window() {
    let mut r = rng(40);
    let n = 64;
    let params = AfdmParams::new(n, 5.0 / 128.0, 0.0, 3).unwrap();
    for _ in 0..10 {
        let prof = random_integer_profile(&mut r, 5, 3, 2);
        let ecm = build_ecm(&prof, &params).unwrap();
        let gamma = compute_guard(&prof, &params, 0) as i64;
        let (below, above) = (5 * prof.l_max() as i64 + prof.k_max() as i64, prof.k_max() as i64);
        assert_eq!(below + above, gamma);
        let total = ecm.frobenius_sq();
        let mut outside = 0.0;
        for col in 0..n {
            for row in 0..n {
                let off = (row as i64 - col as i64).rem_euclid(n as i64);
                let inside = off <= above || off >= n as i64 - below;
                if !inside {
                    outside += ecm.matrix[(row, col)].norm_sqr();
                }
            }
        }
        assert!(outside < 1e-10 * total);
    }
}

#[test]
fn single_user_gets_whole_frame() {
    let params = AfdmParams::ofdm(32, 0).unwrap();
    let users = [UserSpec::new(7, DdProfile::identity(), 31)];
    for dir in [Direction::Uplink, Direction::Downlink] {
        let plan = allocate_afdma(&users, &params, dir).unwrap();
        plan.validate().unwrap();
        let u = plan.user(7).unwrap();
        assert_eq!(u.data.len(), 31);
        assert_eq!(plan.total_guards(), 0);
        assert!(u.pilot.is_some() || plan.shared_pilot.is_some());
    }
}

fn three_users() -> Vec<UserSpec> {
    vec![
        UserSpec::new(1, profile(&[(0, 0.0), (1, 1.0)]), 20),
        UserSpec::new(2, profile(&[(0, 0.0), (3, -2.0), (2, 2.0)]), 30),
        UserSpec::new(3, profile(&[(0, 0.0)]), 25),
    ]
}

#[test]
fn three_users_disjoint_both_directions() {
    let params = AfdmParams::new(256, 5.0 / 512.0, 0.0, 3).unwrap();
    let users = three_users();
    let up = allocate_afdma(&users, &params, Direction::Uplink).unwrap();
    up.validate().unwrap();
    assert!(up.shared_pilot.is_none());
    assert!(up.users.iter().all(|u| u.pilot.is_some()));
    let down = allocate_afdma(&users, &params, Direction::Downlink).unwrap();
    down.validate().unwrap();
    assert!(down.shared_pilot.is_some());
    assert!(down.users.iter().all(|u| u.pilot.is_none()));
    for plan in [&up, &down] {
        for u in &users {
            assert!(plan.user(u.user_id).unwrap().data.len() >= u.demand);
        }
    }
    let per_user = allocate_afdma_with(
        &users,
        &params,
        Direction::Downlink,
        &AllocationOptions {
            per_user_pilot: true,
            ..Default::default()
        },
    )
    .unwrap();
    per_user.validate().unwrap();
    assert!(per_user.users.iter().all(|u| u.pilot.is_some()));
}

#[test]
fn capacity_exceeded_reported() {
    let params = AfdmParams::new(32, 5.0 / 64.0, 0.0, 3).unwrap();
    let users = vec![UserSpec::new(1, profile(&[(3, 2.0)]), 20), UserSpec::new(2, profile(&[(3, -2.0)]), 20)];
    assert!(allocate_afdma(&users, &params, Direction::Uplink).is_err());
}

#[test]
fn two_user_uplink_is_interference_free() {
    let mut r = rng(41);
    let n = 128;
    let params = AfdmParams::new(n, 5.0 / 256.0, 0.0, 3).unwrap();
    let cons = Constellation::new(ConstellationKind::Qpsk);
    for _ in 0..10 {
        let users = vec![
            UserSpec::new(1, random_integer_profile(&mut r, 4, 3, 2), 30),
            UserSpec::new(2, random_integer_profile(&mut r, 3, 2, 1), 30),
        ];
        let plan = allocate_afdma(&users, &params, Direction::Uplink).unwrap();
        plan.validate().unwrap();
        let mut frames = Vec::new();
        let mut received = vec![Complex64::default(); n];
        let mut contributions = Vec::new();
        for u in &users {
            let alloc = plan.user(u.user_id).unwrap();
            let data: Vec<_> = (0..alloc.data.len()).map(|_| cons.points()[r.random_range(0..4)]).collect();
            let frame = plan.user_frame(u.user_id, &data, 1.0).unwrap();
            let ecm = build_ecm(&u.profile, &params).unwrap();
            let y = ecm.apply(&frame.symbols).unwrap();
            for (acc, v) in received.iter_mut().zip(&y) {
                *acc += v;
            }
            contributions.push(y);
            frames.push((frame, ecm, data));
        }
        for (i, u) in users.iter().enumerate() {
            let rows = plan.footprint(u.user_id).unwrap();
            let other = &contributions[1 - i];
            let total: f64 = other.iter().map(|z| z.norm_sqr()).sum();
            let leak: f64 = rows.iter().map(|&row| other[row].norm_sqr()).sum();
            assert!(leak < 1e-10 * total, "IUI {leak}");

            // detect from the user's own rows only
            let (frame, ecm, data) = &frames[i];
            let (h, y) = data_model(ecm, frame, &received).unwrap();
            let keep: BTreeSet<usize> = rows.iter().copied().collect();
            let rows_h = h.select_rows(keep.iter());
            let rows_y: Vec<_> = keep.iter().map(|&row| y[row]).collect();
            let out = detect_zf(&rows_h, &rows_y, &cons).unwrap();
            assert_eq!(&out.symbols, data);
            let soft = DVector::from_vec(out.soft.unwrap());
            let want = DVector::from_column_slice(data);
            assert!((soft - want).norm() < 1e-8);
        }
    }
}

#[test]
fn ordering_never_worse_than_identity() {
    let mut r = rng(42);
    let params = AfdmParams::new(256, 5.0 / 512.0, 0.0, 3).unwrap();
    for _ in 0..10 {
        let users: Vec<_> = (0..4)
            .map(|id| {
                let l = r.random_range(0..=3);
                let k = r.random_range(0..=2);
                UserSpec::new(id, random_integer_profile(&mut r, 1, l, k), 20)
            })
            .collect();
        let plan = allocate_afdma(&users, &params, Direction::Uplink).unwrap();
        // identity ordering: each pilot guarded by its own width, and consecutive users u -> v need
        // above_u + below_v guards, wrapping
        let spreads: Vec<_> = users
            .iter()
            .map(|u| afdm::multiaccess::Spread::of(&u.profile, &params, 0))
            .collect();
        let own: usize = users.iter().map(|u| compute_guard(&u.profile, &params, 0)).sum();
        let identity: usize = own
            + (0..users.len())
                .map(|i| spreads[i].above + spreads[(i + 1) % users.len()].below)
                .sum::<usize>();
        assert!(plan.total_guards() <= identity);
    }
}

#[test]
fn request_document_round_trip() {
    let text = r#"
n = 64
direction = "uplink"

[[users]]
user_id = 1
demand = 20
paths = [{ gain_re = 1.0, gain_im = 0.0, delay = 0, doppler = 0.0 }, { gain_re = 0.5, gain_im = 0.0, delay = 2, doppler = 1.0 }]

[[users]]
user_id = 2
demand = 16
paths = [{ gain_re = 1.0, gain_im = 0.0, delay = 1, doppler = -1.0 }]
"#;
    let req = AllocationRequest::from_toml(text).unwrap();
    let plan = req.allocate().unwrap();
    plan.validate().unwrap();
    let json: serde_json::Value = serde_json::from_str(&plan.to_json()).unwrap();
    assert_eq!(json["n"], 64);
    assert!(AllocationRequest::from_toml(&format!("{text}\nbogus = 1")).is_err());
}
