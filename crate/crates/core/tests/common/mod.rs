//! Shared fixtures and generators for the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use ndarray::{Array1, Array2};
use proptest::prelude::*;
use qoe_core::session::{Content, Motion, QualityLadder, QualityLevel, SegmentPlayback, StallEvent};
use qoe_core::{StreamingSession, VideoMeta};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const LADDER11: [(f64, u32, u32); 11] = [
    (235.0, 320, 240),
    (500.0, 640, 360),
    (1000.0, 1280, 720),
    (1500.0, 1280, 720),
    (2000.0, 1920, 1080),
    (2500.0, 1920, 1080),
    (3000.0, 1920, 1080),
    (4000.0, 1920, 1080),
    (5000.0, 1920, 1080),
    (6000.0, 1920, 1080),
    (7000.0, 1920, 1080),
];

pub fn ladder11() -> QualityLadder {
    ladder_from(&LADDER11)
}

pub fn ladder_from(rungs: &[(f64, u32, u32)]) -> QualityLadder {
    QualityLadder::new(
        rungs
            .iter()
            .enumerate()
            .map(|(i, &(b, w, h))| QualityLevel { index: i as u32 + 1, bitrate_kbps: b, width_px: w, height_px: h })
            .collect(),
    )
    .unwrap()
}

/// Two segments at levels 3 and 5, 4 s each, 2 s initial buffering and one
/// 1 s stall at playback position 4.
pub fn s1() -> StreamingSession {
    StreamingSession::new(
        "v1",
        ladder11(),
        2.0,
        vec![SegmentPlayback { level_index: 3, duration_s: 4.0 }, SegmentPlayback { level_index: 5, duration_s: 4.0 }],
        vec![StallEvent { after_playback_s: 4.0, duration_s: 1.0 }],
    )
    .unwrap()
}

pub fn meta(video_id: &str, psnr: Option<f64>) -> VideoMeta {
    VideoMeta {
        video_id: video_id.into(),
        fps: 24.0,
        si: 53.0,
        ti: 66.0,
        content: Content::Movie,
        motion: Motion::Smooth,
        mean_seq_psnr: psnr,
    }
}

fn ladder_strategy() -> impl Strategy<Value = QualityLadder> {
    prop::collection::vec((1.0f64..2000.0, 160u32..4000, 120u32..2200), 1..=11).prop_map(|steps| {
        let mut bitrate = 0.0;
        let rungs: Vec<(f64, u32, u32)> = steps
            .into_iter()
            .map(|(step, w, h)| {
                bitrate += step;
                (bitrate, w, h)
            })
            .collect();
        ladder_from(&rungs)
    })
}

/// Valid sessions over random ladders of 1 to 11 levels.
pub fn session_strategy() -> impl Strategy<Value = StreamingSession> {
    ladder_strategy().prop_flat_map(|ladder| {
        let levels = ladder.len() as u32;
        (
            Just(ladder),
            0.0f64..10.0,
            prop::collection::vec((1..=levels, 0.1f64..10.0), 1..20),
            prop::collection::vec((0.0f64..=1.0, 0.1f64..5.0), 0..6),
        )
            .prop_map(|(ladder, init, segs, stalls)| {
                let segments: Vec<SegmentPlayback> =
                    segs.into_iter().map(|(level_index, duration_s)| SegmentPlayback { level_index, duration_s }).collect();
                let rendered: f64 = segments.iter().map(|s| s.duration_s).sum();
                let stalls = stalls
                    .into_iter()
                    .map(|(frac, duration_s)| StallEvent { after_playback_s: frac * rendered, duration_s })
                    .collect();
                StreamingSession::new("v", ladder, init, segments, stalls).expect("generator emits valid sessions")
            })
    })
}

/// Design of `n` rows and `d` uniform columns in [0, 1) with a smooth
/// nonlinear target plus a little noise.
pub fn regression_fixture(n: usize, d: usize, seed: u64) -> (Array2<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((n, d), |_| rng.random::<f64>());
    let y = (0..n)
        .map(|i| {
            let r = x.row(i);
            (3.0 * r[0]).sin() + 2.0 * r[1 % d] * r[2 % d] - r[3 % d] + 0.1 * rng.random::<f64>()
        })
        .collect();
    (x, y)
}

/// Solves the augmented normal equations `[1 X]^T [1 X] b = [1 X]^T y` by
/// Gauss-Jordan elimination with partial pivoting.
pub fn normal_equations(x: &Array2<f64>, y: &Array1<f64>) -> Vec<f64> {
    let (n, d) = x.dim();
    let p = d + 1;
    let col = |i: usize, j: usize| if j == 0 { 1.0 } else { x[[i, j - 1]] };
    let mut a = vec![vec![0.0; p + 1]; p];
    for r in 0..p {
        for c in 0..p {
            a[r][c] = (0..n).map(|i| col(i, r) * col(i, c)).sum();
        }
        a[r][p] = (0..n).map(|i| col(i, r) * y[i]).sum();
    }
    for k in 0..p {
        let piv = (k..p).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        a.swap(k, piv);
        for r in 0..p {
            if r != k {
                let f = a[r][k] / a[k][k];
                for c in k..=p {
                    a[r][c] -= f * a[k][c];
                }
            }
        }
    }
    (0..p).map(|k| a[k][p] / a[k][k]).collect()
}

/// Pearson correlation of average ranks, each rank found by counting.
pub fn brute_force_spearman(x: &[f64], y: &[f64]) -> f64 {
    // rank = 1 + #smaller + (#equal - 1) / 2
    let rank = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|a| {
                let less = v.iter().filter(|b| *b < a).count() as f64;
                let eq = v.iter().filter(|b| *b == a).count() as f64;
                1.0 + less + (eq - 1.0) / 2.0
            })
            .collect()
    };
    let (rx, ry) = (rank(x), rank(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}
