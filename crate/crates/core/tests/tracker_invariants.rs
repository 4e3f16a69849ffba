mod common;

use std::collections::{BTreeMap, HashSet};

use cbiou::geometry::{biou, BufferScale, Similarity};
use cbiou::tracker::{run_sequence, Detection, DetectionsByFrame, TrackerConfig, TrackerState};
use cbiou::tracklet::Tracklet;
use proptest::prelude::*;

use common::{brute_force_assignment, bx, reference_iou};

fn scenes() -> impl Strategy<Value = DetectionsByFrame> {
    proptest::collection::vec(
        proptest::collection::vec((0.0..200.0f64, 0.0..200.0f64, 5.0..60.0f64, 5.0..60.0f64), 0..5),
        1..10,
    )
    .prop_map(|frames| {
        let mut out = DetectionsByFrame::new();
        for (i, boxes) in frames.into_iter().enumerate() {
            let f = i as u32 + 1;
            let dets = boxes
                .into_iter()
                .map(|(x, y, w, h)| Detection::new(f, bx(x, y, w, h), 0.9))
                .collect();
            out.insert(f, dets);
        }
        out
    })
}

/// Minimal IoU tracker: static prediction, exhaustive matching, every match
/// emitted, tracks dropped after more than `max_age` frames without a match.
fn reference_iou_tracker(dets: &DetectionsByFrame, max_age: u32) -> BTreeMap<u32, Vec<(u32, [f64; 4])>> {
    struct T {
        id: u32,
        last_frame: u32,
        last: cbiou::BoundingBox,
    }
    let mut alive: Vec<T> = Vec::new();
    let mut out: BTreeMap<u32, Vec<(u32, [f64; 4])>> = BTreeMap::new();
    let mut next = 1;
    let (first, last) = (*dets.keys().next().unwrap(), *dets.keys().next_back().unwrap());
    for frame in first..=last {
        let d = dets.get(&frame).cloned().unwrap_or_default();
        let cost: Vec<Vec<Option<f64>>> = alive
            .iter()
            .map(|t| {
                d.iter()
                    .map(|det| {
                        let v = reference_iou(&t.last, &det.bbox);
                        (v > 0.0).then_some(1.0 - v)
                    })
                    .collect()
            })
            .collect();
        let matched = if alive.is_empty() || d.is_empty() {
            Vec::new()
        } else {
            brute_force_assignment(&cost).2
        };
        let mut used = vec![false; d.len()];
        let mut track_hit = vec![None; alive.len()];
        for (r, c) in matched {
            used[c] = true;
            track_hit[r] = Some(c);
        }
        let mut next_alive = Vec::new();
        for (i, mut t) in alive.into_iter().enumerate() {
            if let Some(c) = track_hit[i] {
                t.last = d[c].bbox;
                t.last_frame = frame;
                out.entry(t.id).or_default().push((frame, t.last.to_xywh()));
                next_alive.push(t);
            } else if frame - t.last_frame <= max_age {
                next_alive.push(t);
            }
        }
        for (c, det) in d.iter().enumerate() {
            if !used[c] {
                out.entry(next).or_default().push((frame, det.bbox.to_xywh()));
                next_alive.push(T {
                    id: next,
                    last_frame: frame,
                    last: det.bbox,
                });
                next += 1;
            }
        }
        alive = next_alive;
    }
    out
}

fn as_map(tracklets: &[Tracklet]) -> BTreeMap<u32, Vec<(u32, [f64; 4])>> {
    tracklets
        .iter()
        .map(|t| {
            (
                t.id(),
                t.observations().iter().map(|o| (o.frame, o.bbox.to_xywh())).collect(),
            )
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn one_to_one_per_frame(dets in scenes()) {
        let mut state = TrackerState::new(TrackerConfig::default()).unwrap();
        let mut emitted = HashSet::new();
        for (&frame, d) in &dets {
            let out = state.step(frame, d).unwrap();
            for o in &out {
                prop_assert!(emitted.insert((o.frame, o.id)));
            }
            let key = |b: &cbiou::BoundingBox| b.to_xywh().map(f64::to_bits);
            let mut got: Vec<_> = out.iter().map(|o| key(&o.bbox)).collect();
            let mut want: Vec<_> = d.iter().map(|x| key(&x.bbox)).collect();
            got.sort_unstable();
            want.sort_unstable();
            prop_assert_eq!(got, want);
            prop_assert_eq!(out.len(), d.len());
        }
    }

    #[test]
    fn cascade_rounds_respect_their_buffers(dets in scenes(), b1 in 0.0..0.5f64, extra in 0.0..1.0f64) {
        let config = TrackerConfig::with_buffers(b1, b1 + extra).unwrap();
        let (bb1, bb2) = (config.b1, config.b2);
        let floor = config.match_floor;
        let mut state = TrackerState::new(config).unwrap();
        for (&frame, d) in &dets {
            let predicted: BTreeMap<u32, cbiou::BoundingBox> =
                state.alive().iter().map(|t| (t.id(), t.predict(frame))).collect();
            let (_, matches) = state.step_detailed(frame, d).unwrap();
            for (round, id, di) in matches.pairs {
                let s = predicted[&id];
                let at_b1 = biou(&s, &d[di].bbox, bb1);
                let at_b2 = biou(&s, &d[di].bbox, bb2);
                if round == 0 {
                    prop_assert!(at_b1 > floor);
                } else {
                    prop_assert!(at_b1 <= floor && at_b2 > floor);
                }
            }
        }
    }

    #[test]
    fn zero_buffer_without_motion_is_plain_iou_tracker(dets in scenes()) {
        let config = TrackerConfig {
            b1: BufferScale::ZERO,
            b2: BufferScale::ZERO,
            motion: false,
            ..TrackerConfig::default()
        };
        let buffered = run_sequence(&dets, &config).unwrap();
        let plain = run_sequence(&dets, &TrackerConfig { similarity: Similarity::Iou, cascade: false, ..config.clone() }).unwrap();
        prop_assert_eq!(&buffered, &plain);
        prop_assert_eq!(as_map(&buffered), reference_iou_tracker(&dets, config.max_age));
    }

    #[test]
    fn deterministic(dets in scenes()) {
        let config = TrackerConfig::default();
        prop_assert_eq!(run_sequence(&dets, &config).unwrap(), run_sequence(&dets, &config).unwrap());
    }
}

