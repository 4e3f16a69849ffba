mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use cbiou::exec::Execution;
use cbiou::metrics::{clear_counts, evaluate, hota, hota_alphas, idf1, identity_counts, FrameAnnotations};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{brute_force_assignment, bx, reference_iou};

type Boxes = BTreeMap<u32, Vec<(u32, [f64; 4])>>;

/// Up to 3 gt identities over up to 10 frames and a perturbed, partly
/// relabeled prediction with occasional false positives. Integer coordinates.
fn random_pair(seed: u64) -> (Boxes, Boxes) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids = rng.random_range(1..=3u32);
    let frames = rng.random_range(1..=10u32);
    let mut gt = Boxes::new();
    let mut pred = Boxes::new();
    for f in 1..=frames {
        let mut pool: Vec<u32> = (1..=4).collect();
        pool.shuffle(&mut rng);
        for id in 1..=ids {
            if rng.random::<f64>() < 0.15 {
                continue;
            }
            let b = [
                f64::from(id * 30 + rng.random_range(0..6)),
                f64::from(rng.random_range(0..6)),
                f64::from(rng.random_range(10..20)),
                f64::from(rng.random_range(10..20)),
            ];
            gt.entry(f).or_default().push((id, b));
            if rng.random::<f64>() < 0.85 {
                let p = [
                    b[0] + f64::from(rng.random_range(0..5)),
                    b[1] + f64::from(rng.random_range(0..5)),
                    b[2],
                    b[3],
                ];
                let pid = if rng.random::<f64>() < 0.7 { id } else { pool[id as usize] };
                if pred.get(&f).is_none_or(|v| v.iter().all(|(i, _)| *i != pid)) {
                    pred.entry(f).or_default().push((pid, p));
                }
            }
        }
        if rng.random::<f64>() < 0.2 {
            let pid = 9;
            pred.entry(f).or_default().push((pid, [200.0, 200.0, 15.0, 15.0]));
        }
    }
    (gt, pred)
}

fn annotations(b: &Boxes) -> FrameAnnotations {
    let mut a = FrameAnnotations::new();
    for (&f, v) in b {
        for &(id, [x, y, w, h]) in v {
            a.insert(f, id, bx(x, y, w, h)).unwrap();
        }
    }
    a
}

fn count_by_id(b: &Boxes) -> BTreeMap<u32, usize> {
    let mut out = BTreeMap::new();
    for v in b.values() {
        for (id, _) in v {
            *out.entry(*id).or_insert(0) += 1;
        }
    }
    out
}

fn iou4(a: &[f64; 4], c: &[f64; 4]) -> f64 {
    reference_iou(&bx(a[0], a[1], a[2], a[3]), &bx(c[0], c[1], c[2], c[3]))
}

/// IDF1 by trying every injective mapping of gt ids into predicted ids.
fn reference_idf1(gt: &Boxes, pred: &Boxes) -> f64 {
    let gt_ids: Vec<u32> = count_by_id(gt).into_keys().collect();
    let pred_ids: Vec<u32> = count_by_id(pred).into_keys().collect();
    let overlap = |g: u32, p: u32| -> usize {
        gt.iter()
            .filter_map(|(f, v)| {
                let gb = v.iter().find(|(i, _)| *i == g)?.1;
                let pb = pred.get(f)?.iter().find(|(i, _)| *i == p)?.1;
                (iou4(&gb, &pb) >= 0.5).then_some(1)
            })
            .sum()
    };
    fn best(k: usize, gt_ids: &[u32], pred_ids: &[u32], used: &mut Vec<bool>, f: &dyn Fn(u32, u32) -> usize) -> usize {
        if k == gt_ids.len() {
            return 0;
        }
        let mut top = best(k + 1, gt_ids, pred_ids, used, f);
        for j in 0..pred_ids.len() {
            if !used[j] {
                used[j] = true;
                top = top.max(f(gt_ids[k], pred_ids[j]) + best(k + 1, gt_ids, pred_ids, used, f));
                used[j] = false;
            }
        }
        top
    }
    let idtp = best(0, &gt_ids, &pred_ids, &mut vec![false; pred_ids.len()], &overlap);
    let n_gt: usize = gt.values().map(Vec::len).sum();
    let n_pred: usize = pred.values().map(Vec::len).sum();
    if n_gt + n_pred == 0 {
        return 1.0;
    }
    2.0 * idtp as f64 / (n_gt + n_pred) as f64
}

/// HOTA with exhaustive per-frame matching and explicit per-TP association scores.
fn reference_hota(gt: &Boxes, pred: &Boxes) -> (f64, f64, f64) {
    let gt_n = count_by_id(gt);
    let pred_n = count_by_id(pred);
    let n_gt: usize = gt_n.values().sum();
    let n_pred: usize = pred_n.values().sum();
    let frames: BTreeSet<u32> = gt.keys().chain(pred.keys()).copied().collect();
    let (mut h, mut d, mut a) = (0.0, 0.0, 0.0);
    let alphas = hota_alphas();
    for &alpha in &alphas {
        let mut tps: Vec<(u32, u32)> = Vec::new();
        for f in &frames {
            let g = gt.get(f).cloned().unwrap_or_default();
            let p = pred.get(f).cloned().unwrap_or_default();
            let cost: Vec<Vec<Option<f64>>> = g
                .iter()
                .map(|(_, gb)| {
                    p.iter()
                        .map(|(_, pb)| {
                            let v = iou4(gb, pb);
                            (v >= alpha).then_some(1.0 - v)
                        })
                        .collect()
                })
                .collect();
            if !g.is_empty() && !p.is_empty() {
                for (gi, pi) in brute_force_assignment(&cost).2 {
                    tps.push((g[gi].0, p[pi].0));
                }
            }
        }
        let tp = tps.len();
        let deta = if n_gt + n_pred == 0 { 1.0 } else { tp as f64 / (n_gt + n_pred - tp) as f64 };
        let assa = if n_gt + n_pred == 0 {
            1.0
        } else if tp == 0 {
            0.0
        } else {
            let mut sum = 0.0;
            for &(gid, pid) in &tps {
                let tpa = tps.iter().filter(|&&c| c == (gid, pid)).count();
                let fna = gt_n[&gid] - tpa;
                let fpa = pred_n[&pid] - tpa;
                sum += tpa as f64 / (tpa + fna + fpa) as f64;
            }
            sum / tp as f64
        };
        h += (deta * assa).sqrt();
        d += deta;
        a += assa;
    }
    let n = alphas.len() as f64;
    (h / n, d / n, a / n)
}

fn perfect(ids: u32, frames: u32) -> Boxes {
    (1..=frames)
        .map(|f| {
            (
                f,
                (1..=ids)
                    .map(|id| (id, [f64::from(id * 50 + f), 10.0, 20.0, 40.0]))
                    .collect(),
            )
        })
        .collect()
}

#[test]
fn identity_swap_costs_one_switch() {
    let gt = perfect(2, 10);
    let mut pred = gt.clone();
    for f in 6..=10 {
        for (id, _) in pred.get_mut(&f).unwrap().iter_mut() {
            if *id == 1 {
                *id = 3;
            }
        }
    }
    let c = clear_counts(&annotations(&gt), &annotations(&pred), 0.5);
    assert_eq!((c.id_switches, c.false_positives, c.false_negatives), (1, 0, 0));
    assert!((c.mota() - 0.95).abs() < 1e-12);
}

#[test]
fn split_identity_hota_against_reference() {
    let gt = perfect(2, 10);
    let mut pred = gt.clone();
    for f in 6..=10 {
        pred.get_mut(&f).unwrap()[0].0 = 7;
    }
    let (g, p) = (annotations(&gt), annotations(&pred));
    let got = hota(&g, &p, Execution::Sequential);
    let (rh, rd, ra) = reference_hota(&gt, &pred);
    assert_eq!(got.deta, 1.0);
    assert!((got.assa - ra).abs() < 1e-12 && (got.hota - rh).abs() < 1e-12 && (rd - 1.0).abs() < 1e-12);
    // Identity 1: two pairs of 5 TPs with A = 5/10 each; identity 2 perfect.
    assert!((got.assa - 0.75).abs() < 1e-12);
}

#[test]
fn empty_predictions_score_zero() {
    let gt = annotations(&perfect(2, 4));
    let r = evaluate(&gt, &FrameAnnotations::new(), Execution::Sequential);
    assert_eq!((r.hota, r.deta, r.assa, r.mota, r.idf1), (0.0, 0.0, 0.0, 0.0, 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn idf1_matches_enumeration(seed in any::<u64>()) {
        let (gt, pred) = random_pair(seed);
        let got = idf1(&annotations(&gt), &annotations(&pred), 0.5);
        prop_assert!((got - reference_idf1(&gt, &pred)).abs() < 1e-12);
    }

    #[test]
    fn hota_matches_reference(seed in any::<u64>()) {
        let (gt, pred) = random_pair(seed);
        let got = hota(&annotations(&gt), &annotations(&pred), Execution::Sequential);
        let (h, d, a) = reference_hota(&gt, &pred);
        prop_assert!((got.hota - h).abs() < 1e-9, "{} vs {}", got.hota, h);
        prop_assert!((got.deta - d).abs() < 1e-9);
        prop_assert!((got.assa - a).abs() < 1e-9);
    }

    #[test]
    fn invariant_to_labels_and_translation(seed in any::<u64>(), dx in -500i32..500, dy in -500i32..500) {
        let (gt, pred) = random_pair(seed);
        let (g, p) = (annotations(&gt), annotations(&pred));
        let base = evaluate(&g, &p, Execution::Sequential);

        let mut ids: Vec<u32> = count_by_id(&pred).into_keys().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let original = ids.clone();
        ids.shuffle(&mut rng);
        let map: HashMap<u32, u32> = original.into_iter().zip(ids.into_iter().map(|i| i + 100)).collect();
        prop_assert_eq!(evaluate(&g, &p.relabeled(&map), Execution::Sequential), base);

        let (dx, dy) = (f64::from(dx), f64::from(dy));
        prop_assert_eq!(evaluate(&g.translated(dx, dy), &p.translated(dx, dy), Execution::Sequential), base);
    }

    #[test]
    fn perfect_prediction_scores_one(seed in any::<u64>()) {
        let (gt, _) = random_pair(seed);
        let g = annotations(&gt);
        let r = evaluate(&g, &g, Execution::default());
        prop_assert_eq!((r.hota, r.deta, r.assa, r.mota, r.idf1), (1.0, 1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn ranges(seed in any::<u64>()) {
        let (gt, pred) = random_pair(seed);
        let r = evaluate(&annotations(&gt), &annotations(&pred), Execution::Sequential);
        for v in [r.hota, r.deta, r.assa, r.idf1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert!(r.mota <= 1.0);
        let c = identity_counts(&annotations(&gt), &annotations(&pred), 0.5);
        prop_assert_eq!(c.idtp + c.idfn, annotations(&gt).num_boxes());
    }
}
