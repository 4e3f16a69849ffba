//! Test-only reference implementations shared by the integration tests.
#![allow(dead_code)]

use cbiou::geometry::BoundingBox;

/// Exhaustive assignment: maximum number of allowed pairs, then minimum cost.
/// Returns `(pairs, cost, matches)`; the matches are one optimal solution.
pub fn brute_force_assignment(cost: &[Vec<Option<f64>>]) -> (usize, f64, Vec<(usize, usize)>) {
    let cols = cost.first().map_or(0, Vec::len);
    let mut best = (0usize, 0.0f64, Vec::new());
    let mut used = vec![false; cols];
    let mut current = Vec::new();
    fn walk(
        r: usize,
        cost: &[Vec<Option<f64>>],
        used: &mut [bool],
        current: &mut Vec<(usize, usize)>,
        acc: f64,
        best: &mut (usize, f64, Vec<(usize, usize)>),
    ) {
        if r == cost.len() {
            let n = current.len();
            if n > best.0 || (n == best.0 && acc < best.1) {
                *best = (n, acc, current.clone());
            }
            return;
        }
        walk(r + 1, cost, used, current, acc, best);
        for c in 0..used.len() {
            if let (false, Some(v)) = (used[c], cost[r][c]) {
                used[c] = true;
                current.push((r, c));
                walk(r + 1, cost, used, current, acc + v, best);
                current.pop();
                used[c] = false;
            }
        }
    }
    walk(0, cost, &mut used, &mut current, 0.0, &mut best);
    best
}

pub fn bx(x: f64, y: f64, w: f64, h: f64) -> BoundingBox {
    BoundingBox::new(x, y, w, h).unwrap()
}

/// Straight-line overlap between two boxes, written without the library's
/// helpers.
pub fn reference_iou(a: &BoundingBox, c: &BoundingBox) -> f64 {
    let ix = (a.x() + a.w()).min(c.x() + c.w()) - a.x().max(c.x());
    let iy = (a.y() + a.h()).min(c.y() + c.h()) - a.y().max(c.y());
    if ix <= 0.0 || iy <= 0.0 {
        return 0.0;
    }
    let inter = ix * iy;
    inter / (a.w() * a.h() + c.w() * c.h() - inter)
}


pub mod pipeline {
    use std::fs;
    use std::path::{Path, PathBuf};

    use cbiou::data_io::{format_embeddings, read_ground_truth, read_results, Embeddings};
    use cbiou::geometry::iou;
    use cbiou::harness::cli::{run, EXIT_OK};

    pub fn cli(args: &[&str]) -> (i32, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("cbiou").chain(args.iter().copied()), &mut out, &mut err);
        assert_eq!(code, EXIT_OK, "{args:?}: {}", String::from_utf8_lossy(&err));
        (code, String::from_utf8(out).unwrap())
    }

    fn s(p: &Path) -> &str {
        p.to_str().unwrap()
    }

    /// Appearance vectors keyed by result row: one-hot on the ground-truth
    /// identity with the highest overlap, plus a small id-dependent tilt.
    pub fn oracle_embeddings(results: &Path, gt: &Path, dim: usize) -> Embeddings {
        let gt = read_ground_truth(gt).unwrap();
        let mut e = Embeddings::new(dim);
        for t in read_results(results).unwrap() {
            for o in t.observations() {
                let best = gt
                    .frame(o.frame)
                    .iter()
                    .max_by(|a, b| iou(&a.1, &o.bbox).total_cmp(&iou(&b.1, &o.bbox)))
                    .map_or(0, |(id, _)| *id as usize);
                let mut v = vec![0.0; dim];
                v[best % dim] = 1.0;
                v[(best + 1) % dim] = 0.05 * f64::from(t.id() % 3);
                e.insert(o.frame, t.id(), v);
            }
        }
        e
    }

    pub struct Outputs {
        pub results: Vec<u8>,
        pub refined: Vec<u8>,
        pub report: Vec<u8>,
    }

    /// synth (two seeds) -> nms -> track -> embeddings -> refine -> eval.
    pub fn run_pipeline(dir: &Path, scene: &str) -> Outputs {
        let f = |n: &str| -> PathBuf { dir.join(n) };
        let (a, b, gt) = (f("a.det"), f("b.det"), f("gt.txt"));
        cli(&["synth", scene, "--detections", s(&a), "--gt", s(&gt)]);
        cli(&["synth", scene, "--seed", "1234", "--detections", s(&b), "--gt", s(&gt)]);
        let merged = f("merged.det");
        cli(&["nms", s(&a), s(&b), s(&merged)]);
        let res = f("res.txt");
        cli(&["track", s(&merged), s(&res)]);
        let emb = f("emb.txt");
        fs::write(&emb, format_embeddings(&oracle_embeddings(&res, &gt, 8))).unwrap();
        let refined = f("refined.txt");
        cli(&["refine", s(&res), s(&emb), s(&refined)]);
        let report = f("report.txt");
        cli(&["eval", s(&refined), s(&gt), "--format", "kv", "--output", s(&report)]);
        Outputs {
            results: fs::read(&res).unwrap(),
            refined: fs::read(&refined).unwrap(),
            report: fs::read(&report).unwrap(),
        }
    }
}
