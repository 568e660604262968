//! Calibration probe: last-point accuracy of knn/averaging variants at
//! (n = 28, m = 70) on conjunction prompts.

use boolicl::learners::{KnnLearner, Learner};
use boolicl::sampler::{derive_seed, sample_sequence_with_seed, TaskConfig, TaskKind};
use boolicl::BitVec;

const PROMPTS: u64 = 2560;

fn last_point_acc(
    pred: impl Fn(&[(BitVec, u8)], &BitVec) -> u8,
    prompts: &[(Vec<BitVec>, Vec<u8>)],
) -> f64 {
    let mut hits = 0usize;
    for (xs, ys) in prompts {
        let m = xs.len();
        let prefix: Vec<(BitVec, u8)> =
            xs[..m - 1].iter().cloned().zip(ys[..m - 1].iter().copied()).collect();
        if pred(&prefix, &xs[m - 1]) == ys[m - 1] {
            hits += 1;
        }
    }
    hits as f64 / prompts.len() as f64
}

fn knn_generic(
    k: usize,
    sim: impl Fn(&BitVec, &BitVec) -> f64 + Copy,
) -> impl Fn(&[(BitVec, u8)], &BitVec) -> u8 {
    move |prefix, query| {
        if prefix.is_empty() {
            return 0;
        }
        let mut scored: Vec<(f64, usize)> =
            prefix.iter().enumerate().map(|(i, (x, _))| (sim(x, query), i)).collect();
        // Highest similarity first; ties go to the earliest point.
        scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        let take = k.min(prefix.len());
        let mean: f64 =
            scored[..take].iter().map(|&(_, i)| f64::from(prefix[i].1)).sum::<f64>() / take as f64;
        u8::from(mean > 0.5)
    }
}

fn main() {
    let cfg = TaskConfig::new(TaskKind::Conjunction, 28, 70);
    let prompts: Vec<(Vec<BitVec>, Vec<u8>)> = (0..PROMPTS)
        .map(|i| {
            let s = sample_sequence_with_seed(&cfg, derive_seed(101, i)).unwrap();
            (s.xs, s.ys)
        })
        .collect();
    println!("{PROMPTS} prompts, stderr ~ {:.2}%", 100.0 * (0.5f64 * 0.5 / PROMPTS as f64).sqrt());

    let cosine_raw = |x: &BitVec, q: &BitVec| {
        let (nx, nq) = (x.ones() as f64, q.ones() as f64);
        if nx == 0.0 || nq == 0.0 {
            return 0.0;
        }
        x.dot(q) as f64 / (nx.sqrt() * nq.sqrt())
    };
    // Cosine over ±1 vectors is a monotone function of Hamming distance.
    let neg_hamming = |x: &BitVec, q: &BitVec| -((x.xor(q).ones()) as f64);

    let dot_raw = |x: &BitVec, q: &BitVec| x.dot(q) as f64;
    for k in [1usize, 2, 3, 4, 5, 28] {
        let shipped = KnnLearner::new(k).unwrap();
        println!(
            "knn k={k:<2} cosine(raw) shipped {:.1}% | probe {:.1}% | hamming {:.1}% | dot {:.1}%",
            100.0 * last_point_acc(|p, q| shipped.predict(p, q), &prompts),
            100.0 * last_point_acc(knn_generic(k, cosine_raw), &prompts),
            100.0 * last_point_acc(knn_generic(k, neg_hamming), &prompts),
            100.0 * last_point_acc(knn_generic(k, dot_raw), &prompts),
        );
    }

    fn pm(b: u8) -> f64 {
        2.0 * f64::from(b) - 1.0
    }
    fn raw(b: u8) -> f64 {
        f64::from(b)
    }
    let avg = |xe: fn(u8) -> f64, ye: fn(u8) -> f64, ge: bool| {
        move |prefix: &[(BitVec, u8)], query: &BitVec| -> u8 {
            if prefix.is_empty() {
                return 0;
            }
            let n = query.len();
            let mut w = vec![0.0f64; n];
            for (x, y) in prefix {
                for j in 0..n {
                    w[j] += xe(x.get(j)) * ye(*y);
                }
            }
            let score: f64 = (0..n).map(|j| w[j] / prefix.len() as f64 * xe(query.get(j))).sum();
            if ge {
                u8::from(score >= 0.0)
            } else {
                u8::from(score > 0.0)
            }
        }
    };
    let cases: [(&str, fn(u8) -> f64, fn(u8) -> f64); 2] =
        [("x=pm  y=pm", pm, pm), ("x=raw y=pm", raw, pm)];
    for (label, xe, ye) in cases {
        println!(
            "avg {label} | ties->0 {:.1}% | ties->1 {:.1}%",
            100.0 * last_point_acc(avg(xe, ye, false), &prompts),
            100.0 * last_point_acc(avg(xe, ye, true), &prompts),
        );
    }
    // Mean-centred inputs: subtract the prefix mean before correlating.
    let centred = |prefix: &[(BitVec, u8)], query: &BitVec| -> u8 {
        if prefix.is_empty() {
            return 0;
        }
        let n = query.len();
        let mut mean = vec![0.0f64; n];
        for (x, _) in prefix {
            for j in 0..n {
                mean[j] += f64::from(x.get(j));
            }
        }
        for v in &mut mean {
            *v /= prefix.len() as f64;
        }
        let mut w = vec![0.0f64; n];
        for (x, y) in prefix {
            for j in 0..n {
                w[j] += (f64::from(x.get(j)) - mean[j]) * pm(*y);
            }
        }
        let score: f64 =
            (0..n).map(|j| w[j] / prefix.len() as f64 * (f64::from(query.get(j)) - mean[j])).sum();
        u8::from(score > 0.0)
    };
    println!("avg centred x, y=pm      {:.1}%", 100.0 * last_point_acc(centred, &prompts));
}
