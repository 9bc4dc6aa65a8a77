#![allow(dead_code)]

use std::path::Path;
use teegen_core::imageio::{write_gray, ImageFormat};
use teegen_core::metrics::{Generator, Verdict};
use teegen_quiz::{PoolImage, QuizConfig};

/// 70 real, 35 CUT and 35 CycleGAN tiny images on disk.
pub fn pool_config(dir: &Path) -> QuizConfig {
    let mut pool = Vec::new();
    for (g, n, prefix) in [(Generator::None, 70, "img_a"), (Generator::Cut, 35, "img_b"), (Generator::Cyclegan, 35, "img_c")] {
        for i in 0..n {
            let id = format!("{prefix}{i:03}");
            let path = dir.join(format!("{id}.png"));
            let v = (i as f64 + 1.0) / 80.0;
            write_gray(&path, 4, 3, &[v; 12], ImageFormat::Png8).unwrap();
            pool.push(PoolImage { image_id: id, source: g, path });
        }
    }
    let mut cfg = QuizConfig::new(pool);
    cfg.shuffle_seed = 42;
    cfg
}

pub fn source_of(cfg: &QuizConfig, id: &str) -> Generator {
    cfg.pool.iter().find(|p| p.image_id == id).unwrap().source
}

/// Answers reproducing a confusion matrix `(rr, rs, sr, ss)` for a
/// participant's order.
pub fn shaped_answers(cfg: &QuizConfig, order: &[String], counts: [usize; 4]) -> Vec<Verdict> {
    let [mut rr, _, mut sr, _] = counts;
    order
        .iter()
        .map(|id| {
            if source_of(cfg, id) == Generator::None {
                if rr > 0 {
                    rr -= 1;
                    Verdict::Real
                } else {
                    Verdict::Synthetic
                }
            } else if sr > 0 {
                sr -= 1;
                Verdict::Real
            } else {
                Verdict::Synthetic
            }
        })
        .collect()
}
