#![allow(dead_code)]

use polarbec::erasure::{channel_erasure, level_erasures, RootChannel};
use polarbec::MultiPocketParams;

/// Multi-pocket selection recomputed channel by channel over the whole
/// level: a channel belongs to the first pocket level whose prefix clears
/// that level's threshold, and is kept when its suffix has enough squarings
/// and its own erasure is below the final threshold.
pub fn brute_force_multipocket(root: &RootChannel, n: u32, p: &MultiPocketParams) -> Vec<u64> {
    let n0 = (n as f64 * p.mu_star / p.mu_p).floor();
    let mut levels: Vec<u32> = (1..=p.d)
        .map(|k| (k as f64 * n0 / p.d as f64 + 0.5).floor() as u32)
        .collect();
    levels.dedup();
    let quota = (p.beta_p * n as f64 - 1e-9).ceil().max(0.0) as u32;
    let final_log = (p.beta_p * n as f64).exp2();
    level_erasures(root, n)
        .unwrap()
        .filter(|(path, z)| {
            let pocket = levels.iter().copied().find(|&m| {
                let t = -p.p_ub.log2() + p.d as f64 * m as f64;
                channel_erasure(root, &path.ancestor(m)).l_era() > t
            });
            match pocket {
                Some(m) => path.squarings_since(m) >= quota && z.l_era() >= final_log,
                None => false,
            }
        })
        .map(|(path, _)| path.index())
        .collect()
}

pub fn reference_params() -> MultiPocketParams {
    MultiPocketParams::new(0.30, 8.0, 3.8, 4, 2f64.powi(-10))
}
