//! Shared fixtures for the benchmarks.

use gmm_core::data::{gen_latent_shift_task, gen_mixture, LatentShiftTask, MixtureSpec};
use gmm_core::rng::{stream, Stream};
use gmm_core::{Dataset, Initializer, LatentConfig, Solution};

/// GMM-20 points with k-means++ centers and their nearest-center assignment.
pub fn gmm20(seed: u64) -> (Dataset, Solution, LatentConfig) {
    let data = gen_mixture(&MixtureSpec::gmm20(seed)).expect("GMM-20 generates").data;
    let (centers, z) = Initializer::KMeansPlusPlus
        .initialize(&data, 20, &mut stream(seed, Stream::Init))
        .expect("k-means++ seeds");
    (data, centers.to_solution(), z)
}

/// Latent-shift task of `n` examples with the default shape.
pub fn latent_shift(n: usize, seed: u64) -> LatentShiftTask {
    gen_latent_shift_task(n, 2, 1.0, 0.3, seed).expect("task generates")
}
