use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random source used throughout a simulation run.
pub type SimRng = ChaCha8Rng;

/// Independent random streams derived from one replica seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum RngStream {
    Generator = 1,
    Drift = 2,
    Oracle = 3,
    Strategy = 4,
}

pub fn rng_for(seed: u64, stream: RngStream) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
