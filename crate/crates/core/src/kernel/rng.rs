//! Path-keyed random streams.
//!
//! A stream is identified by `(root_seed, round, client, purpose)`. The key is
//! hashed into a ChaCha8 seed, so every stream is a pure function of its path:
//! evaluating clients in any order or on any number of threads reproduces the
//! same draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Generator handed out by [`RngStream::rng`].
pub type StreamRng = ChaCha8Rng;

/// What a stream's draws are used for. Distinct purposes never share draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Purpose {
    Root,
    Selection,
    ReportIndex,
    Init,
    LocalStep(u32),
    InnerGrad,
    OuterGrad,
    Hessian,
    Personalize,
    Partition,
    Probe,
    Trial(u64),
    Custom(u64),
}

impl Purpose {
    fn tag(self) -> u64 {
        let (kind, payload): (u64, u64) = match self {
            Purpose::Root => (0, 0),
            Purpose::Selection => (1, 0),
            Purpose::ReportIndex => (2, 0),
            Purpose::Init => (3, 0),
            Purpose::LocalStep(t) => (4, t as u64),
            Purpose::InnerGrad => (5, 0),
            Purpose::OuterGrad => (6, 0),
            Purpose::Hessian => (7, 0),
            Purpose::Personalize => (8, 0),
            Purpose::Partition => (9, 0),
            Purpose::Probe => (10, 0),
            Purpose::Trial(i) => (11, i),
            Purpose::Custom(i) => (12, i),
        };
        splitmix64(kind.wrapping_mul(0xA24B_AED4_963E_E407) ^ splitmix64(payload))
    }
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    root_seed: u64,
    round: u64,
    client: u64,
    purpose: u64,
}

impl RngStream {
    pub fn new(root_seed: u64) -> Self {
        Self {
            root_seed,
            round: 0,
            client: 0,
            purpose: Purpose::Root.tag(),
        }
    }

    pub fn root_seed(&self) -> u64 {
        self.root_seed
    }

    pub fn round(self, k: u64) -> Self {
        Self { round: k, ..self }
    }

    pub fn client(self, i: u64) -> Self {
        Self { client: i, ..self }
    }

    /// Replaces the purpose component of the path.
    pub fn purpose(self, p: Purpose) -> Self {
        Self {
            purpose: p.tag(),
            ..self
        }
    }

    /// Extends the purpose component, keeping round and client. Used for
    /// sub-streams such as the three batches of one meta-gradient estimate.
    pub fn child(self, p: Purpose) -> Self {
        Self {
            purpose: splitmix64(self.purpose ^ p.tag().rotate_left(17)),
            ..self
        }
    }

    pub fn rng(&self) -> StreamRng {
        let mut h = splitmix64(self.root_seed);
        let mut seed = [0u8; 32];
        for (chunk, word) in seed
            .chunks_exact_mut(8)
            .zip([self.round, self.client, self.purpose, 0x5EED])
        {
            h = splitmix64(h ^ word);
            chunk.copy_from_slice(&h.to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }
}
