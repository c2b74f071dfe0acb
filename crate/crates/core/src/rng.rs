//! Labelled random streams.
//!
//! A stream is identified by a root seed and a path of labels. The ChaCha
//! key is the SHA-256 digest of an unambiguous encoding of that path, so
//! distinct paths give unrelated streams and `key.child(a).child(b)` is the
//! same stream as `key.with(&[a, b])`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Stream = ChaCha8Rng;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Label {
    Str(String),
    Int(u64),
}

impl From<&str> for Label {
    fn from(s: &str) -> Self {
        Label::Str(s.to_owned())
    }
}

impl From<String> for Label {
    fn from(s: String) -> Self {
        Label::Str(s)
    }
}

impl From<u64> for Label {
    fn from(v: u64) -> Self {
        Label::Int(v)
    }
}

impl From<usize> for Label {
    fn from(v: usize) -> Self {
        Label::Int(v as u64)
    }
}

impl From<u32> for Label {
    fn from(v: u32) -> Self {
        Label::Int(v as u64)
    }
}

impl From<i32> for Label {
    fn from(v: i32) -> Self {
        Label::Int(v as u64)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey {
    seed: u64,
    path: Vec<Label>,
}

impl StreamKey {
    pub fn new(seed: u64) -> Self {
        StreamKey { seed, path: Vec::new() }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path(&self) -> &[Label] {
        &self.path
    }

    pub fn child(&self, label: impl Into<Label>) -> Self {
        let mut path = self.path.clone();
        path.push(label.into());
        StreamKey { seed: self.seed, path }
    }

    pub fn with<L: Clone + Into<Label>>(&self, labels: &[L]) -> Self {
        let mut path = self.path.clone();
        path.extend(labels.iter().cloned().map(Into::into));
        StreamKey { seed: self.seed, path }
    }

    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"smelab-stream-v1");
        h.update(self.seed.to_le_bytes());
        for label in &self.path {
            match label {
                Label::Str(s) => {
                    h.update([0u8]);
                    h.update((s.len() as u64).to_le_bytes());
                    h.update(s.as_bytes());
                }
                Label::Int(v) => {
                    h.update([1u8]);
                    h.update(v.to_le_bytes());
                }
            }
        }
        let out = h.finalize();
        let mut key = [0u8; 32];
        key.copy_from_slice(out.as_slice());
        key
    }

    pub fn rng(&self) -> Stream {
        Stream::from_seed(self.digest())
    }
}

/// Stream for `seed` and a label path, e.g. `["weak-error", 17, "data"]`.
pub fn derive_stream<L: Clone + Into<Label>>(seed: u64, labels: &[L]) -> Stream {
    StreamKey::new(seed).with(labels).rng()
}

/// Child generator seeded from the parent stream (one u64 drawn).
pub fn split(parent: &mut Stream) -> Stream {
    use rand::Rng;
    Stream::seed_from_u64(parent.random::<u64>())
}
