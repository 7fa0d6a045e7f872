//! Fixed, seeded populations of test signals for the equivalence harnesses.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lpaley::{lp_block_with, Partition};
use crate::molec::{make_classical_atom, DyadicInterval};
use crate::seq::Sequence;

pub const DEFAULT_FAMILY_SIZE: usize = 20;
pub const DEFAULT_SEED: u64 = 7;

/// Support of the noise before band filtering.
const NOISE_LEN: i64 = 256;
/// Half-width kept around the filtered noise.
const NOISE_HALFWIDTH: usize = 384;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Delta,
    Dipole,
    Band,
    Molecule,
}

#[derive(Debug, Clone)]
pub struct Signal {
    pub label: String,
    pub kind: Kind,
    pub seq: Sequence,
}

/// Per-kind counts of a family of `size` signals: 10% deltas, 15% dipoles,
/// 25% band-limited noise, 50% random molecules.
fn counts(size: usize) -> Result<[usize; 4]> {
    if size == 0 || size % 20 != 0 {
        return Err(Error::param(format!("family size must be a positive multiple of 20, got {size}")));
    }
    let u = size / 20;
    Ok([2 * u, 3 * u, 5 * u, 10 * u])
}

/// The seeded family. Doubling `size` keeps every member of the smaller family.
pub fn test_family(size: usize, seed: u64) -> Result<Vec<Signal>> {
    let [nd, np, nb, nm] = counts(size)?;
    let part = Partition::default();
    let mut out = Vec::with_capacity(size);
    let mut rng = stream(seed, 0);
    for i in 0..nd {
        let n = if i == 0 { 0 } else { rng.gen_range(-64..=64) };
        out.push(Signal {
            label: format!("delta:{n}"),
            kind: Kind::Delta,
            seq: Sequence::delta(n),
        });
    }
    let mut rng = stream(seed, 1);
    for i in 0..np {
        let shift = if i < 3 { 40 * i as i64 } else { rng.gen_range(-200..=200) };
        let power = 1 + i % 3;
        let base = Sequence::delta(shift).laplacian_pow(power);
        let seq = if i % 2 == 0 { base.diff_forward() } else { base.diff_backward() };
        out.push(Signal {
            label: format!("dipole:{}:{power}:{shift}", if i % 2 == 0 { "fwd" } else { "bwd" }),
            kind: Kind::Dipole,
            seq,
        });
    }
    for i in 0..nb {
        let mut rng = stream(seed, 100 + i as u64);
        let j = -1 - (i as i32 % 5);
        let noise: Vec<f64> = (0..NOISE_LEN).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let raw = Sequence::from_real(-NOISE_LEN / 2, &noise);
        let seq = lp_block_with(&part, j, &raw, NOISE_HALFWIDTH)?.seq;
        out.push(Signal {
            label: format!("band:{j}:{i}"),
            kind: Kind::Band,
            seq,
        });
    }
    for i in 0..nm {
        let mut rng = stream(seed, 1000 + i as u64);
        let nu = -2 - (i as i32 % 5);
        let k = rng.gen_range(-4..=4);
        let interval = DyadicInterval::new(nu, k)?;
        let atom_seed = rng.gen::<u64>();
        let seq = make_classical_atom(interval, 1.0, 1, atom_seed)?;
        out.push(Signal {
            label: format!("molecule:{nu}:{k}"),
            kind: Kind::Molecule,
            seq,
        });
    }
    Ok(out)
}

/// `default` is the 20-signal family, `double` the 40-signal one, and a bare
/// integer picks that size.
pub fn by_id(id: &str, seed: u64) -> Result<Vec<Signal>> {
    let size = match id {
        "default" => DEFAULT_FAMILY_SIZE,
        "double" => 2 * DEFAULT_FAMILY_SIZE,
        other => other
            .parse()
            .map_err(|_| Error::Parse(format!("unknown family '{other}'")))?,
    };
    test_family(size, seed)
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(id);
    r
}

/// A smooth wave packet `cos(θ₀n)` under a raised-cosine window of half-width `w`.
pub fn packet(theta0: f64, w: i64) -> Sequence {
    Sequence::tabulate(-w, w, |n| {
        let x = n as f64 / w as f64;
        let env = 0.5 * (1.0 + (std::f64::consts::PI * x).cos());
        Complex64::new(env * env * (theta0 * n as f64).cos(), 0.0)
    })
}
