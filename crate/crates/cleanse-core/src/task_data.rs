//! The noisy majority-bit task: datasets whose training half is
//! contaminated with minority-bit (fake) labels, plus selection-vector
//! semantics over the training instances.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bits::BitVec;
use crate::{Error, Result};

/// An n-bit inclusion mask over the training instances; bit i = 1 keeps
/// instance i in the filtered subset.
pub type SelectionVector = BitVec;

/// One labeled example: a b-bit input pattern and a binary target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub input: BitVec,
    pub label: bool,
}

/// Origin of a training instance's label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// Labeled with the majority bit.
    Real,
    /// Labeled with the minority bit.
    Fake,
    /// Validation/test instance (always correctly labeled).
    Clean,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Real => "real",
            Provenance::Fake => "fake",
            Provenance::Clean => "clean",
        }
    }
}

impl std::str::FromStr for Provenance {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "real" => Ok(Provenance::Real),
            "fake" => Ok(Provenance::Fake),
            "clean" => Ok(Provenance::Clean),
            other => Err(Error::Parse {
                line: 0,
                message: format!("unknown provenance `{other}`"),
            }),
        }
    }
}

/// Train/valid/test splits. The training list is ordered: all real
/// instances first, then the fake duplicates of the same input patterns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub b: usize,
    pub train: Vec<Instance>,
    pub train_provenance: Vec<Provenance>,
    pub valid: Vec<Instance>,
    pub test: Vec<Instance>,
}

impl Dataset {
    /// Number of training instances, i.e. the selection-vector length.
    pub fn n(&self) -> usize {
        self.train.len()
    }

    /// CSV form: one row per instance with columns
    /// `split,index,provenance,x0..x{b-1},label`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        out.push_str("split,index,provenance");
        for c in 0..self.b {
            out.push_str(&format!(",x{c}"));
        }
        out.push_str(",label\n");
        let mut push = |split: &str, idx: usize, prov: Provenance, inst: &Instance| {
            out.push_str(&format!("{split},{idx},{}", prov.as_str()));
            for bit in inst.input.iter() {
                out.push_str(if bit { ",1" } else { ",0" });
            }
            out.push_str(if inst.label { ",1\n" } else { ",0\n" });
        };
        for (i, inst) in self.train.iter().enumerate() {
            push("train", i, self.train_provenance[i], inst);
        }
        for (i, inst) in self.valid.iter().enumerate() {
            push("valid", i, Provenance::Clean, inst);
        }
        for (i, inst) in self.test.iter().enumerate() {
            push("test", i, Provenance::Clean, inst);
        }
        out
    }

    /// Parses the format written by [`Dataset::to_csv_string`].
    pub fn from_csv_str(s: &str) -> Result<Self> {
        let mut lines = s.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "empty dataset file".into(),
        })?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < 5 || cols[0] != "split" || cols[cols.len() - 1] != "label" {
            return Err(Error::Parse {
                line: 1,
                message: "unexpected dataset header".into(),
            });
        }
        let b = cols.len() - 4;
        let mut ds = Dataset {
            b,
            train: Vec::new(),
            train_provenance: Vec::new(),
            valid: Vec::new(),
            test: Vec::new(),
        };
        for (lineno, line) in lines {
            if line.is_empty() {
                continue;
            }
            let parse = |field: &str, what: &str| -> Result<usize> {
                field.parse().map_err(|_| Error::Parse {
                    line: lineno + 1,
                    message: format!("bad {what} `{field}`"),
                })
            };
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != b + 4 {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: format!("expected {} fields, got {}", b + 4, fields.len()),
                });
            }
            let prov: Provenance = fields[2].parse()?;
            let mut input = BitVec::zeros(b);
            for c in 0..b {
                input.set(c, parse(fields[3 + c], "bit")? == 1);
            }
            let label = parse(fields[b + 3], "label")? == 1;
            let inst = Instance { input, label };
            match fields[0] {
                "train" => {
                    ds.train.push(inst);
                    ds.train_provenance.push(prov);
                }
                "valid" => ds.valid.push(inst),
                "test" => ds.test.push(inst),
                other => {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        message: format!("unknown split `{other}`"),
                    })
                }
            }
        }
        Ok(ds)
    }
}

/// Majority bit of an odd-length input; errors on even length where the
/// tie makes it undefined.
pub fn majority_bit(input: &BitVec) -> Result<bool> {
    if input.len().is_multiple_of(2) {
        return Err(Error::EvenBitWidth(input.len()));
    }
    Ok(input.count_ones() * 2 > input.len())
}

/// Draws `count` distinct b-bit patterns, uniformly without replacement.
///
/// For small spaces this is a seeded shuffle of all 2^b indices; for large
/// ones rejection sampling, which cannot stall since callers cap `count`
/// well below 2^b.
fn distinct_patterns(b: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<BitVec> {
    if b <= 20 {
        let mut indices: Vec<u64> = (0..1u64 << b).collect();
        indices.shuffle(rng);
        indices
            .into_iter()
            .take(count)
            .map(|v| BitVec::from_u64(b, v))
            .collect()
    } else {
        let mut seen = HashSet::with_capacity(count);
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let pattern = BitVec::random(b, rng);
            if seen.insert(pattern.clone()) {
                out.push(pattern);
            }
        }
        out
    }
}

/// Generates a noisy majority-bit dataset.
///
/// All `n_real + n_valid + n_test` input patterns are distinct. The training
/// half holds each of the `n_real` inputs twice: once with the majority bit
/// (real) and once with the minority bit (fake), real instances first.
pub fn generate_dataset(
    b: usize,
    n_real: usize,
    n_valid: usize,
    n_test: usize,
    seed: u64,
) -> Result<Dataset> {
    if b == 0 || b.is_multiple_of(2) {
        return Err(Error::EvenBitWidth(b));
    }
    let requested = n_real + n_valid + n_test;
    let available = if b < 128 { 1u128 << b } else { u128::MAX };
    if requested as u128 > available {
        return Err(Error::InsufficientPatterns {
            requested,
            bits: b,
            available,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let patterns = distinct_patterns(b, requested, &mut rng);

    let labeled = |input: &BitVec| -> Result<Instance> {
        Ok(Instance {
            input: input.clone(),
            label: majority_bit(input)?,
        })
    };

    let mut train = Vec::with_capacity(2 * n_real);
    let mut train_provenance = Vec::with_capacity(2 * n_real);
    for p in &patterns[..n_real] {
        train.push(labeled(p)?);
        train_provenance.push(Provenance::Real);
    }
    for p in &patterns[..n_real] {
        let mut inst = labeled(p)?;
        inst.label = !inst.label;
        train.push(inst);
        train_provenance.push(Provenance::Fake);
    }

    let valid = patterns[n_real..n_real + n_valid]
        .iter()
        .map(&labeled)
        .collect::<Result<Vec<_>>>()?;
    let test = patterns[n_real + n_valid..]
        .iter()
        .map(&labeled)
        .collect::<Result<Vec<_>>>()?;

    Ok(Dataset {
        b,
        train,
        train_provenance,
        valid,
        test,
    })
}

/// Training instances selected by `q`, in order.
pub fn filter_train(dataset: &Dataset, q: &SelectionVector) -> Result<Vec<Instance>> {
    if q.len() != dataset.train.len() {
        return Err(Error::LengthMismatch {
            expected: dataset.train.len(),
            actual: q.len(),
        });
    }
    Ok(dataset
        .train
        .iter()
        .enumerate()
        .filter(|(i, _)| q.get(*i))
        .map(|(_, inst)| inst.clone())
        .collect())
}

/// The selection keeping exactly the real training instances.
pub fn theoretical_solution(dataset: &Dataset) -> SelectionVector {
    let mut q = BitVec::zeros(dataset.train.len());
    for (i, prov) in dataset.train_provenance.iter().enumerate() {
        if *prov == Provenance::Real {
            q.set(i, true);
        }
    }
    q
}
