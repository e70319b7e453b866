//! Plug-in estimates of entropies and mutual informations from aligned
//! symbol sequences. Only observed tuples are stored; all logs are base 2.

use std::collections::BTreeMap;

use crate::discretize::Symbol;
use crate::error::{Error, Result};

/// Empirical joint distribution of `arity` aligned sequences, stored as
/// counts of the observed tuples.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparseJoint {
    arity: usize,
    counts: BTreeMap<Vec<Symbol>, u64>,
    total: u64,
}

impl SparseJoint {
    pub fn from_sequences(sequences: &[&[Symbol]]) -> Result<Self> {
        let first = sequences
            .first()
            .ok_or_else(|| Error::Empty("no sequences".into()))?;
        let len = first.len();
        if len == 0 {
            return Err(Error::Empty("sequences have no samples".into()));
        }
        for s in sequences {
            if s.len() != len {
                return Err(Error::LengthMismatch {
                    expected: len,
                    found: s.len(),
                });
            }
        }
        let mut counts = BTreeMap::new();
        for t in 0..len {
            let key: Vec<Symbol> = sequences.iter().map(|s| s[t]).collect();
            *counts.entry(key).or_insert(0) += 1;
        }
        Ok(Self {
            arity: sequences.len(),
            counts,
            total: len as u64,
        })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn support(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &BTreeMap<Vec<Symbol>, u64> {
        &self.counts
    }

    pub fn count(&self, tuple: &[Symbol]) -> u64 {
        self.counts.get(tuple).copied().unwrap_or(0)
    }

    pub fn probability(&self, tuple: &[Symbol]) -> f64 {
        self.count(tuple) as f64 / self.total as f64
    }

    fn check(&self, sets: &[&[usize]]) -> Result<()> {
        let mut seen = vec![false; self.arity];
        for set in sets {
            for &c in *set {
                if c >= self.arity {
                    return Err(Error::InvalidCoordinates(format!(
                        "coordinate {c} out of range for arity {}",
                        self.arity
                    )));
                }
                if std::mem::replace(&mut seen[c], true) {
                    return Err(Error::InvalidCoordinates(format!(
                        "coordinate {c} used twice"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Joint of the listed coordinates, in the listed order.
    pub fn marginal(&self, coords: &[usize]) -> Result<SparseJoint> {
        self.check(&[coords])?;
        let mut counts = BTreeMap::new();
        for (key, &c) in &self.counts {
            *counts.entry(project(key, coords)).or_insert(0) += c;
        }
        Ok(SparseJoint {
            arity: coords.len(),
            counts,
            total: self.total,
        })
    }

    /// Entropy of the full joint.
    pub fn entropy(&self) -> f64 {
        let n = self.total as f64;
        -self
            .counts
            .values()
            .map(|&c| {
                let p = c as f64 / n;
                p * p.log2()
            })
            .sum::<f64>()
    }

    pub fn entropy_of(&self, coords: &[usize]) -> Result<f64> {
        nonempty(coords, "entropy")?;
        Ok(self.marginal(coords)?.entropy())
    }

    /// H(X|Y) = -sum p(x, y) log2 p(x|y). An empty `given` yields H(X).
    pub fn conditional_entropy(&self, target: &[usize], given: &[usize]) -> Result<f64> {
        nonempty(target, "conditional entropy target")?;
        self.check(&[target, given])?;
        let both = concat(&[given, target]);
        let joint = self.marginal(&both)?;
        let cond = self.marginal(given)?;
        let n = self.total as f64;
        let k = given.len();
        Ok(-joint
            .counts
            .iter()
            .map(|(key, &c)| {
                let cg = cond.count(&key[..k]) as f64;
                c as f64 / n * (c as f64 / cg).log2()
            })
            .sum::<f64>())
    }

    /// I(X;Y) = sum p(x, y) log2 [p(x, y) / (p(x) p(y))].
    pub fn mutual_information(&self, x: &[usize], y: &[usize]) -> Result<f64> {
        self.conditional_mutual_information(x, y, &[])
    }

    /// I(X;Y|Z) = sum p(x, y, z) log2 [p(x, y, z) p(z) / (p(x, z) p(y, z))].
    pub fn conditional_mutual_information(
        &self,
        x: &[usize],
        y: &[usize],
        z: &[usize],
    ) -> Result<f64> {
        nonempty(x, "mutual information")?;
        nonempty(y, "mutual information")?;
        self.check(&[x, y, z])?;
        let (nx, ny) = (x.len(), y.len());
        let xyz = self.marginal(&concat(&[x, y, z]))?;
        let xz = self.marginal(&concat(&[x, z]))?;
        let yz = self.marginal(&concat(&[y, z]))?;
        let zm = self.marginal(z)?;
        let n = self.total as f64;
        let mut buf = Vec::new();
        Ok(xyz
            .counts
            .iter()
            .map(|(key, &c)| {
                let (kx, rest) = key.split_at(nx);
                let (ky, kz) = rest.split_at(ny);
                buf.clear();
                buf.extend_from_slice(kx);
                buf.extend_from_slice(kz);
                let cxz = xz.count(&buf) as f64;
                buf.clear();
                buf.extend_from_slice(ky);
                buf.extend_from_slice(kz);
                let cyz = yz.count(&buf) as f64;
                let cz = zm.count(kz) as f64;
                c as f64 / n * ((c as f64 * cz) / (cxz * cyz)).log2()
            })
            .sum())
    }
}

/// Picks `coords` out of `tuple`.
pub fn project(tuple: &[Symbol], coords: &[usize]) -> Vec<Symbol> {
    coords.iter().map(|&c| tuple[c]).collect()
}

fn concat(parts: &[&[usize]]) -> Vec<usize> {
    parts.iter().flat_map(|p| p.iter().copied()).collect()
}

fn nonempty(coords: &[usize], what: &str) -> Result<()> {
    if coords.is_empty() {
        Err(Error::InvalidCoordinates(format!(
            "{what} needs at least one coordinate"
        )))
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn joint(seqs: &[Vec<Symbol>]) -> SparseJoint {
        let refs: Vec<&[Symbol]> = seqs.iter().map(Vec::as_slice).collect();
        SparseJoint::from_sequences(&refs).unwrap()
    }

    /// Dense probability table over a 3-variable alphabet of size `m`.
    struct Dense {
        m: usize,
        p: Vec<f64>,
    }

    impl Dense {
        fn new(seqs: &[Vec<Symbol>], m: usize) -> Self {
            let n = seqs[0].len();
            let mut p = vec![0.0; m * m * m];
            for t in 0..n {
                p[(seqs[0][t] as usize * m + seqs[1][t] as usize) * m + seqs[2][t] as usize] +=
                    1.0 / n as f64;
            }
            Self { m, p }
        }

        fn at(&self, x: usize, y: usize, z: usize) -> f64 {
            self.p[(x * self.m + y) * self.m + z]
        }

        /// Sum over every variable whose mask entry is false.
        fn marg(&self, keep: [bool; 3], x: usize, y: usize, z: usize) -> f64 {
            let r = |keep: bool, v: usize| if keep { v..v + 1 } else { 0..self.m };
            let mut s = 0.0;
            for a in r(keep[0], x) {
                for b in r(keep[1], y) {
                    for c in r(keep[2], z) {
                        s += self.at(a, b, c);
                    }
                }
            }
            s
        }

        fn fold(&self, f: impl Fn(usize, usize, usize, f64) -> f64) -> f64 {
            let mut s = 0.0;
            for x in 0..self.m {
                for y in 0..self.m {
                    for z in 0..self.m {
                        let p = self.at(x, y, z);
                        if p > 0.0 {
                            s += f(x, y, z, p);
                        }
                    }
                }
            }
            s
        }

        fn h_x(&self) -> f64 {
            -(0..self.m)
                .map(|x| self.marg([true, false, false], x, 0, 0))
                .filter(|p| *p > 0.0)
                .map(|p| p * p.log2())
                .sum::<f64>()
        }

        fn h_x_given_y(&self) -> f64 {
            -(0..self.m)
                .flat_map(|x| (0..self.m).map(move |y| (x, y)))
                .map(|(x, y)| {
                    let pxy = self.marg([true, true, false], x, y, 0);
                    if pxy == 0.0 {
                        return 0.0;
                    }
                    pxy * (pxy / self.marg([false, true, false], 0, y, 0)).log2()
                })
                .sum::<f64>()
        }

        fn i_xy(&self) -> f64 {
            let mut s = 0.0;
            for x in 0..self.m {
                for y in 0..self.m {
                    let pxy = self.marg([true, true, false], x, y, 0);
                    if pxy > 0.0 {
                        let px = self.marg([true, false, false], x, 0, 0);
                        let py = self.marg([false, true, false], 0, y, 0);
                        s += pxy * (pxy / (px * py)).log2();
                    }
                }
            }
            s
        }

        fn i_xy_given_z(&self) -> f64 {
            self.fold(|x, y, z, p| {
                let pz = self.marg([false, false, true], 0, 0, z);
                let pxz = self.marg([true, false, true], x, 0, z);
                let pyz = self.marg([false, true, true], 0, y, z);
                p * (p * pz / (pxz * pyz)).log2()
            })
        }
    }

    #[test]
    fn counting_example() {
        let j = joint(&[vec![0, 0, 1], vec![1, 1, 0]]);
        assert_eq!(j.total(), 3);
        assert_eq!(j.count(&[0, 1]), 2);
        assert_eq!(j.count(&[1, 0]), 1);
        assert_eq!(j.support(), 2);
        let single = joint(&[vec![7]]);
        assert_eq!(single.probability(&[7]), 1.0);
    }

    #[test]
    fn length_mismatch() {
        let err = SparseJoint::from_sequences(&[&[0, 1], &[0]]).unwrap_err();
        assert!(matches!(
            err,
            Error::LengthMismatch {
                expected: 2,
                found: 1
            }
        ));
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(joint(&[vec![0, 1, 2, 3]]).entropy(), 2.0);
        assert_eq!(joint(&[vec![5, 5, 5]]).entropy(), 0.0);
        assert_eq!(joint(&[vec![0, 0, 1, 2]]).entropy(), 1.5);
    }

    #[test]
    fn conditional_entropy_examples() {
        // x = y mod 2
        let j = joint(&[vec![0, 1, 0, 1], vec![0, 1, 2, 3]]);
        assert_eq!(j.conditional_entropy(&[0], &[1]).unwrap(), 0.0);
        // independent bits
        let k = joint(&[vec![0, 0, 1, 1], vec![0, 1, 0, 1]]);
        assert_eq!(k.conditional_entropy(&[0], &[1]).unwrap(), 1.0);
        assert_eq!(k.conditional_entropy(&[0], &[]).unwrap(), 1.0);
    }

    #[test]
    fn mutual_information_examples() {
        let k = joint(&[vec![0, 0, 1, 1], vec![0, 1, 0, 1]]);
        assert_eq!(k.mutual_information(&[0], &[1]).unwrap(), 0.0);
        let same = joint(&[vec![0, 1, 2, 3], vec![0, 1, 2, 3]]);
        assert_eq!(same.mutual_information(&[0], &[1]).unwrap(), 2.0);
    }

    #[test]
    fn xor_carries_one_bit_given_the_key() {
        let (mut x, mut y, mut a) = (vec![], vec![], vec![]);
        for yy in 0..2 {
            for aa in 0..2 {
                x.push(yy ^ aa);
                y.push(yy);
                a.push(aa);
            }
        }
        let j = joint(&[x, y, a]);
        assert_eq!(
            j.conditional_mutual_information(&[0], &[1], &[2]).unwrap(),
            1.0
        );
        assert_eq!(j.mutual_information(&[0], &[1]).unwrap(), 0.0);
    }

    #[test]
    fn independent_target_has_no_information() {
        let mut seqs = vec![vec![], vec![], vec![]];
        for x in 0..3 {
            for y in 0..2 {
                for z in 0..2 {
                    seqs[0].push(x);
                    seqs[1].push(y);
                    seqs[2].push(z);
                }
            }
        }
        let j = joint(&seqs);
        assert!(
            j.conditional_mutual_information(&[0], &[1], &[2])
                .unwrap()
                .abs()
                < 1e-15
        );
    }

    #[test]
    fn bad_coordinates() {
        let j = joint(&[vec![0, 1], vec![1, 0]]);
        assert!(matches!(
            j.marginal(&[2]),
            Err(Error::InvalidCoordinates(_))
        ));
        assert!(j.mutual_information(&[0], &[0]).is_err());
        assert!(j.conditional_entropy(&[], &[1]).is_err());
        assert!(j.conditional_mutual_information(&[0], &[1], &[1]).is_err());
    }

    fn sequences(max_alphabet: u64) -> impl Strategy<Value = (Vec<Vec<Symbol>>, usize)> {
        (1..=max_alphabet, 1usize..=50).prop_flat_map(|(m, len)| {
            (
                proptest::collection::vec(proptest::collection::vec(0..m, len), 3),
                Just(m as usize),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn matches_dense_oracle((seqs, m) in sequences(4)) {
            let j = joint(&seqs);
            let d = Dense::new(&seqs, m);
            prop_assert!((j.entropy_of(&[0]).unwrap() - d.h_x()).abs() < 1e-12);
            prop_assert!((j.conditional_entropy(&[0], &[1]).unwrap() - d.h_x_given_y()).abs() < 1e-12);
            prop_assert!((j.mutual_information(&[0], &[1]).unwrap() - d.i_xy()).abs() < 1e-12);
            prop_assert!((j.conditional_mutual_information(&[0], &[1], &[2]).unwrap() - d.i_xy_given_z()).abs() < 1e-12);
        }

        #[test]
        fn identities_hold((seqs, _) in sequences(4)) {
            let j = joint(&seqs);
            let h = |c: &[usize]| j.entropy_of(c).unwrap();
            // chain rule both ways
            let i_x_yz = j.mutual_information(&[0], &[1, 2]).unwrap();
            let a = j.mutual_information(&[0], &[1]).unwrap() + j.conditional_mutual_information(&[0], &[2], &[1]).unwrap();
            let b = j.mutual_information(&[0], &[2]).unwrap() + j.conditional_mutual_information(&[0], &[1], &[2]).unwrap();
            prop_assert!((i_x_yz - a).abs() < 1e-12);
            prop_assert!((i_x_yz - b).abs() < 1e-12);
            // definitions against entropy decompositions
            let cmi = j.conditional_mutual_information(&[0], &[1], &[2]).unwrap();
            let via_h = j.conditional_entropy(&[0], &[2]).unwrap() - j.conditional_entropy(&[0], &[1, 2]).unwrap();
            prop_assert!((cmi - via_h).abs() < 1e-12);
            let ce = j.conditional_entropy(&[0], &[1]).unwrap();
            prop_assert!((ce - (h(&[0, 1]) - h(&[1]))).abs() < 1e-12);
            prop_assert!(ce >= -1e-12 && ce <= h(&[0]) + 1e-12);
            let mi = j.mutual_information(&[0], &[1]).unwrap();
            prop_assert!(mi >= -1e-12);
            prop_assert!((mi - j.mutual_information(&[1], &[0]).unwrap()).abs() < 1e-12);
            prop_assert!(cmi >= -1e-12);
        }

        #[test]
        fn marginal_equals_direct_estimate((seqs, _) in sequences(4)) {
            let j = joint(&seqs);
            let direct = joint(&[seqs[2].clone(), seqs[0].clone()]);
            prop_assert_eq!(j.marginal(&[2, 0]).unwrap(), direct);
            let total: u64 = j.counts().values().sum();
            prop_assert_eq!(total, j.total());
        }
    }
}
