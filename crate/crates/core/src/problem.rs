//! Synthetic binary clustering benchmark.
//!
//! `k` random binary centroids of dimension `n` are drawn with fair coin
//! flips; samples are copies of a centroid with every bit independently
//! flipped with probability `q`. An autoencoder that denoises perfectly
//! reproduces the generating centroid, so the nearest-centroid distance is
//! the reconstruction floor.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{invalid, parse_err, shape, Result};
use crate::matrix::Matrix;
use crate::seed::rng_from;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CentroidSet {
    k: usize,
    n: usize,
    bits: Vec<u8>,
}

impl CentroidSet {
    pub fn from_bits(k: usize, n: usize, bits: Vec<u8>) -> Result<Self> {
        if k == 0 || n == 0 {
            return Err(invalid("centroid set needs k >= 1 and n >= 1"));
        }
        if bits.len() != k * n {
            return Err(shape(format!("expected {} bits, got {}", k * n, bits.len())));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(invalid("centroid bits must be 0 or 1"));
        }
        Ok(Self { k, n, bits })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn centroid(&self, i: usize) -> &[u8] {
        &self.bits[i * self.n..(i + 1) * self.n]
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BitDataset {
    k: usize,
    n: usize,
    per: usize,
    q: f64,
    seed: u64,
    split: Split,
    samples: Vec<u8>,
    source_index: Vec<usize>,
}

impl BitDataset {
    pub fn len(&self) -> usize {
        self.source_index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source_index.is_empty()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn samples_per_centroid(&self) -> usize {
        self.per
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    pub fn sample(&self, i: usize) -> &[u8] {
        &self.samples[i * self.n..(i + 1) * self.n]
    }

    pub fn source_index(&self) -> &[usize] {
        &self.source_index
    }

    /// Dense `len × n` matrix of 0.0/1.0 values.
    pub fn to_matrix(&self) -> Matrix {
        let data = self.samples.iter().map(|&b| f64::from(b)).collect();
        Matrix::from_vec(self.len(), self.n, data).expect("dataset shape")
    }

    /// Keeps only the listed samples, in order.
    pub fn subset(&self, idx: &[usize]) -> Self {
        let mut samples = Vec::with_capacity(idx.len() * self.n);
        for &i in idx {
            samples.extend_from_slice(self.sample(i));
        }
        Self { samples, source_index: idx.iter().map(|&i| self.source_index[i]).collect(), ..self.clone() }
    }

    /// Serializes to the plain-text dataset format: a `k n per q seed`
    /// header, then one `bits index` line per sample.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.len() * (self.n + 8) + 64);
        writeln!(out, "{} {} {} {} {}", self.k, self.n, self.per, self.q, self.seed).unwrap();
        for i in 0..self.len() {
            for &b in self.sample(i) {
                out.push(if b == 1 { '1' } else { '0' });
            }
            writeln!(out, " {}", self.source_index[i]).unwrap();
        }
        out
    }

    pub fn from_text(text: &str, split: Split) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| parse_err(1, "missing header"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(parse_err(1, "header must be `k n per q seed`"));
        }
        fn field<T: FromStr>(s: &str, name: &str) -> Result<T> {
            s.parse().map_err(|_| parse_err(1, format!("bad {name}: {s:?}")))
        }
        let k: usize = field(fields[0], "k")?;
        let n: usize = field(fields[1], "n")?;
        let per: usize = field(fields[2], "per")?;
        let q: f64 = field(fields[3], "q")?;
        let seed: u64 = field(fields[4], "seed")?;
        if k == 0 || n == 0 || !(0.0..=1.0).contains(&q) {
            return Err(parse_err(1, "header values out of range"));
        }

        let mut samples = Vec::new();
        let mut source_index = Vec::new();
        for (lineno, line) in lines {
            let lineno = lineno + 1;
            if line.trim().is_empty() {
                continue;
            }
            let (bits, idx) = line.split_once(' ').ok_or_else(|| parse_err(lineno, "expected `bits index`"))?;
            if bits.len() != n {
                return Err(parse_err(lineno, format!("expected {n} bits, got {}", bits.len())));
            }
            for c in bits.bytes() {
                match c {
                    b'0' => samples.push(0),
                    b'1' => samples.push(1),
                    _ => return Err(parse_err(lineno, "bits must be 0 or 1")),
                }
            }
            let idx: usize = idx.trim().parse().map_err(|_| parse_err(lineno, format!("bad source index {idx:?}")))?;
            if idx >= k {
                return Err(parse_err(lineno, format!("source index {idx} >= k={k}")));
            }
            source_index.push(idx);
        }
        Ok(Self { k, n, per, q, seed, split, samples, source_index })
    }
}

pub fn generate_centroids(k: usize, n: usize, seed: u64) -> Result<CentroidSet> {
    if k == 0 || n == 0 {
        return Err(invalid(format!("generate_centroids needs k, n >= 1 (got k={k}, n={n})")));
    }
    let mut rng = rng_from(seed);
    let bits = (0..k * n).map(|_| u8::from(rng.gen_bool(0.5))).collect();
    CentroidSet::from_bits(k, n, bits)
}

/// Draws `samples_per_centroid` corrupted copies of every centroid, grouped
/// by centroid in index order.
pub fn generate_dataset(
    centroids: &CentroidSet,
    samples_per_centroid: usize,
    q: f64,
    seed: u64,
    split: Split,
) -> Result<BitDataset> {
    if !(0.0..=1.0).contains(&q) {
        return Err(invalid(format!("flip probability q={q} outside [0,1]")));
    }
    if samples_per_centroid == 0 {
        return Err(invalid("samples_per_centroid must be >= 1"));
    }
    let (k, n) = (centroids.k, centroids.n);
    let mut rng = rng_from(seed);
    let mut samples = Vec::with_capacity(k * samples_per_centroid * n);
    let mut source_index = Vec::with_capacity(k * samples_per_centroid);
    for c in 0..k {
        for _ in 0..samples_per_centroid {
            samples.extend(centroids.centroid(c).iter().map(|&b| b ^ u8::from(rng.gen_bool(q))));
            source_index.push(c);
        }
    }
    Ok(BitDataset { k, n, per: samples_per_centroid, q, seed, split, samples, source_index })
}

/// `h` fresh samples drawn from the same corruption process, each from a
/// uniformly chosen centroid. Used as held-out probes.
pub fn generate_heldout(centroids: &CentroidSet, h: usize, q: f64, seed: u64) -> Result<BitDataset> {
    if h == 0 {
        return Err(invalid("held-out sample count must be >= 1"));
    }
    let per = h.div_ceil(centroids.k);
    let pool = generate_dataset(centroids, per, q, seed, Split::Test)?;
    let mut idx: Vec<usize> = (0..pool.len()).collect();
    idx.shuffle(&mut rng_from(seed ^ 0x5A5A_5A5A));
    idx.truncate(h);
    Ok(pool.subset(&idx))
}

pub fn hamming(a: &[u8], b: &[u8]) -> Result<usize> {
    if a.len() != b.len() {
        return Err(invalid(format!("hamming on lengths {} and {}", a.len(), b.len())));
    }
    Ok(a.iter().zip(b).filter(|(x, y)| x != y).count())
}

/// Index and distance of the closest centroid; ties go to the lowest index.
pub fn nearest_centroid(sample: &[u8], centroids: &CentroidSet) -> Result<(usize, usize)> {
    let mut best = (0, usize::MAX);
    for c in 0..centroids.k {
        let d = hamming(sample, centroids.centroid(c))?;
        if d < best.1 {
            best = (c, d);
        }
    }
    Ok(best)
}

/// Mean per-bit distance of every sample to its nearest centroid.
pub fn oracle_cluster_loss(data: &BitDataset, centroids: &CentroidSet) -> Result<f64> {
    if data.is_empty() {
        return Err(invalid("oracle_cluster_loss on an empty dataset"));
    }
    if data.n != centroids.n {
        return Err(shape(format!("dataset n={} vs centroid n={}", data.n, centroids.n)));
    }
    let mut total = 0usize;
    for i in 0..data.len() {
        total += nearest_centroid(data.sample(i), centroids)?.1;
    }
    Ok(total as f64 / (data.len() * data.n) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn centroid_shapes_and_errors() {
        let c = generate_centroids(10, 1000, 1).unwrap();
        assert_eq!((c.k(), c.n()), (10, 1000));
        assert!(c.bits().iter().all(|&b| b <= 1));
        let one = generate_centroids(1, 1, 9).unwrap();
        assert!(one.bits()[0] <= 1);
        assert!(generate_centroids(0, 5, 1).is_err());
        assert!(generate_centroids(5, 0, 1).is_err());
    }

    #[test]
    fn centroid_bit_fraction_is_near_half() {
        // Binomial(1024, 0.5): sd = 16 bits, so ±0.1 (±102 bits) is > 6 sd.
        for seed in 0..20 {
            let c = generate_centroids(4, 256, seed).unwrap();
            let frac = c.bits().iter().map(|&b| b as f64).sum::<f64>() / 1024.0;
            assert!((frac - 0.5).abs() <= 0.1, "seed {seed}: {frac}");
        }
    }

    #[test]
    fn dataset_sizes_and_zero_noise() {
        let c = generate_centroids(10, 50, 3).unwrap();
        let d = generate_dataset(&c, 10, 0.05, 4, Split::Train).unwrap();
        assert_eq!(d.len(), 100);
        let clean = generate_dataset(&c, 3, 0.0, 4, Split::Train).unwrap();
        for i in 0..clean.len() {
            assert_eq!(clean.sample(i), c.centroid(clean.source_index()[i]));
        }
        assert_eq!(oracle_cluster_loss(&clean, &c).unwrap(), 0.0);
        assert!(generate_dataset(&c, 3, 1.5, 4, Split::Train).is_err());
        assert!(generate_dataset(&c, 3, -0.1, 4, Split::Train).is_err());
        assert!(generate_dataset(&c, 0, 0.1, 4, Split::Train).is_err());
    }

    #[test]
    fn mean_distance_to_source_matches_flip_rate() {
        // 100 samples × 200 bits at q = 0.05: per-sample mean 10, sd of the
        // average over 100 samples ≈ 0.31, so ±2 is > 6 sd.
        let c = generate_centroids(4, 200, 11).unwrap();
        let d = generate_dataset(&c, 25, 0.05, 12, Split::Train).unwrap();
        let mean =
            (0..d.len()).map(|i| hamming(d.sample(i), c.centroid(d.source_index()[i])).unwrap() as f64).sum::<f64>()
                / d.len() as f64;
        assert!((mean - 10.0).abs() <= 2.0, "{mean}");
    }

    #[test]
    fn flip_fraction_converges_to_q() {
        let c = generate_centroids(8, 500, 5).unwrap();
        let q = 0.05;
        let d = generate_dataset(&c, 50, q, 6, Split::Train).unwrap();
        let bits = (d.len() * d.n()) as f64;
        let flips: usize = (0..d.len()).map(|i| hamming(d.sample(i), c.centroid(d.source_index()[i])).unwrap()).sum();
        let sd = (bits * q * (1.0 - q)).sqrt();
        assert!((flips as f64 - bits * q).abs() <= 3.0 * sd);
    }

    #[test]
    fn hamming_basics() {
        assert_eq!(hamming(&[0, 0, 0, 0], &[0, 0, 0, 0]).unwrap(), 0);
        assert_eq!(hamming(&[1, 0, 1, 0], &[0, 1, 0, 1]).unwrap(), 4);
        assert!(hamming(&[1, 0], &[1]).is_err());
    }

    #[test]
    fn oracle_membership_and_empty() {
        let c = CentroidSet::from_bits(3, 4, vec![0, 0, 0, 0, 1, 1, 0, 0, 1, 0, 1, 1]).unwrap();
        let one = BitDataset {
            k: 3,
            n: 4,
            per: 1,
            q: 0.0,
            seed: 0,
            split: Split::Test,
            samples: vec![1, 0, 1, 1],
            source_index: vec![2],
        };
        assert_eq!(nearest_centroid(one.sample(0), &c).unwrap(), (2, 0));
        assert_eq!(oracle_cluster_loss(&one, &c).unwrap(), 0.0);
        assert!(oracle_cluster_loss(&one.subset(&[]), &c).is_err());
    }

    #[test]
    fn oracle_matches_brute_force_on_small_instance() {
        let c = generate_centroids(3, 12, 21).unwrap();
        let d = generate_dataset(&c, 4, 0.05, 22, Split::Train).unwrap();
        // Brute force: enumerate every assignment per sample and keep the minimum.
        let mut total = 0usize;
        for i in 0..d.len() {
            let mut best = usize::MAX;
            for ci in 0..3 {
                let dist = d.sample(i).iter().zip(c.centroid(ci)).filter(|(a, b)| a != b).count();
                best = best.min(dist);
            }
            total += best;
        }
        let expected = total as f64 / (d.len() * 12) as f64;
        assert_eq!(oracle_cluster_loss(&d, &c).unwrap(), expected);
    }

    #[test]
    fn deterministic_and_text_round_trip() {
        let c = generate_centroids(3, 17, 8).unwrap();
        let a = generate_dataset(&c, 5, 0.1, 9, Split::Train).unwrap();
        let b = generate_dataset(&c, 5, 0.1, 9, Split::Train).unwrap();
        assert_eq!(a, b);
        let back = BitDataset::from_text(&a.to_text(), Split::Train).unwrap();
        assert_eq!(back, a);
        assert_eq!(back.to_text(), a.to_text());
    }

    #[test]
    fn text_parse_errors_carry_line_numbers() {
        let bad = "2 3 1 0.1 5\n010 0\n01x 1\n";
        match BitDataset::from_text(bad, Split::Train) {
            Err(crate::Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(BitDataset::from_text("2 3 1 0.1 5\n010 7\n", Split::Train).is_err());
    }

    #[test]
    fn heldout_has_requested_size() {
        let c = generate_centroids(4, 10, 1).unwrap();
        let h = generate_heldout(&c, 5, 0.05, 2).unwrap();
        assert_eq!(h.len(), 5);
        assert!(generate_heldout(&c, 0, 0.05, 2).is_err());
    }

    proptest! {
        #[test]
        fn hamming_is_a_metric(
            a in prop::collection::vec(0u8..2, 24),
            b in prop::collection::vec(0u8..2, 24),
            c in prop::collection::vec(0u8..2, 24),
        ) {
            let ab = hamming(&a, &b).unwrap();
            prop_assert_eq!(ab, hamming(&b, &a).unwrap());
            prop_assert_eq!(hamming(&a, &a).unwrap(), 0);
            prop_assert!(hamming(&a, &c).unwrap() <= ab + hamming(&b, &c).unwrap());
        }

        #[test]
        fn text_round_trip_any_q(q in 0.0f64..=1.0, seed in any::<u64>()) {
            let c = generate_centroids(2, 9, seed).unwrap();
            let d = generate_dataset(&c, 2, q, seed ^ 1, Split::Test).unwrap();
            prop_assert_eq!(BitDataset::from_text(&d.to_text(), Split::Test).unwrap(), d);
        }
    }
}
