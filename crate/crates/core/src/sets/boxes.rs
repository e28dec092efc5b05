use rand::Rng;

use crate::scalar::{vec, Real};

/// Axis-aligned box `[lo, hi]`. A zero-dimensional box holds the empty vector.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxSet<T> {
    pub lo: Vec<T>,
    pub hi: Vec<T>,
}

impl<T: Real> BoxSet<T> {
    pub fn new(lo: Vec<T>, hi: Vec<T>) -> Self {
        assert_eq!(lo.len(), hi.len(), "box bounds of different length");
        BoxSet { lo, hi }
    }

    pub fn point(p: Vec<T>) -> Self {
        BoxSet { lo: p.clone(), hi: p }
    }

    pub fn interval(lo: T, hi: T) -> Self {
        BoxSet { lo: vec![lo], hi: vec![hi] }
    }

    pub fn zero_dim() -> Self {
        BoxSet { lo: Vec::new(), hi: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(l, h)| !(l <= h))
    }

    pub fn contains(&self, p: &[T], tol: T) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(x, (l, h))| *x >= *l - tol && *x <= *h + tol)
    }

    pub fn center(&self) -> Vec<T> {
        let half = T::lit(0.5);
        self.lo.iter().zip(&self.hi).map(|(l, h)| (*l + *h) * half).collect()
    }

    pub fn clamp(&self, p: &[T]) -> Vec<T> {
        p.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(x, (l, h))| x.max(*l).min(*h))
            .collect()
    }

    /// Corner points in lexicographic order; degenerate directions are not repeated.
    pub fn vertices(&self) -> Vec<Vec<T>> {
        let mut out = vec![Vec::new()];
        for (l, h) in self.lo.iter().zip(&self.hi) {
            let choices: Vec<T> = if l == h { vec![*l] } else { vec![*l, *h] };
            out = out
                .into_iter()
                .flat_map(|p| {
                    choices.iter().map(move |c| {
                        let mut q = p.clone();
                        q.push(*c);
                        q
                    })
                })
                .collect();
        }
        out
    }

    /// Lattice with `per_dim` evenly spaced values per direction, endpoints included.
    pub fn lattice(&self, per_dim: usize) -> Vec<Vec<T>> {
        let axes: Vec<Vec<T>> = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| {
                if l == h || per_dim < 2 {
                    vec![*l]
                } else {
                    let n = T::lit((per_dim - 1) as f64);
                    (0..per_dim).map(|k| *l + (*h - *l) * T::lit(k as f64) / n).collect()
                }
            })
            .collect();
        product(&axes)
    }

    pub fn intersect(&self, other: &Self) -> Self {
        BoxSet {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| a.max(*b)).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| a.min(*b)).collect(),
        }
    }

    pub fn volume(&self) -> T {
        self.lo.iter().zip(&self.hi).fold(T::one(), |v, (l, h)| v * (*h - *l))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| {
                let s: f64 = rng.gen();
                *l + (*h - *l) * T::lit(s)
            })
            .collect()
    }
}

pub(crate) fn product<T: Real>(axes: &[Vec<T>]) -> Vec<Vec<T>> {
    let mut out = vec![Vec::new()];
    for axis in axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for p in &out {
            for v in axis {
                let mut q = p.clone();
                q.push(*v);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

/// Finite union of boxes of a common dimension. One-dimensional unions are kept
/// sorted and merged so they read as a list of disjoint intervals.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxUnion<T> {
    pub dim: usize,
    pub boxes: Vec<BoxSet<T>>,
}

impl<T: Real> BoxUnion<T> {
    pub fn empty(dim: usize) -> Self {
        BoxUnion { dim, boxes: Vec::new() }
    }

    pub fn single(b: BoxSet<T>) -> Self {
        let mut u = BoxUnion::empty(b.dim());
        u.push(b);
        u
    }

    pub fn push(&mut self, b: BoxSet<T>) {
        assert_eq!(b.dim(), self.dim, "box of wrong dimension");
        if !b.is_empty() && !self.boxes.contains(&b) {
            self.boxes.push(b);
        }
        self.normalize();
    }

    fn normalize(&mut self) {
        if self.dim != 1 || self.boxes.len() < 2 {
            return;
        }
        self.boxes.sort_by(|a, b| a.lo[0].partial_cmp(&b.lo[0]).unwrap());
        let mut merged: Vec<BoxSet<T>> = Vec::new();
        for b in self.boxes.drain(..) {
            match merged.last_mut() {
                Some(last) if b.lo[0] <= last.hi[0] => last.hi[0] = last.hi[0].max(b.hi[0]),
                _ => merged.push(b),
            }
        }
        self.boxes = merged;
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn contains(&self, p: &[T], tol: T) -> bool {
        self.boxes.iter().any(|b| b.contains(p, tol))
    }

    pub fn vertices(&self) -> Vec<Vec<T>> {
        let mut out: Vec<Vec<T>> = Vec::new();
        for b in &self.boxes {
            for v in b.vertices() {
                if !out.contains(&v) {
                    out.push(v);
                }
            }
        }
        out
    }

    pub fn lattice(&self, per_dim: usize) -> Vec<Vec<T>> {
        self.boxes.iter().flat_map(|b| b.lattice(per_dim)).collect()
    }

    /// `(lo, hi)` pairs of a one-dimensional union.
    pub fn intervals(&self) -> Vec<(T, T)> {
        assert_eq!(self.dim, 1, "intervals() on a multi-dimensional union");
        self.boxes.iter().map(|b| (b.lo[0], b.hi[0])).collect()
    }

    /// Point of least Euclidean norm (first box wins ties).
    pub fn min_norm_point(&self) -> Option<Vec<T>> {
        let zero = vec![T::zero(); self.dim];
        let mut best: Option<(T, Vec<T>)> = None;
        for b in &self.boxes {
            let p = b.clamp(&zero);
            let n = vec::norm(&p);
            if best.as_ref().is_none_or(|(bn, _)| n < *bn) {
                best = Some((n, p));
            }
        }
        best.map(|(_, p)| p)
    }

    pub fn intersect_box(&self, b: &BoxSet<T>) -> Self {
        let mut out = BoxUnion::empty(self.dim);
        for a in &self.boxes {
            out.push(a.intersect(b));
        }
        out
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for b in &other.boxes {
            out.push(b.clone());
        }
        out
    }

    /// Uniform sample: a box is picked with probability proportional to its volume
    /// (uniformly when all volumes vanish), then a point uniformly inside it.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<Vec<T>> {
        if self.boxes.is_empty() {
            return None;
        }
        let vols: Vec<f64> = self.boxes.iter().map(|b| b.volume().as_f64().max(0.0)).collect();
        let total: f64 = vols.iter().sum();
        let idx = if self.boxes.len() == 1 {
            0
        } else if total > 0.0 {
            let mut s = rng.gen::<f64>() * total;
            let mut k = 0;
            while k + 1 < vols.len() && s >= vols[k] {
                s -= vols[k];
                k += 1;
            }
            k
        } else {
            rng.gen_range(0..self.boxes.len())
        };
        Some(self.boxes[idx].sample(rng))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn vertices_skip_degenerate_directions() {
        let b = BoxSet::new(vec![0.0, 1.0, -1.0], vec![1.0, 1.0, 1.0]);
        assert_eq!(b.vertices().len(), 4);
        assert_eq!(BoxSet::<f64>::zero_dim().vertices(), vec![Vec::<f64>::new()]);
    }

    #[test]
    fn lattice_includes_endpoints() {
        let b = BoxSet::interval(-1.0, 1.0);
        let l = b.lattice(5);
        assert_eq!(l, vec![vec![-1.0], vec![-0.5], vec![0.0], vec![0.5], vec![1.0]]);
    }

    #[test]
    fn union_merges_intervals() {
        let mut u = BoxUnion::empty(1);
        u.push(BoxSet::interval(2.0, 3.0));
        u.push(BoxSet::interval(-1.0, 0.5));
        u.push(BoxSet::interval(0.0, 1.0));
        u.push(BoxSet::interval(5.0, 4.0));
        assert_eq!(u.intervals(), vec![(-1.0, 1.0), (2.0, 3.0)]);
        assert_eq!(u.min_norm_point(), Some(vec![0.0]));
        let v = BoxUnion::single(BoxSet::interval(2.0, 3.0)).union(&BoxUnion::single(BoxSet::interval(-4.0, -2.5)));
        assert_eq!(v.min_norm_point(), Some(vec![2.0]));
    }

    #[test]
    fn samples_stay_inside() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let u = BoxUnion::single(BoxSet::interval(0.8, 0.9)).union(&BoxUnion::single(BoxSet::interval(2.0, 2.0)));
        for _ in 0..200 {
            let p = u.sample(&mut rng).unwrap();
            assert!(u.contains(&p, 0.0));
        }
        assert!(BoxUnion::<f64>::empty(1).sample(&mut rng).is_none());
    }
}
