use rayon::prelude::*;

use crate::scalar::{vec, Real};

use super::boxes::product;
use super::{BoxSet, ConstraintSet, ScalarConstraint};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMode {
    Interior,
    Boundary,
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Provenance {
    Interior,
    Boundary,
    BoxGrid,
}

#[derive(Debug, Clone)]
pub struct SampleGrid<T> {
    pub points: Vec<Vec<T>>,
    pub provenance: Provenance,
    pub resolution: T,
}

impl<T: Real> SampleGrid<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Adds the given points that belong to `set` (analytic endpoints of boundary
    /// pieces, typically) unless already present.
    pub fn with_anchors(mut self, set: &ConstraintSet<T>, anchors: &[Vec<T>], tol: T) -> Self {
        for a in anchors {
            if set.contains(a, tol) && !self.points.contains(a) {
                self.points.push(a.clone());
            }
        }
        self
    }

    pub fn filter(mut self, keep: impl Fn(&[T]) -> bool) -> Self {
        self.points.retain(|p| keep(p));
        self
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SampleOptions<T> {
    pub tol: T,
    /// Half-width of the boundary band in constraint units; defaults to the resolution.
    pub band: Option<T>,
    /// Newton-project boundary candidates onto their nearest active constraint.
    pub project: bool,
}

impl<T: Real> Default for SampleOptions<T> {
    fn default() -> Self {
        SampleOptions { tol: T::lit(super::DEFAULT_TOL), band: None, project: true }
    }
}

fn axes<T: Real>(bbox: &BoxSet<T>, resolution: T) -> Vec<Vec<T>> {
    assert!(resolution > T::zero(), "resolution must be positive");
    bbox.lo
        .iter()
        .zip(&bbox.hi)
        .map(|(l, h)| {
            let span = *h - *l;
            if span <= T::zero() {
                return vec![*l];
            }
            let steps = (span / resolution + T::lit(1e-9)).floor().to_usize().unwrap_or(0);
            let mut axis: Vec<T> = (0..=steps).map(|k| *l + resolution * T::lit(k as f64)).collect();
            let last = *axis.last().unwrap();
            if *h - last > resolution * T::lit(1e-9) {
                axis.push(*h);
            } else {
                *axis.last_mut().unwrap() = *h;
            }
            axis
        })
        .collect()
}

/// Lattice `lo + k*res` per direction, with `hi` appended when the last step falls
/// short of it. Degenerate directions contribute their single value.
pub fn lattice<T: Real>(bbox: &BoxSet<T>, resolution: T) -> Vec<Vec<T>> {
    product(&axes(bbox, resolution))
}

/// Lattice points mapped through `f`, keeping the `Some` results in lattice order.
/// Points are generated lazily and in parallel, so fine lattices need no buffer.
pub fn lattice_filter_map<T: Real, R: Send>(
    bbox: &BoxSet<T>,
    resolution: T,
    f: impl Fn(Vec<T>) -> Option<R> + Sync + Send,
) -> Vec<R> {
    let ax = axes(bbox, resolution);
    let total: usize = ax.iter().map(|a| a.len()).product();
    (0..total)
        .into_par_iter()
        .filter_map(|mut k| {
            let mut p = vec![T::zero(); ax.len()];
            for d in (0..ax.len()).rev() {
                p[d] = ax[d][k % ax[d].len()];
                k /= ax[d].len();
            }
            f(p)
        })
        .collect()
}

pub fn sample<T: Real>(set: &ConstraintSet<T>, bbox: &BoxSet<T>, resolution: T, mode: SampleMode) -> SampleGrid<T> {
    sample_with(set, bbox, resolution, mode, &SampleOptions::default())
}

pub fn sample_with<T: Real>(
    set: &ConstraintSet<T>,
    bbox: &BoxSet<T>,
    resolution: T,
    mode: SampleMode,
    opts: &SampleOptions<T>,
) -> SampleGrid<T> {
    let (points, provenance) = match mode {
        SampleMode::Grid => (lattice(bbox, resolution), Provenance::BoxGrid),
        SampleMode::Interior => (
            lattice_filter_map(bbox, resolution, |p| set.contains(&p, opts.tol).then_some(p)),
            Provenance::Interior,
        ),
        SampleMode::Boundary => {
            let band = opts.band.unwrap_or(resolution);
            (lattice_filter_map(bbox, resolution, |p| boundary_point(set, p, band, opts)), Provenance::Boundary)
        }
    };
    SampleGrid { points, provenance, resolution }
}

fn boundary_point<T: Real>(set: &ConstraintSet<T>, p: Vec<T>, band: T, opts: &SampleOptions<T>) -> Option<Vec<T>> {
    // nearest constraint (by |h|) among clauses that hold within the band
    let mut pick: Option<(T, usize, usize)> = None;
    for (ci, clause) in set.clauses.iter().enumerate() {
        if !clause.contains(&p, band) {
            continue;
        }
        for (hi, h) in clause.constraints.iter().enumerate() {
            let a = h.value(&p).abs();
            if a <= band && pick.is_none_or(|(b, _, _)| a < b) {
                pick = Some((a, ci, hi));
            }
        }
    }
    let (_, ci, hi) = pick?;
    let h = &set.clauses[ci].constraints[hi];
    let mut q = p;
    if opts.project {
        for _ in 0..30 {
            let v = h.value(&q);
            if v.abs() <= opts.tol {
                break;
            }
            let g = h.field.gradient(&q);
            let gg = vec::dot(&g, &g);
            if !(gg > T::zero()) {
                return None;
            }
            q = vec::axpy(&q, -v / gg, &g);
        }
    }
    (set.contains(&q, band) && h.value(&q).abs() <= band).then_some(q)
}

/// Points of `{level = 0}` on the boundary of `set`: lattice points within one
/// resolution of both are pushed onto the two surfaces by alternating Newton steps,
/// then de-duplicated at half the resolution.
pub fn sample_level_boundary<T: Real>(
    set: &ConstraintSet<T>,
    level: &ScalarConstraint<T>,
    bbox: &BoxSet<T>,
    resolution: T,
    tol: T,
) -> SampleGrid<T> {
    let mut out: Vec<Vec<T>> = Vec::new();
    let half = resolution * T::lit(0.5);
    let near = lattice_filter_map(bbox, resolution, |p| {
        (level.value(&p).abs() <= resolution * (T::one() + vec::norm(&level.field.gradient(&p)))).then_some(p)
    });
    for p in near {
        for clause in &set.clauses {
            if !clause.contains(&p, resolution) {
                continue;
            }
            for h in &clause.constraints {
                let scale = resolution * (T::one() + vec::norm(&h.field.gradient(&p)));
                if h.value(&p).abs() > scale {
                    continue;
                }
                let q = match alternate(&p, level, h, tol) {
                    Some(q) => q,
                    None => continue,
                };
                if set.contains(&q, tol) && !out.iter().any(|o| vec::norm_inf(&vec::sub(o, &q)) < half) {
                    out.push(q);
                }
            }
        }
    }
    SampleGrid { points: out, provenance: Provenance::Boundary, resolution }
}

fn newton<T: Real>(q: &[T], h: &ScalarConstraint<T>) -> Option<Vec<T>> {
    let v = h.value(q);
    let g = h.field.gradient(q);
    let gg = vec::dot(&g, &g);
    (gg > T::zero()).then(|| vec::axpy(q, -v / gg, &g))
}

fn alternate<T: Real>(p: &[T], a: &ScalarConstraint<T>, b: &ScalarConstraint<T>, tol: T) -> Option<Vec<T>> {
    let mut q = p.to_vec();
    for _ in 0..60 {
        if a.value(&q).abs() <= tol && b.value(&q).abs() <= tol {
            return Some(q);
        }
        q = newton(&q, a)?;
        q = newton(&q, b)?;
    }
    (a.value(&q).abs() <= a.tol(tol) && b.value(&q).abs() <= b.tol(tol)).then_some(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::{c, field, ScalarConstraint};

    fn disk(r: f64) -> ConstraintSet<f64> {
        ConstraintSet::single(
            2,
            vec![ScalarConstraint::new("|x|^2 - r", field(move |x| x[0] * x[0] + x[1] * x[1] - r, |x| vec![2.0 * x[0], 2.0 * x[1]]))],
        )
    }

    #[test]
    fn unit_disk_lattice_count() {
        let g = sample(&disk(1.0), &BoxSet::new(vec![-2.0, -2.0], vec![2.0, 2.0]), 0.5, SampleMode::Interior);
        assert_eq!(g.len(), 13);
    }

    #[test]
    fn empty_set_gives_empty_grid() {
        let s = ConstraintSet::single(1, vec![ScalarConstraint::new("1", field(|_: &[f64]| 1.0, |_| vec![0.0]))]);
        assert!(sample(&s, &BoxSet::interval(-1.0, 1.0), 0.1, SampleMode::Interior).is_empty());
    }

    #[test]
    fn lattice_appends_upper_endpoint() {
        let l = lattice(&BoxSet::interval(0.0, 1.0), 0.3);
        assert_eq!(l.len(), 5);
        assert_eq!(l.last().unwrap()[0], 1.0);
        let l = lattice(&BoxSet::interval(0.0, 12.0), 0.05);
        assert_eq!(l.len(), 241);
        assert_eq!(l.last().unwrap()[0], 12.0);
    }

    #[test]
    fn boundary_points_are_projected() {
        let s = disk(1.0);
        let g = sample(&s, &BoxSet::new(vec![-2.0, -2.0], vec![2.0, 2.0]), 0.05, SampleMode::Boundary);
        assert!(g.len() > 50);
        for p in &g.points {
            assert!((p[0] * p[0] + p[1] * p[1] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn level_boundary_finds_circle_line_crossings() {
        let half = ConstraintSet::single(2, vec![c::le("x1 <= 0", 2, 0, 0.0)]);
        let level = disk(1.0).clauses[0].constraints[0].clone();
        let g = sample_level_boundary(&half, &level, &BoxSet::new(vec![-2.0, -2.0], vec![2.0, 2.0]), 0.1, 1e-12);
        let mut ys: Vec<f64> = g.points.iter().map(|p| p[1]).collect();
        ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(ys.len(), 2);
        assert!((ys[0] + 1.0).abs() < 1e-9 && (ys[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn segment_sampling_in_degenerate_box() {
        let s = ConstraintSet::single(2, c::eq("x1 = 0", 2, 0, 0.0).into_iter().chain([c::le("x2 <= -1", 2, 1, -1.0)]).collect());
        let g = sample(&s, &BoxSet::new(vec![0.0, -3.0], vec![0.0, 0.0]), 0.1, SampleMode::Interior);
        assert!(g.points.iter().all(|p| p[0] == 0.0 && p[1] <= -1.0 + 1e-9));
        assert_eq!(g.len(), 21);
    }
}
