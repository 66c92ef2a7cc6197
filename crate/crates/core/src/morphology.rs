//! Binary-mask algebra: thresholding, connected components, bounding boxes,
//! voxel-wise majority vote.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{BoundingBox, Volume, VolumeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Connectivity {
    /// Face neighbours only.
    Six,
    /// Faces, edges and corners.
    #[default]
    TwentySix,
}

impl TryFrom<u8> for Connectivity {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, String> {
        match v {
            6 => Ok(Connectivity::Six),
            26 => Ok(Connectivity::TwentySix),
            other => Err(format!("connectivity must be 6 or 26, got {other}")),
        }
    }
}

impl From<Connectivity> for u8 {
    fn from(c: Connectivity) -> u8 {
        match c {
            Connectivity::Six => 6,
            Connectivity::TwentySix => 26,
        }
    }
}

impl Connectivity {
    /// Neighbour offsets that precede a voxel in scan order.
    fn backward_offsets(self) -> &'static [[i64; 3]] {
        const SIX: [[i64; 3]; 3] = [[-1, 0, 0], [0, -1, 0], [0, 0, -1]];
        const TWENTY_SIX: [[i64; 3]; 13] = [
            [-1, -1, -1],
            [-1, -1, 0],
            [-1, -1, 1],
            [-1, 0, -1],
            [-1, 0, 0],
            [-1, 0, 1],
            [-1, 1, -1],
            [-1, 1, 0],
            [-1, 1, 1],
            [0, -1, -1],
            [0, -1, 0],
            [0, -1, 1],
            [0, 0, -1],
        ];
        match self {
            Connectivity::Six => &SIX,
            Connectivity::TwentySix => &TWENTY_SIX,
        }
    }
}

/// Component labeling of a mask. Label 0 is background; components are
/// numbered `1..=K` in the order their first voxel appears in scan order.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledComponents {
    pub labels: Volume,
    /// `sizes[k]` is the voxel count of label `k + 1`.
    pub sizes: Vec<usize>,
}

impl LabeledComponents {
    pub fn count(&self) -> usize {
        self.sizes.len()
    }
}

fn require_mask(v: &Volume) -> Result<()> {
    if v.kind() != VolumeKind::Mask {
        return Err(Error::invalid(format!("expected a mask volume, got {:?}", v.kind())));
    }
    Ok(())
}

/// `1` where `p >= alpha`.
pub fn threshold(p: &Volume, alpha: f32) -> Result<Volume> {
    if !(alpha >= 0.0) {
        return Err(Error::invalid(format!("threshold must be non-negative, got {alpha}")));
    }
    let data = p.data().iter().map(|&v| (v >= alpha) as u8 as f32).collect();
    Ok(Volume::from_parts(p.dims(), p.spacing(), VolumeKind::Mask, data))
}

/// `1` where `p > tau`.
pub fn threshold_strict(p: &Volume, tau: f32) -> Volume {
    let data = p.data().iter().map(|&v| (v > tau) as u8 as f32).collect();
    Volume::from_parts(p.dims(), p.spacing(), VolumeKind::Mask, data)
}

struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn with_capacity(n: usize) -> Self {
        DisjointSet {
            parent: Vec::with_capacity(n),
        }
    }

    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    /// The smaller root wins, so roots are always the earliest provisional id.
    fn union(&mut self, a: u32, b: u32) -> u32 {
        let (ra, rb) = (self.find(a), self.find(b));
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi as usize] = lo;
        lo
    }
}

/// Two-pass union-find labeling in a fixed raster order.
pub fn connected_components(mask: &Volume, connectivity: Connectivity) -> Result<LabeledComponents> {
    require_mask(mask)?;
    let [d0, d1, d2] = mask.dims();
    let data = mask.data();
    let offsets: Vec<([i64; 3], isize)> = connectivity
        .backward_offsets()
        .iter()
        .map(|o| (*o, ((o[0] * d1 as i64 + o[1]) * d2 as i64 + o[2]) as isize))
        .collect();

    const NONE: u32 = u32::MAX;
    let mut prov = vec![NONE; data.len()];
    let mut sets = DisjointSet::with_capacity(1024);

    for i in 0..d0 {
        for j in 0..d1 {
            let row = (i * d1 + j) * d2;
            for k in 0..d2 {
                let idx = row + k;
                if data[idx] == 0.0 {
                    continue;
                }
                let mut current = NONE;
                for (o, delta) in &offsets {
                    let (ni, nj, nk) = (i as i64 + o[0], j as i64 + o[1], k as i64 + o[2]);
                    if ni < 0 || nj < 0 || nk < 0 || nj >= d1 as i64 || nk >= d2 as i64 {
                        continue;
                    }
                    let n = prov[(idx as isize + delta) as usize];
                    if n == NONE {
                        continue;
                    }
                    current = if current == NONE { n } else { sets.union(current, n) };
                }
                prov[idx] = if current == NONE { sets.make() } else { current };
            }
        }
    }

    let mut final_of_root = vec![0u32; sets.parent.len()];
    let mut sizes = Vec::new();
    let mut labels = vec![0.0f32; data.len()];
    for (idx, &p) in prov.iter().enumerate() {
        if p == NONE {
            continue;
        }
        let root = sets.find(p) as usize;
        if final_of_root[root] == 0 {
            sizes.push(0);
            final_of_root[root] = sizes.len() as u32;
        }
        let l = final_of_root[root];
        sizes[l as usize - 1] += 1;
        labels[idx] = l as f32;
    }

    Ok(LabeledComponents {
        labels: Volume::from_parts(mask.dims(), mask.spacing(), VolumeKind::Label, labels),
        sizes,
    })
}

/// Label id (1-based) of the largest component; ties go to the smaller id.
pub fn largest_label(c: &LabeledComponents) -> Option<usize> {
    c.sizes
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, usize)>, (k, &s)| match best {
            Some((_, bs)) if bs >= s => best,
            _ => Some((k, s)),
        })
        .map(|(k, _)| k + 1)
}

pub fn largest_component(c: &LabeledComponents) -> Volume {
    let target = largest_label(c).map(|l| l as f32).unwrap_or(-1.0);
    let data = c
        .labels
        .data()
        .iter()
        .map(|&l| (l == target) as u8 as f32)
        .collect();
    Volume::from_parts(c.labels.dims(), c.labels.spacing(), VolumeKind::Mask, data)
}

/// Tightest box around the nonzero voxels.
pub fn bounding_box(mask: &Volume) -> Result<BoundingBox> {
    let dims = mask.dims();
    let mut min = dims;
    let mut max = [0usize; 3];
    let mut any = false;
    for (idx, &v) in mask.data().iter().enumerate() {
        if v != 0.0 {
            any = true;
            let c = mask.coords(idx);
            for a in 0..3 {
                min[a] = min[a].min(c[a]);
                max[a] = max[a].max(c[a] + 1);
            }
        }
    }
    if !any {
        return Err(Error::EmptyMask);
    }
    BoundingBox::new(min, max)
}

/// Largest component and its bounding box, or `None` for an empty mask.
pub fn largest_component_box(
    mask: &Volume,
    connectivity: Connectivity,
) -> Result<Option<(Volume, BoundingBox)>> {
    let comps = connected_components(mask, connectivity)?;
    if comps.count() == 0 {
        return Ok(None);
    }
    let largest = largest_component(&comps);
    let bbox = bounding_box(&largest)?;
    Ok(Some((largest, bbox)))
}

/// Voxel is set when strictly more than half of the masks set it.
pub fn majority_vote(masks: &[&Volume]) -> Result<Volume> {
    let first = masks
        .first()
        .ok_or_else(|| Error::invalid("majority vote needs at least one mask"))?;
    for m in masks {
        require_mask(m)?;
        if m.dims() != first.dims() {
            return Err(Error::DimMismatch {
                left: first.dims(),
                right: m.dims(),
            });
        }
    }
    let need = (masks.len() / 2 + 1) as u32;
    let mut votes = vec![0u32; first.len()];
    for m in masks {
        for (v, &x) in votes.iter_mut().zip(m.data()) {
            *v += (x != 0.0) as u32;
        }
    }
    let data = votes.into_iter().map(|v| (v >= need) as u8 as f32).collect();
    Ok(Volume::from_parts(first.dims(), first.spacing(), VolumeKind::Mask, data))
}

/// Pointwise union of supra-threshold masks.
pub fn union(masks: &[&Volume]) -> Result<Volume> {
    combine(masks, |a, b| a || b)
}

pub fn intersection(masks: &[&Volume]) -> Result<Volume> {
    combine(masks, |a, b| a && b)
}

fn combine(masks: &[&Volume], op: impl Fn(bool, bool) -> bool) -> Result<Volume> {
    let first = masks.first().ok_or_else(|| Error::invalid("no masks to combine"))?;
    let mut acc: Vec<bool> = first.data().iter().map(|&v| v != 0.0).collect();
    for m in &masks[1..] {
        if m.dims() != first.dims() {
            return Err(Error::DimMismatch {
                left: first.dims(),
                right: m.dims(),
            });
        }
        for (a, &x) in acc.iter_mut().zip(m.data()) {
            *a = op(*a, x != 0.0);
        }
    }
    let data = acc.into_iter().map(|b| b as u8 as f32).collect();
    Ok(Volume::from_parts(first.dims(), first.spacing(), VolumeKind::Mask, data))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask_with(dims: [usize; 3], on: &[[usize; 3]]) -> Volume {
        let mut m = Volume::zeros(dims, [1.0; 3], VolumeKind::Mask).unwrap();
        for p in on {
            m.set(p[0], p[1], p[2], 1.0);
        }
        m
    }

    #[test]
    fn threshold_is_inclusive() {
        let p = Volume::filled([2, 2, 2], [1.0; 3], VolumeKind::Probability, 0.19).unwrap();
        assert_eq!(threshold(&p, 0.2).unwrap().count_nonzero(), 0);
        let p = Volume::filled([2, 2, 2], [1.0; 3], VolumeKind::Probability, 0.2).unwrap();
        assert_eq!(threshold(&p, 0.2).unwrap().count_nonzero(), 8);
        let z = Volume::zeros([2, 2, 2], [1.0; 3], VolumeKind::Probability).unwrap();
        assert_eq!(threshold(&z, 0.0).unwrap().count_nonzero(), 8);
        assert!(threshold(&z, -0.1).is_err());
    }

    #[test]
    fn component_counts() {
        let empty = mask_with([3, 3, 3], &[]);
        assert_eq!(connected_components(&empty, Connectivity::Six).unwrap().count(), 0);

        let apart = mask_with([3, 3, 3], &[[0, 0, 0], [0, 0, 2]]);
        for c in [Connectivity::Six, Connectivity::TwentySix] {
            assert_eq!(connected_components(&apart, c).unwrap().count(), 2);
        }

        let diag = mask_with([3, 3, 3], &[[0, 0, 0], [1, 1, 1]]);
        assert_eq!(connected_components(&diag, Connectivity::TwentySix).unwrap().count(), 1);
        assert_eq!(connected_components(&diag, Connectivity::Six).unwrap().count(), 2);
    }

    #[test]
    fn labels_follow_scan_order() {
        // A U-shape whose arms meet late in the scan must get one label, and
        // the isolated voxel that appears between them gets label 2.
        let m = mask_with(
            [1, 4, 5],
            &[[0, 0, 0], [0, 0, 4], [0, 1, 2], [0, 2, 0], [0, 2, 4], [0, 3, 0], [0, 3, 1], [0, 3, 2], [0, 3, 3], [0, 3, 4], [0, 1, 0], [0, 1, 4]],
        );
        let c = connected_components(&m, Connectivity::Six).unwrap();
        assert_eq!(c.count(), 2);
        assert_eq!(c.labels.get(0, 0, 0), 1.0);
        assert_eq!(c.labels.get(0, 0, 4), 1.0);
        assert_eq!(c.labels.get(0, 1, 2), 2.0);
        assert_eq!(c.sizes, vec![11, 1]);
    }

    #[test]
    fn largest_selection_and_ties() {
        let lc = |sizes: Vec<usize>| LabeledComponents {
            labels: Volume::zeros([1, 1, 1], [1.0; 3], VolumeKind::Label).unwrap(),
            sizes,
        };
        assert_eq!(largest_label(&lc(vec![5, 9, 2])), Some(2));
        assert_eq!(largest_label(&lc(vec![4, 4])), Some(1));
        assert_eq!(largest_label(&lc(vec![])), None);

        let m = mask_with([1, 1, 7], &[[0, 0, 0], [0, 0, 1], [0, 0, 4], [0, 0, 5]]);
        let c = connected_components(&m, Connectivity::Six).unwrap();
        let big = largest_component(&c);
        assert_eq!(big.data(), &[1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);

        let empty = connected_components(&mask_with([2, 2, 2], &[]), Connectivity::Six).unwrap();
        assert_eq!(largest_component(&empty).count_nonzero(), 0);
    }

    #[test]
    fn bounding_boxes() {
        let one = mask_with([8, 8, 8], &[[3, 4, 5]]);
        assert_eq!(bounding_box(&one).unwrap(), BoundingBox::new([3, 4, 5], [4, 5, 6]).unwrap());
        let full = Volume::filled([8; 3], [1.0; 3], VolumeKind::Mask, 1.0).unwrap();
        assert_eq!(bounding_box(&full).unwrap(), BoundingBox::full([8; 3]));
        let two = mask_with([8, 8, 8], &[[1, 1, 1], [5, 2, 2]]);
        assert_eq!(bounding_box(&two).unwrap(), BoundingBox::new([1, 1, 1], [6, 3, 3]).unwrap());
        assert!(matches!(bounding_box(&mask_with([2, 2, 2], &[])), Err(Error::EmptyMask)));
    }

    #[test]
    fn majority_rules() {
        let a = mask_with([1, 1, 3], &[[0, 0, 0], [0, 0, 1]]);
        let b = mask_with([1, 1, 3], &[[0, 0, 0]]);
        let c = mask_with([1, 1, 3], &[[0, 0, 1], [0, 0, 2]]);
        let v = majority_vote(&[&a, &b, &c]).unwrap();
        assert_eq!(v.data(), &[1.0, 1.0, 0.0]);
        assert_eq!(majority_vote(&[&a, &a, &a]).unwrap(), a);
        assert_eq!(majority_vote(&[&c]).unwrap(), c);
        // even N needs more than half
        assert_eq!(majority_vote(&[&a, &b]).unwrap().data(), &[1.0, 0.0, 0.0]);

        let other = mask_with([1, 1, 4], &[]);
        assert!(matches!(majority_vote(&[&a, &other]), Err(Error::DimMismatch { .. })));
        assert!(majority_vote(&[]).is_err());
    }
}
