use crate::data::ItemSet;

/// Jaccard distance from intersection and union sizes; 0 for two empty sets.
#[inline]
pub(crate) fn jaccard_from_counts(common: usize, union: usize) -> f64 {
    if union == 0 {
        0.0
    } else {
        1.0 - common as f64 / union as f64
    }
}

pub fn set_jaccard(a: &ItemSet, b: &ItemSet) -> f64 {
    let (common, union) = a.overlap(b);
    jaccard_from_counts(common, union)
}

/// Levenshtein-style distance between sequences of lengths `n` and `m` with
/// unit insertion and deletion costs and `subst(i, j)` for replacing the
/// i-th element of the first sequence by the j-th element of the second.
pub fn edit_distance_by(n: usize, m: usize, mut subst: impl FnMut(usize, usize) -> f64) -> f64 {
    let mut prev: Vec<f64> = (0..=m).map(|j| j as f64).collect();
    let mut curr = vec![0.0; m + 1];
    for i in 1..=n {
        curr[0] = i as f64;
        for j in 1..=m {
            let replace = prev[j - 1] + subst(i - 1, j - 1);
            let delete = prev[j] + 1.0;
            let insert = curr[j - 1] + 1.0;
            curr[j] = replace.min(delete).min(insert);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[m]
}

/// Edit distance between sequences of sets with Jaccard relabel cost.
pub fn seqset_edit_distance(s: &[ItemSet], t: &[ItemSet]) -> f64 {
    edit_distance_by(s.len(), t.len(), |i, j| set_jaccard(&s[i], &t[j]))
}
