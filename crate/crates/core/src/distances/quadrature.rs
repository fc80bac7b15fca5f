//! Adaptive Gauss–Kronrod (7/15 point) quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Subdivision budget of [`integrate`].
pub const MAX_PIECES: usize = 4000;

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for k in 0..7 {
        let dx = half * XGK[k];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[k] * pair;
        if k % 2 == 1 {
            gauss += WG[k / 2] * pair;
        }
    }
    (kronrod * half, gauss * half)
}

/// Integrates `f` over `[a, b]`, starting from `panels` equal pieces and
/// repeatedly bisecting the piece with the largest Gauss/Kronrod
/// discrepancy until the summed discrepancy falls below `rel_tol` times the
/// integral estimate, or [`MAX_PIECES`] pieces exist. The budget bounds the
/// work when roundoff keeps the tolerance out of reach.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, rel_tol: f64) -> f64 {
    let panels = panels.max(1);
    let width = (b - a) / panels as f64;
    let mut pieces: Vec<Piece> = (0..panels)
        .map(|i| {
            let lo = a + width * i as f64;
            let hi = if i + 1 == panels { b } else { lo + width };
            Piece::new(&f, lo, hi)
        })
        .collect();
    let mut heap: BinaryHeap<(ByError, usize)> = pieces.iter().enumerate().map(|(i, p)| (ByError(p.err), i)).collect();
    let mut value: f64 = pieces.iter().map(|p| p.value).sum();
    let mut err: f64 = pieces.iter().map(|p| p.err).sum();
    while pieces.len() < MAX_PIECES.max(panels) && err > rel_tol * value.abs() {
        let Some((_, worst)) = heap.pop() else { break };
        let Piece { lo, hi, .. } = pieces[worst];
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // interval can no longer be split in floating point
            continue;
        }
        let (left, right) = (Piece::new(&f, lo, mid), Piece::new(&f, mid, hi));
        value += left.value + right.value - pieces[worst].value;
        err += left.err + right.err - pieces[worst].err;
        pieces[worst] = left;
        heap.push((ByError(left.err), worst));
        heap.push((ByError(right.err), pieces.len()));
        pieces.push(right);
    }
    // sum in interval order so the result does not depend on the heap
    pieces.sort_by(|x, y| x.lo.total_cmp(&y.lo));
    pieces.iter().map(|p| p.value).sum()
}

#[derive(Clone, Copy)]
struct Piece {
    lo: f64,
    hi: f64,
    value: f64,
    err: f64,
}

impl Piece {
    fn new(f: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> Self {
        let (k, g) = gk15(f, lo, hi);
        Piece {
            lo,
            hi,
            value: k,
            err: (k - g).abs(),
        }
    }
}

#[derive(PartialEq)]
struct ByError(f64);

impl Eq for ByError {}

impl PartialOrd for ByError {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ByError {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}
