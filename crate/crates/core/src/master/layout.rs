//! Column layout of the dispatch model.
//!
//! Columns are grouped by kind, then period, then element:
//! `index = base[kind] + t * count[kind] + element`. Auxiliary columns added
//! later (piecewise-linear fill variables, pressures) come after all of these,
//! so any row written against this layout stays valid when the model is
//! rebuilt for the same case.

use serde::Serialize;

use crate::netmodel::DispatchCase;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum VarKind {
    /// Coal unit output.
    Pf,
    /// Gas unit output.
    Pg,
    /// Wind output.
    Pw,
    /// P2G electricity intake.
    Pp,
    /// Coal cost epigraph.
    Ff,
    /// Gas unit fuel use.
    Gg,
    /// Pipeline flow.
    Gpipe,
    /// Compressor throughput.
    Gm,
    /// Compressor fuel use.
    Gc,
    /// Well output.
    Gs,
    /// Storage exchange, injection positive.
    Gr,
    /// Storage level.
    S,
    /// P2G gas output.
    Gp,
    /// Curtailment cost.
    Fw,
}

impl VarKind {
    pub const ALL: [VarKind; 14] = [
        VarKind::Pf,
        VarKind::Pg,
        VarKind::Pw,
        VarKind::Pp,
        VarKind::Ff,
        VarKind::Gg,
        VarKind::Gpipe,
        VarKind::Gm,
        VarKind::Gc,
        VarKind::Gs,
        VarKind::Gr,
        VarKind::S,
        VarKind::Gp,
        VarKind::Fw,
    ];
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    pub n_periods: usize,
    counts: [usize; 14],
    base: [usize; 14],
    total: usize,
}

impl Layout {
    pub fn new(case: &DispatchCase) -> Self {
        let (p, g) = (&case.power, &case.gas);
        let counts = [
            p.coal_units.len(),
            p.gas_units.len(),
            p.wind.len(),
            p.p2g.len(),
            p.coal_units.len(),
            p.gas_units.len(),
            g.pipelines.len(),
            g.compressors.len(),
            g.compressors.len(),
            g.wells.len(),
            g.storages.len(),
            g.storages.len(),
            p.p2g.len(),
            p.wind.len(),
        ];
        let nt = case.n_periods();
        let mut base = [0; 14];
        let mut next = 0;
        for k in 0..14 {
            base[k] = next;
            next += counts[k] * nt;
        }
        Self {
            n_periods: nt,
            counts,
            base,
            total: next,
        }
    }

    /// Number of columns covered by the layout.
    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn count(&self, kind: VarKind) -> usize {
        self.counts[kind as usize]
    }

    pub fn index(&self, kind: VarKind, t: usize, elem: usize) -> usize {
        let k = kind as usize;
        debug_assert!(t < self.n_periods && elem < self.counts[k]);
        self.base[k] + t * self.counts[k] + elem
    }

    /// Inverse of [`Layout::index`].
    pub fn decode(&self, j: usize) -> Option<(VarKind, usize, usize)> {
        if j >= self.total {
            return None;
        }
        let k = (0..14)
            .rev()
            .find(|&k| self.base[k] <= j && self.counts[k] > 0)?;
        let off = j - self.base[k];
        Some((VarKind::ALL[k], off / self.counts[k], off % self.counts[k]))
    }

    /// Values of one kind for period `t`.
    pub fn slice<'a>(&self, x: &'a [f64], kind: VarKind, t: usize) -> &'a [f64] {
        let start = self.index_unchecked(kind, t);
        &x[start..start + self.count(kind)]
    }

    fn index_unchecked(&self, kind: VarKind, t: usize) -> usize {
        let k = kind as usize;
        self.base[k] + t * self.counts[k]
    }
}
