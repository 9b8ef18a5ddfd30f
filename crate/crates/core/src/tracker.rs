//! Incremental site and bond visit counts for walks that start near the
//! origin.

use std::collections::HashMap;

use crate::path::{Locality, Site, MAX_DIM};

/// Dense storage is used while the box of radius `R` has at most this many
/// slots.
const DENSE_LIMIT: u64 = 1 << 22;

#[derive(Clone, Debug)]
enum Store {
    Dense(Vec<u16>),
    Sparse(HashMap<u64, u16>),
}

impl Store {
    fn new(slots: u64) -> Store {
        if slots <= DENSE_LIMIT {
            Store::Dense(vec![0; slots as usize])
        } else {
            Store::Sparse(HashMap::new())
        }
    }

    #[inline]
    fn get(&self, k: u64) -> u16 {
        match self {
            Store::Dense(v) => v[k as usize],
            Store::Sparse(m) => m.get(&k).copied().unwrap_or(0),
        }
    }

    /// Increment and return the count before the increment.
    #[inline]
    fn inc(&mut self, k: u64) -> u16 {
        match self {
            Store::Dense(v) => {
                let old = v[k as usize];
                v[k as usize] = old + 1;
                old
            }
            Store::Sparse(m) => {
                let e = m.entry(k).or_insert(0);
                *e += 1;
                *e - 1
            }
        }
    }

    /// Decrement and return the count after the decrement.
    #[inline]
    fn dec(&mut self, k: u64) -> u16 {
        match self {
            Store::Dense(v) => {
                v[k as usize] -= 1;
                v[k as usize]
            }
            Store::Sparse(m) => {
                let e = m.get_mut(&k).expect("decrement of an absent key");
                *e -= 1;
                let now = *e;
                if now == 0 {
                    m.remove(&k);
                }
                now
            }
        }
    }
}

/// Visit counts keyed by site and, for bond potentials, by bond.
///
/// Every site handled must satisfy `|x_i| <= radius`.
#[derive(Clone, Debug)]
pub struct LocalTimeTracker {
    dim: usize,
    radius: i32,
    side: u64,
    kind: Locality,
    sites: Store,
    bonds: Option<Store>,
}

impl LocalTimeTracker {
    pub fn new(dim: usize, radius: usize, kind: Locality) -> Self {
        let side = 2 * radius as u64 + 1;
        let cells = side.saturating_pow(dim as u32);
        let slots = match kind {
            Locality::Site => 0,
            Locality::OrientedBond => 2 * dim as u64,
            Locality::UnorientedBond => dim as u64,
        };
        LocalTimeTracker {
            dim,
            radius: radius as i32,
            side,
            kind,
            sites: Store::new(cells),
            bonds: (slots > 0).then(|| Store::new(cells.saturating_mul(slots))),
        }
    }

    pub fn kind(&self) -> Locality {
        self.kind
    }

    #[inline]
    fn index(&self, s: Site) -> u64 {
        let mut idx = 0u64;
        for i in (0..self.dim).rev() {
            debug_assert!(s.0[i].abs() <= self.radius, "site outside tracker box");
            idx = idx * self.side + (s.0[i] + self.radius) as u64;
        }
        idx
    }

    #[inline]
    fn bond_index(&self, from: Site, to: Site) -> u64 {
        let step = (to - from).step_index().expect("bond between neighbours");
        match self.kind {
            Locality::OrientedBond => self.index(from) * 2 * self.dim as u64 + step as u64,
            _ => {
                let base = if step % 2 == 0 { from } else { to };
                self.index(base) * self.dim as u64 + (step / 2) as u64
            }
        }
    }

    #[inline]
    pub fn site_count(&self, s: Site) -> u16 {
        self.sites.get(self.index(s))
    }

    /// Record a visit; returns the count before it.
    #[inline]
    pub fn visit(&mut self, s: Site) -> u16 {
        let k = self.index(s);
        self.sites.inc(k)
    }

    #[inline]
    pub fn unvisit(&mut self, s: Site) -> u16 {
        let k = self.index(s);
        self.sites.dec(k)
    }

    #[inline]
    pub fn bond_count(&self, from: Site, to: Site) -> u16 {
        match &self.bonds {
            Some(b) => b.get(self.bond_index(from, to)),
            None => 0,
        }
    }

    /// Record a traversal; returns the count before it. A no-op returning 0
    /// for site trackers.
    #[inline]
    pub fn traverse(&mut self, from: Site, to: Site) -> u16 {
        let k = self.bond_index(from, to);
        match &mut self.bonds {
            Some(b) => b.inc(k),
            None => 0,
        }
    }

    #[inline]
    pub fn untraverse(&mut self, from: Site, to: Site) -> u16 {
        let k = self.bond_index(from, to);
        match &mut self.bonds {
            Some(b) => b.dec(k),
            None => 0,
        }
    }

    /// Largest supported radius for a given dimension before the sparse
    /// fallback kicks in; informational.
    pub fn dense_radius(dim: usize) -> usize {
        let mut r = 0usize;
        while ((2 * r as u64 + 3).pow(dim.min(MAX_DIM) as u32)) <= DENSE_LIMIT {
            r += 1;
        }
        r
    }
}
