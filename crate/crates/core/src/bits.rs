//! Index-based directed graphs backed by word bitsets.
//!
//! This is the engine underneath unrolled time windows and the candidate
//! oracle: every reachability query, acyclicity test and d-separation test
//! runs on `u64` words so that millions of candidate graphs can be checked
//! on a single core.

pub(crate) fn words_for(n: usize) -> usize {
    n.div_ceil(64).max(1)
}

#[inline]
pub(crate) fn get(bits: &[u64], i: usize) -> bool {
    bits[i >> 6] >> (i & 63) & 1 == 1
}

#[inline]
pub(crate) fn set(bits: &mut [u64], i: usize) {
    bits[i >> 6] |= 1 << (i & 63);
}

#[inline]
pub(crate) fn clear(bits: &mut [u64], i: usize) {
    bits[i >> 6] &= !(1 << (i & 63));
}

/// Iterates set bit positions in increasing order.
pub(crate) fn ones(bits: &[u64]) -> impl Iterator<Item = usize> + '_ {
    bits.iter().enumerate().flat_map(|(wi, &w)| {
        let mut word = w;
        std::iter::from_fn(move || {
            if word == 0 {
                None
            } else {
                let tz = word.trailing_zeros() as usize;
                word &= word - 1;
                Some(wi * 64 + tz)
            }
        })
    })
}

/// A simple directed graph on `0..n` with parent and child bit rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct BitDag {
    n: usize,
    words: usize,
    parents: Vec<u64>,
    children: Vec<u64>,
}

impl BitDag {
    pub fn new(n: usize) -> Self {
        let words = words_for(n);
        BitDag {
            n,
            words,
            parents: vec![0; n * words],
            children: vec![0; n * words],
        }
    }

    /// Clears all edges, keeping the vertex count.
    pub fn reset(&mut self, n: usize) {
        let words = words_for(n);
        self.n = n;
        self.words = words;
        self.parents.clear();
        self.parents.resize(n * words, 0);
        self.children.clear();
        self.children.resize(n * words, 0);
    }

    pub fn empty_set(&self) -> Vec<u64> {
        vec![0; self.words]
    }

    #[inline]
    pub fn add_edge(&mut self, from: usize, to: usize) {
        let w = self.words;
        set(&mut self.children[from * w..(from + 1) * w], to);
        set(&mut self.parents[to * w..(to + 1) * w], from);
    }

    #[inline]
    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        get(self.children(from), to)
    }

    #[inline]
    pub fn parents(&self, v: usize) -> &[u64] {
        &self.parents[v * self.words..(v + 1) * self.words]
    }

    #[inline]
    pub fn children(&self, v: usize) -> &[u64] {
        &self.children[v * self.words..(v + 1) * self.words]
    }

    /// Closure of `seed` under parents (`up = true`) or children.
    /// The seed itself is part of the result.
    pub fn closure(&self, seed: &[u64], up: bool, out: &mut Vec<u64>) {
        out.clear();
        out.extend_from_slice(seed);
        let mut stack: Vec<usize> = ones(seed).collect();
        while let Some(v) = stack.pop() {
            let next = if up { self.parents(v) } else { self.children(v) };
            for (wi, &word) in next.iter().enumerate() {
                let fresh = word & !out[wi];
                if fresh != 0 {
                    out[wi] |= fresh;
                    let mut f = fresh;
                    while f != 0 {
                        stack.push(wi * 64 + f.trailing_zeros() as usize);
                        f &= f - 1;
                    }
                }
            }
        }
    }

    pub fn descendants(&self, v: usize) -> Vec<u64> {
        let mut seed = self.empty_set();
        set(&mut seed, v);
        let mut out = Vec::new();
        self.closure(&seed, false, &mut out);
        out
    }

    pub fn ancestors(&self, v: usize) -> Vec<u64> {
        let mut seed = self.empty_set();
        set(&mut seed, v);
        let mut out = Vec::new();
        self.closure(&seed, true, &mut out);
        out
    }

    /// Kahn's algorithm on the bit rows.
    pub fn is_acyclic(&self) -> bool {
        let mut indeg: Vec<u32> = (0..self.n)
            .map(|v| self.parents(v).iter().map(|w| w.count_ones()).sum())
            .collect();
        let mut stack: Vec<usize> = (0..self.n).filter(|&v| indeg[v] == 0).collect();
        let mut seen = 0;
        while let Some(v) = stack.pop() {
            seen += 1;
            for c in ones(self.children(v)) {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    stack.push(c);
                }
            }
        }
        seen == self.n
    }

    /// Reachability ("Bayes-ball") test for an active trail from `x` to `y`
    /// given `z`.
    ///
    /// With `cut_out_of_x` set, every edge leaving `x` is ignored, so the
    /// test answers whether some path entering `x` through an arrowhead is
    /// active, i.e. whether `z` fails to block a backdoor path.
    pub fn d_connected(&self, x: usize, y: usize, z: &[u64], cut_out_of_x: bool) -> bool {
        let anc_z = if cut_out_of_x {
            self.ancestors_avoiding_out_edges(z, x)
        } else {
            let mut out = Vec::with_capacity(self.words);
            self.closure(z, true, &mut out);
            out
        };
        let mut up_seen = self.empty_set();
        let mut down_seen = self.empty_set();
        // (vertex, arrived_from_child)
        let mut stack: Vec<(usize, bool)> = vec![(x, true)];
        while let Some((v, up)) = stack.pop() {
            let seen = if up { &mut up_seen } else { &mut down_seen };
            if get(seen, v) {
                continue;
            }
            set(seen, v);
            let in_z = get(z, v);
            if v == y && !in_z {
                return true;
            }
            let cut = cut_out_of_x && v == x;
            if up {
                if !in_z {
                    for p in ones(self.parents(v)) {
                        if !(cut_out_of_x && p == x) {
                            stack.push((p, true));
                        }
                    }
                    if !cut {
                        for c in ones(self.children(v)) {
                            stack.push((c, false));
                        }
                    }
                }
            } else {
                if !in_z && !cut {
                    for c in ones(self.children(v)) {
                        stack.push((c, false));
                    }
                }
                if get(&anc_z, v) {
                    for p in ones(self.parents(v)) {
                        if !(cut_out_of_x && p == x) {
                            stack.push((p, true));
                        }
                    }
                }
            }
        }
        false
    }

    fn ancestors_avoiding_out_edges(&self, z: &[u64], x: usize) -> Vec<u64> {
        let mut out = z.to_vec();
        let mut stack: Vec<usize> = ones(z).collect();
        while let Some(v) = stack.pop() {
            for p in ones(self.parents(v)) {
                if p == x {
                    continue;
                }
                if !get(&out, p) {
                    set(&mut out, p);
                    stack.push(p);
                }
            }
        }
        out
    }
}
