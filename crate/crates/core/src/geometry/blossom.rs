//! Maximum-weight matching in general graphs (Edmonds' blossom method,
//! primal-dual formulation following Galil's survey).
//!
//! Weights are exact integers; vertex duals are stored pre-multiplied by
//! two so every quantity stays integral, which makes the optimality
//! certificate exact. The solver is deterministic: the same input always
//! yields the same matching. Arithmetic runs in i64 when the weights allow
//! and falls back to i128 otherwise.

use alloc::vec;
use alloc::vec::Vec;

const SENTINEL: usize = usize::MAX;

const LABEL_FREE: u8 = 0;
const LABEL_S: u8 = 1;
const LABEL_T: u8 = 2;
const LABEL_CRUMB: u8 = 5; // S plus a breadcrumb bit used while tracing

/// Integer weight arithmetic used by the solver.
trait Weight:
    Copy
    + Ord
    + core::ops::Add<Output = Self>
    + core::ops::Sub<Output = Self>
    + core::fmt::Debug
{
    const ZERO: Self;
    fn twice(self) -> Self;
    fn half_nonneg(self) -> Self;
    fn from_i128(v: i128) -> Self;
}

impl Weight for i64 {
    const ZERO: i64 = 0;
    #[inline]
    fn twice(self) -> i64 {
        self << 1
    }
    #[inline]
    fn half_nonneg(self) -> i64 {
        debug_assert!(self >= 0);
        self >> 1
    }
    #[inline]
    fn from_i128(v: i128) -> i64 {
        v as i64
    }
}

impl Weight for i128 {
    const ZERO: i128 = 0;
    #[inline]
    fn twice(self) -> i128 {
        self << 1
    }
    #[inline]
    fn half_nonneg(self) -> i128 {
        debug_assert!(self >= 0);
        self >> 1
    }
    #[inline]
    fn from_i128(v: i128) -> i128 {
        v
    }
}

/// Computes a maximum-weight matching of `edges` on vertices `0..n`.
/// With `maxcardinality` set, only maximum-cardinality matchings are
/// considered. Returns the partner of each vertex.
pub(super) fn max_weight_matching(
    n: usize,
    edges: &[(u32, u32, i128)],
    maxcardinality: bool,
) -> Vec<Option<usize>> {
    if n == 0 || edges.is_empty() {
        return vec![None; n];
    }
    // duals and slacks stay within ~4x the largest magnitude, so i64 is
    // safe with plenty of headroom below 2^58
    let max_abs = edges.iter().map(|e| e.2.unsigned_abs()).max().unwrap_or(0);
    if max_abs <= (1u128 << 58) {
        Solver::<i64>::run(n, edges, maxcardinality)
    } else {
        Solver::<i128>::run(n, edges, maxcardinality)
    }
}

struct Solver<W: Weight> {
    nvertex: usize,
    nedge: usize,
    maxcardinality: bool,
    // edge endpoints: endpoint 2k and 2k+1 belong to edge k
    endpoint_vertex: Vec<u32>,
    weight_doubled: Vec<W>,
    // CSR adjacency: remote endpoints of the edges incident to each vertex
    neigh: Vec<u32>,
    neigh_offset: Vec<u32>,
    // mate[v]: remote endpoint of v's matched edge, or SENTINEL
    mate: Vec<usize>,
    // label/labelend for vertices and blossoms (indices 0..2n)
    label: Vec<u8>,
    labelend: Vec<usize>,
    // inblossom[v]: top-level blossom containing v
    inblossom: Vec<usize>,
    blossomparent: Vec<usize>,
    blossomchilds: Vec<Vec<usize>>,
    blossombase: Vec<usize>,
    blossomendps: Vec<Vec<usize>>,
    // least-slack edge bookkeeping for the delta2/delta3 updates
    bestedge: Vec<usize>,
    blossombestedges: Vec<Option<Vec<usize>>>,
    unusedblossoms: Vec<usize>,
    // dualvar[v] = 2*u(v) for vertices, z(b) for blossoms
    dualvar: Vec<W>,
    allowedge: Vec<bool>,
    queue: Vec<usize>,
}

impl<W: Weight> Solver<W> {
    fn run(n: usize, edges: &[(u32, u32, i128)], maxcardinality: bool) -> Vec<Option<usize>> {
        let mut solver = Solver::<W>::new(n, edges, maxcardinality);
        solver.solve();
        #[cfg(debug_assertions)]
        solver.verify_optimum();
        solver
            .mate
            .iter()
            .map(|&p| {
                if p == SENTINEL {
                    None
                } else {
                    Some(solver.endpoint(p))
                }
            })
            .collect()
    }

    fn new(n: usize, edges: &[(u32, u32, i128)], maxcardinality: bool) -> Self {
        let m = edges.len();
        let mut endpoint_vertex = Vec::with_capacity(2 * m);
        let mut weight_doubled = Vec::with_capacity(m);
        let mut maxweight = W::ZERO;
        let mut degree = vec![0u32; n];
        for &(i, j, w) in edges {
            debug_assert!(i != j && (i as usize) < n && (j as usize) < n);
            endpoint_vertex.push(i);
            endpoint_vertex.push(j);
            let w = W::from_i128(w);
            maxweight = maxweight.max(w);
            weight_doubled.push(w.twice());
            degree[i as usize] += 1;
            degree[j as usize] += 1;
        }
        let mut neigh_offset = Vec::with_capacity(n + 1);
        neigh_offset.push(0u32);
        for v in 0..n {
            neigh_offset.push(neigh_offset[v] + degree[v]);
        }
        let mut cursor: Vec<u32> = neigh_offset[..n].to_vec();
        let mut neigh = vec![0u32; 2 * m];
        for (k, &(i, j, _)) in edges.iter().enumerate() {
            // store the remote endpoint, as in the classic formulation
            neigh[cursor[i as usize] as usize] = (2 * k + 1) as u32;
            cursor[i as usize] += 1;
            neigh[cursor[j as usize] as usize] = (2 * k) as u32;
            cursor[j as usize] += 1;
        }
        let mut dualvar = vec![maxweight; n];
        dualvar.extend(vec![W::ZERO; n]);
        let mut blossombase: Vec<usize> = (0..n).collect();
        blossombase.extend(vec![SENTINEL; n]);
        Solver {
            nvertex: n,
            nedge: m,
            maxcardinality,
            endpoint_vertex,
            weight_doubled,
            neigh,
            neigh_offset,
            mate: vec![SENTINEL; n],
            label: vec![LABEL_FREE; 2 * n],
            labelend: vec![SENTINEL; 2 * n],
            inblossom: (0..n).collect(),
            blossomparent: vec![SENTINEL; 2 * n],
            blossomchilds: vec![Vec::new(); 2 * n],
            blossombase,
            blossomendps: vec![Vec::new(); 2 * n],
            bestedge: vec![SENTINEL; 2 * n],
            blossombestedges: vec![None; 2 * n],
            unusedblossoms: (n..2 * n).collect(),
            dualvar,
            allowedge: vec![false; m],
            queue: Vec::new(),
        }
    }

    #[inline]
    fn endpoint(&self, p: usize) -> usize {
        self.endpoint_vertex[p] as usize
    }

    /// 2 * slack of edge k (not meaningful for edges inside a blossom).
    #[inline]
    fn slack(&self, k: usize) -> W {
        let i = self.endpoint_vertex[2 * k] as usize;
        let j = self.endpoint_vertex[2 * k + 1] as usize;
        self.dualvar[i] + self.dualvar[j] - self.weight_doubled[k]
    }

    fn neighbors(&self, v: usize) -> core::ops::Range<usize> {
        self.neigh_offset[v] as usize..self.neigh_offset[v + 1] as usize
    }

    fn blossom_leaves(&self, b: usize, out: &mut Vec<usize>) {
        if b < self.nvertex {
            out.push(b);
        } else {
            for &t in &self.blossomchilds[b] {
                self.blossom_leaves(t, out);
            }
        }
    }

    /// Labels the top-level blossom of `w` with `t`, reached via remote
    /// endpoint `p`; labeling a blossom T immediately labels its mate S.
    fn assign_label(&mut self, w: usize, t: u8, p: usize) {
        let b = self.inblossom[w];
        debug_assert!(self.label[w] == LABEL_FREE && self.label[b] == LABEL_FREE);
        self.label[w] = t;
        self.label[b] = t;
        self.labelend[w] = p;
        self.labelend[b] = p;
        self.bestedge[w] = SENTINEL;
        self.bestedge[b] = SENTINEL;
        if t == LABEL_S {
            let start = self.queue.len();
            let mut leaves = Vec::new();
            self.blossom_leaves(b, &mut leaves);
            self.queue.extend(leaves);
            let _ = start;
        } else if t == LABEL_T {
            let base = self.blossombase[b];
            debug_assert!(self.mate[base] != SENTINEL);
            let mbase = self.mate[base];
            let v = self.endpoint(mbase);
            self.assign_label(v, LABEL_S, mbase ^ 1);
        }
    }

    /// Traces back from `v` and `w`; returns the base of a new blossom, or
    /// SENTINEL if the paths reach two distinct roots (an augmenting path).
    fn scan_blossom(&mut self, v: usize, w: usize) -> usize {
        let mut path = Vec::new();
        let mut base = SENTINEL;
        let mut v = v;
        let mut w = w;
        while v != SENTINEL || w != SENTINEL {
            // the swap at the bottom guarantees v is valid here
            let mut b = self.inblossom[v];
            if self.label[b] & 4 != 0 {
                base = self.blossombase[b];
                break;
            }
            debug_assert_eq!(self.label[b], LABEL_S);
            path.push(b);
            self.label[b] = LABEL_CRUMB;
            debug_assert_eq!(self.labelend[b], self.mate[self.blossombase[b]]);
            if self.labelend[b] == SENTINEL {
                // base of b is single; this path ends here
                v = SENTINEL;
            } else {
                v = self.endpoint(self.labelend[b]);
                b = self.inblossom[v];
                debug_assert_eq!(self.label[b], LABEL_T);
                debug_assert!(self.labelend[b] != SENTINEL);
                v = self.endpoint(self.labelend[b]);
            }
            if w != SENTINEL {
                core::mem::swap(&mut v, &mut w);
            }
        }
        for b in path {
            self.label[b] = LABEL_S;
        }
        base
    }

    /// Makes a new S-blossom with the given base, closed by edge `k`
    /// between two S-blossoms.
    fn add_blossom(&mut self, base: usize, k: usize) {
        let mut v = self.endpoint_vertex[2 * k] as usize;
        let mut w = self.endpoint_vertex[2 * k + 1] as usize;
        let bb = self.inblossom[base];
        let mut bv = self.inblossom[v];
        let mut bw = self.inblossom[w];

        let b = self.unusedblossoms.pop().expect("blossom ids cannot run out");
        self.blossombase[b] = base;
        self.blossomparent[b] = SENTINEL;
        self.blossomparent[bb] = b;

        let mut path = Vec::new();
        let mut endps = Vec::new();
        while bv != bb {
            self.blossomparent[bv] = b;
            path.push(bv);
            endps.push(self.labelend[bv]);
            debug_assert!(self.labelend[bv] != SENTINEL);
            v = self.endpoint(self.labelend[bv]);
            bv = self.inblossom[v];
        }
        path.push(bb);
        path.reverse();
        endps.reverse();
        endps.push(2 * k);
        while bw != bb {
            self.blossomparent[bw] = b;
            path.push(bw);
            endps.push(self.labelend[bw] ^ 1);
            debug_assert!(self.labelend[bw] != SENTINEL);
            w = self.endpoint(self.labelend[bw]);
            bw = self.inblossom[w];
        }

        debug_assert_eq!(self.label[bb], LABEL_S);
        self.label[b] = LABEL_S;
        self.labelend[b] = self.labelend[bb];
        self.dualvar[b] = W::ZERO;
        self.blossomchilds[b] = path;
        self.blossomendps[b] = endps;

        let mut leaves = Vec::new();
        self.blossom_leaves(b, &mut leaves);
        for &lv in &leaves {
            if self.label[self.inblossom[lv]] == LABEL_T {
                // former T-vertex is now inside an S-blossom
                self.queue.push(lv);
            }
            self.inblossom[lv] = b;
        }

        // merge least-slack edge lists of the children
        let mut bestedgeto = vec![SENTINEL; 2 * self.nvertex];
        for ci in 0..self.blossomchilds[b].len() {
            let bv = self.blossomchilds[b][ci];
            match self.blossombestedges[bv].take() {
                Some(list) => self.score_best_edges(b, &list, &mut bestedgeto),
                None => {
                    let mut lv = Vec::new();
                    self.blossom_leaves(bv, &mut lv);
                    for &x in &lv {
                        let ks: Vec<usize> =
                            self.neighbors(x).map(|i| (self.neigh[i] / 2) as usize).collect();
                        self.score_best_edges(b, &ks, &mut bestedgeto);
                    }
                }
            }
            self.bestedge[bv] = SENTINEL;
        }
        let merged: Vec<usize> = bestedgeto.into_iter().filter(|&k| k != SENTINEL).collect();
        self.bestedge[b] = SENTINEL;
        for &k in &merged {
            if self.bestedge[b] == SENTINEL || self.slack(k) < self.slack(self.bestedge[b]) {
                self.bestedge[b] = k;
            }
        }
        self.blossombestedges[b] = Some(merged);
    }

    fn score_best_edges(&self, b: usize, edge_ids: &[usize], bestedgeto: &mut [usize]) {
        for &k in edge_ids {
            let mut i = self.endpoint_vertex[2 * k] as usize;
            let mut j = self.endpoint_vertex[2 * k + 1] as usize;
            if self.inblossom[j] == b {
                core::mem::swap(&mut i, &mut j);
            }
            let bj = self.inblossom[j];
            if bj != b
                && self.label[bj] == LABEL_S
                && (bestedgeto[bj] == SENTINEL || self.slack(k) < self.slack(bestedgeto[bj]))
            {
                bestedgeto[bj] = k;
            }
        }
    }

    /// Expands blossom `b`, turning its children into top-level blossoms.
    /// During a stage (endstage = false) a T-blossom's children must be
    /// relabeled to keep the alternating forest intact.
    fn expand_blossom(&mut self, b: usize, endstage: bool) {
        for ci in 0..self.blossomchilds[b].len() {
            let s = self.blossomchilds[b][ci];
            self.blossomparent[s] = SENTINEL;
            if s < self.nvertex {
                self.inblossom[s] = s;
            } else if endstage && self.dualvar[s] == W::ZERO {
                self.expand_blossom(s, endstage);
            } else {
                let mut leaves = Vec::new();
                self.blossom_leaves(s, &mut leaves);
                for &v in &leaves {
                    self.inblossom[v] = s;
                }
            }
        }

        if !endstage && self.label[b] == LABEL_T {
            debug_assert!(self.labelend[b] != SENTINEL);
            let entrychild = self.inblossom[self.endpoint(self.labelend[b] ^ 1)];
            let len = self.blossomchilds[b].len() as i64;
            let mut j = self.blossomchilds[b]
                .iter()
                .position(|&c| c == entrychild)
                .expect("entry child is a child of the expanding blossom")
                as i64;
            let (jstep, endptrick): (i64, usize) = if j & 1 != 0 {
                j -= len;
                (1, 0)
            } else {
                (-1, 1)
            };

            // relabel along the even-length side from the entry to the base
            let mut p = self.labelend[b];
            while j != 0 {
                let ep = self.endpoint(p ^ 1);
                self.label[ep] = LABEL_FREE;
                let q = self.wrap_endp(b, j - endptrick as i64) ^ endptrick ^ 1;
                let eq = self.endpoint(q);
                self.label[eq] = LABEL_FREE;
                self.assign_label(ep, LABEL_T, p);
                let allowed = self.wrap_endp(b, j - endptrick as i64) / 2;
                self.allowedge[allowed] = true;
                j += jstep;
                p = self.wrap_endp(b, j - endptrick as i64) ^ endptrick;
                self.allowedge[p / 2] = true;
                j += jstep;
            }

            // base child keeps label T without stepping to its mate
            let bv = self.wrap_child(b, j);
            let ep = self.endpoint(p ^ 1);
            self.label[ep] = LABEL_T;
            self.label[bv] = LABEL_T;
            self.labelend[ep] = p;
            self.labelend[bv] = p;
            self.bestedge[bv] = SENTINEL;

            // remaining children: relabel T if reachable, else leave free
            j += jstep;
            while self.wrap_child(b, j) != entrychild {
                let bv = self.wrap_child(b, j);
                if self.label[bv] == LABEL_S {
                    j += jstep;
                    continue;
                }
                let mut leaves = Vec::new();
                self.blossom_leaves(bv, &mut leaves);
                let mut reached = SENTINEL;
                for &v in &leaves {
                    if self.label[v] != LABEL_FREE {
                        reached = v;
                        break;
                    }
                }
                if reached != SENTINEL {
                    let v = reached;
                    debug_assert_eq!(self.label[v], LABEL_T);
                    debug_assert_eq!(self.inblossom[v], bv);
                    self.label[v] = LABEL_FREE;
                    let mate_of_base = self.mate[self.blossombase[bv]];
                    let mv = self.endpoint(mate_of_base);
                    self.label[mv] = LABEL_FREE;
                    let le = self.labelend[v];
                    self.assign_label(v, LABEL_T, le);
                }
                j += jstep;
            }
        }

        self.label[b] = LABEL_FREE;
        self.labelend[b] = SENTINEL;
        self.blossombase[b] = SENTINEL;
        self.bestedge[b] = SENTINEL;
        self.blossomchilds[b].clear();
        self.blossomendps[b].clear();
        self.blossombestedges[b] = None;
        self.unusedblossoms.push(b);
    }

    #[inline]
    fn wrap_child(&self, b: usize, j: i64) -> usize {
        let len = self.blossomchilds[b].len() as i64;
        let idx = if j >= 0 { j } else { len + j };
        self.blossomchilds[b][idx as usize]
    }

    #[inline]
    fn wrap_endp(&self, b: usize, j: i64) -> usize {
        let len = self.blossomendps[b].len() as i64;
        let idx = if j >= 0 { j } else { len + j };
        self.blossomendps[b][idx as usize]
    }

    /// Swaps matched/unmatched edges along the path inside blossom `b` from
    /// vertex `v` to the base, and rotates the child list so `v`'s
    /// sub-blossom becomes the new base.
    fn augment_blossom(&mut self, b: usize, v: usize) {
        let mut t = v;
        while self.blossomparent[t] != b {
            t = self.blossomparent[t];
        }
        if t >= self.nvertex {
            self.augment_blossom(t, v);
        }
        let i = self.blossomchilds[b]
            .iter()
            .position(|&c| c == t)
            .expect("t is a child of b");
        let mut j = i as i64;
        let len = self.blossomchilds[b].len() as i64;
        let (jstep, endptrick): (i64, usize) = if i & 1 != 0 {
            j -= len;
            (1, 0)
        } else {
            (-1, 1)
        };
        while j != 0 {
            j += jstep;
            let t1 = self.wrap_child(b, j);
            let p = self.wrap_endp(b, j - endptrick as i64) ^ endptrick;
            if t1 >= self.nvertex {
                let ep = self.endpoint(p);
                self.augment_blossom(t1, ep);
            }
            j += jstep;
            let t2 = self.wrap_child(b, j);
            if t2 >= self.nvertex {
                let ep = self.endpoint(p ^ 1);
                self.augment_blossom(t2, ep);
            }
            let e0 = self.endpoint(p);
            let e1 = self.endpoint(p ^ 1);
            self.mate[e0] = p ^ 1;
            self.mate[e1] = p;
        }
        self.blossomchilds[b].rotate_left(i);
        self.blossomendps[b].rotate_left(i);
        self.blossombase[b] = self.blossombase[self.blossomchilds[b][0]];
        debug_assert_eq!(self.blossombase[b], v);
    }

    /// Augments the matching along the path through edge `k` between two
    /// S-vertices in different trees.
    fn augment_matching(&mut self, k: usize) {
        let v = self.endpoint_vertex[2 * k] as usize;
        let w = self.endpoint_vertex[2 * k + 1] as usize;
        for &(mut s, mut p) in &[(v, 2 * k + 1), (w, 2 * k)] {
            loop {
                let bs = self.inblossom[s];
                debug_assert_eq!(self.label[bs], LABEL_S);
                debug_assert_eq!(self.labelend[bs], self.mate[self.blossombase[bs]]);
                if bs >= self.nvertex {
                    self.augment_blossom(bs, s);
                }
                self.mate[s] = p;
                if self.labelend[bs] == SENTINEL {
                    break; // reached a single vertex
                }
                let t = self.endpoint(self.labelend[bs]);
                let bt = self.inblossom[t];
                debug_assert_eq!(self.label[bt], LABEL_T);
                debug_assert!(self.labelend[bt] != SENTINEL);
                s = self.endpoint(self.labelend[bt]);
                let j = self.endpoint(self.labelend[bt] ^ 1);
                debug_assert_eq!(self.blossombase[bt], t);
                if bt >= self.nvertex {
                    self.augment_blossom(bt, j);
                }
                self.mate[j] = self.labelend[bt];
                p = self.labelend[bt] ^ 1;
            }
        }
    }

    fn solve(&mut self) {
        let n = self.nvertex;
        for _stage in 0..n {
            self.label.iter_mut().for_each(|l| *l = LABEL_FREE);
            self.bestedge.iter_mut().for_each(|e| *e = SENTINEL);
            for b in n..2 * n {
                self.blossombestedges[b] = None;
            }
            self.allowedge.iter_mut().for_each(|a| *a = false);
            self.queue.clear();

            for v in 0..n {
                if self.mate[v] == SENTINEL && self.label[self.inblossom[v]] == LABEL_FREE {
                    self.assign_label(v, LABEL_S, SENTINEL);
                }
            }

            let mut augmented = false;
            loop {
                // grow the forest until augmentation or until no tight edge
                // is left
                while let Some(v) = self.queue.pop() {
                    debug_assert_eq!(self.label[self.inblossom[v]], LABEL_S);
                    let dv = self.dualvar[v];
                    for ni in self.neighbors(v) {
                        let p = self.neigh[ni] as usize;
                        let k = p / 2;
                        let w = self.endpoint_vertex[p] as usize;
                        // inblossom[v] can change mid-scan when a new
                        // blossom absorbs v
                        if self.inblossom[v] == self.inblossom[w] {
                            continue;
                        }
                        let mut kslack = W::ZERO;
                        if !self.allowedge[k] {
                            kslack = dv + self.dualvar[w] - self.weight_doubled[k];
                            if kslack <= W::ZERO {
                                self.allowedge[k] = true;
                            }
                        }
                        if self.allowedge[k] {
                            if self.label[self.inblossom[w]] == LABEL_FREE {
                                self.assign_label(w, LABEL_T, p ^ 1);
                            } else if self.label[self.inblossom[w]] == LABEL_S {
                                let base = self.scan_blossom(v, w);
                                if base != SENTINEL {
                                    self.add_blossom(base, k);
                                } else {
                                    self.augment_matching(k);
                                    augmented = true;
                                    break;
                                }
                            } else if self.label[w] == LABEL_FREE {
                                // w sits in a T-blossom but has not been
                                // reached itself yet
                                debug_assert_eq!(self.label[self.inblossom[w]], LABEL_T);
                                self.label[w] = LABEL_T;
                                self.labelend[w] = p ^ 1;
                            }
                        } else if self.label[self.inblossom[w]] == LABEL_S {
                            let b = self.inblossom[v];
                            if self.bestedge[b] == SENTINEL
                                || kslack < self.slack(self.bestedge[b])
                            {
                                self.bestedge[b] = k;
                            }
                        } else if self.label[w] == LABEL_FREE
                            && (self.bestedge[w] == SENTINEL
                                || kslack < self.slack(self.bestedge[w]))
                        {
                            self.bestedge[w] = k;
                        }
                    }
                    if augmented {
                        break;
                    }
                }
                if augmented {
                    break;
                }

                // dual update
                let mut deltatype: i8 = -1;
                let mut delta = W::ZERO;
                let mut deltaedge = SENTINEL;
                let mut deltablossom = SENTINEL;

                if !self.maxcardinality {
                    deltatype = 1;
                    delta = self.dualvar[..n].iter().copied().min().unwrap_or(W::ZERO);
                }
                for v in 0..n {
                    if self.label[self.inblossom[v]] == LABEL_FREE
                        && self.bestedge[v] != SENTINEL
                    {
                        let d = self.slack(self.bestedge[v]);
                        if deltatype == -1 || d < delta {
                            delta = d;
                            deltatype = 2;
                            deltaedge = self.bestedge[v];
                        }
                    }
                }
                for b in 0..2 * n {
                    if self.blossomparent[b] == SENTINEL
                        && self.label[b] == LABEL_S
                        && self.bestedge[b] != SENTINEL
                    {
                        let kslack = self.slack(self.bestedge[b]);
                        let d = kslack.half_nonneg();
                        if deltatype == -1 || d < delta {
                            delta = d;
                            deltatype = 3;
                            deltaedge = self.bestedge[b];
                        }
                    }
                }
                for b in n..2 * n {
                    if self.blossombase[b] != SENTINEL
                        && self.blossomparent[b] == SENTINEL
                        && self.label[b] == LABEL_T
                        && (deltatype == -1 || self.dualvar[b] < delta)
                    {
                        delta = self.dualvar[b];
                        deltatype = 4;
                        deltablossom = b;
                    }
                }
                if deltatype == -1 {
                    // no slack left to remove: the maximum-cardinality
                    // optimum is reached
                    debug_assert!(self.maxcardinality);
                    deltatype = 1;
                    delta = self.dualvar[..n]
                        .iter()
                        .copied()
                        .min()
                        .unwrap_or(W::ZERO)
                        .max(W::ZERO);
                }

                for v in 0..n {
                    match self.label[self.inblossom[v]] {
                        LABEL_FREE => {}
                        LABEL_S => self.dualvar[v] = self.dualvar[v] - delta,
                        LABEL_T => self.dualvar[v] = self.dualvar[v] + delta,
                        _ => unreachable!("breadcrumbs are cleared before dual updates"),
                    }
                }
                for b in n..2 * n {
                    if self.blossombase[b] != SENTINEL && self.blossomparent[b] == SENTINEL {
                        match self.label[b] {
                            LABEL_FREE => {}
                            LABEL_S => self.dualvar[b] = self.dualvar[b] + delta,
                            LABEL_T => self.dualvar[b] = self.dualvar[b] - delta,
                            _ => unreachable!(),
                        }
                    }
                }

                match deltatype {
                    1 => break, // optimum reached
                    2 => {
                        self.allowedge[deltaedge] = true;
                        let mut i = self.endpoint_vertex[2 * deltaedge] as usize;
                        if self.label[self.inblossom[i]] == LABEL_FREE {
                            i = self.endpoint_vertex[2 * deltaedge + 1] as usize;
                        }
                        debug_assert_eq!(self.label[self.inblossom[i]], LABEL_S);
                        self.queue.push(i);
                    }
                    3 => {
                        self.allowedge[deltaedge] = true;
                        let i = self.endpoint_vertex[2 * deltaedge] as usize;
                        debug_assert_eq!(self.label[self.inblossom[i]], LABEL_S);
                        self.queue.push(i);
                    }
                    4 => self.expand_blossom(deltablossom, false),
                    _ => unreachable!(),
                }
            }

            if !augmented {
                break;
            }

            // discard S-blossoms whose dual dropped to zero
            for b in n..2 * n {
                if self.blossomparent[b] == SENTINEL
                    && self.blossombase[b] != SENTINEL
                    && self.label[b] == LABEL_S
                    && self.dualvar[b] == W::ZERO
                {
                    self.expand_blossom(b, true);
                }
            }
        }
    }

    /// Exact complementary-slackness check of the final matching and duals.
    #[cfg(debug_assertions)]
    fn verify_optimum(&self) {
        let n = self.nvertex;
        let vdualoffset = if self.maxcardinality {
            let min_dual = self.dualvar[..n].iter().copied().min().unwrap_or(W::ZERO);
            (W::ZERO - min_dual).max(W::ZERO)
        } else {
            W::ZERO
        };
        assert!(
            self.dualvar[..n].iter().copied().min().unwrap_or(W::ZERO) + vdualoffset >= W::ZERO
        );
        assert!(self.dualvar[n..].iter().copied().min().unwrap_or(W::ZERO) >= W::ZERO);
        for k in 0..self.nedge {
            let i = self.endpoint_vertex[2 * k] as usize;
            let j = self.endpoint_vertex[2 * k + 1] as usize;
            let mut s = self.dualvar[i] + self.dualvar[j] - self.weight_doubled[k];
            let mut iblossoms = vec![i];
            let mut jblossoms = vec![j];
            while self.blossomparent[*iblossoms.last().unwrap()] != SENTINEL {
                iblossoms.push(self.blossomparent[*iblossoms.last().unwrap()]);
            }
            while self.blossomparent[*jblossoms.last().unwrap()] != SENTINEL {
                jblossoms.push(self.blossomparent[*jblossoms.last().unwrap()]);
            }
            iblossoms.reverse();
            jblossoms.reverse();
            for (&bi, &bj) in iblossoms.iter().zip(jblossoms.iter()) {
                if bi != bj {
                    break;
                }
                s = s + self.dualvar[bi].twice();
            }
            assert!(s >= W::ZERO, "edge {} has negative slack", k);
            if self.mate[i] / 2 == k || self.mate[j] / 2 == k {
                assert_eq!(self.mate[i] / 2, k);
                assert_eq!(self.mate[j] / 2, k);
                assert!(s == W::ZERO, "matched edge {} has nonzero slack", k);
            }
        }
        for v in 0..n {
            assert!(self.mate[v] != SENTINEL || self.dualvar[v] + vdualoffset == W::ZERO);
        }
        for b in n..2 * n {
            if self.blossombase[b] != SENTINEL && self.dualvar[b] > W::ZERO {
                assert_eq!(self.blossomendps[b].len() % 2, 1);
                for (ix, &p) in self.blossomendps[b].iter().enumerate() {
                    if ix % 2 == 1 {
                        assert_eq!(self.mate[self.endpoint(p)], p ^ 1);
                        assert_eq!(self.mate[self.endpoint(p ^ 1)], p);
                    }
                }
            }
        }
    }
}
