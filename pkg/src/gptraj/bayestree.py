"""Bayes tree: cliqued square-root information form with incremental updates.

Elimination runs variable by variable with dense QR on the factors touching
each variable, producing one conditional p(v | separator) per variable plus a
new Gaussian factor on the separator.  Conditionals whose separator equals the
parent clique's full scope merge into that clique.

Incremental updates re-eliminate only the cliques affected by new factors,
removed factors, or relinearized variables: the affected cliques and all of
their ancestors are detached, their factors re-gathered (messages cached by
orphaned subtrees stand in for everything below), and the detached variables
are re-eliminated with the variables of the new factors placed last so that
the most recent measurement ends up near the root.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla

from .factors import Factor, FactorGraph, LinearSystem, evaluate_factor
from .states import MarkovState

RANK_TOL = 1e-12


@dataclass(slots=True)
class GaussianFactor:
    """Whitened linear factor in least-squares form: minimize ||A delta - b||^2."""

    blocks: dict[int, np.ndarray]
    rhs: np.ndarray
    source: int | None = None


@dataclass(slots=True)
class Conditional:
    """Upper-triangular conditional p(frontal | separator): R d_f + S d_sep = d."""

    frontal: int
    separator: tuple[int, ...]
    r: np.ndarray
    s_blocks: dict[int, np.ndarray]
    d: np.ndarray

    def solve(self, delta: dict[int, np.ndarray]) -> np.ndarray:
        rhs = self.d.copy()
        for u, blk in self.s_blocks.items():
            rhs -= blk @ delta[u]
        return sla.solve_triangular(self.r, rhs, lower=False)


@dataclass(slots=True, eq=False)
class Clique:
    """Group of conditionals sharing one separator structure."""

    frontals: list[int]
    separator: tuple[int, ...]
    conditionals: dict[int, Conditional]
    parent: Clique | None = None
    children: list[Clique] = field(default_factory=list)
    cached: GaussianFactor | None = None

    @property
    def scope(self) -> set[int]:
        return set(self.frontals) | set(self.separator)

    def __repr__(self) -> str:
        fr = ",".join(map(str, self.frontals))
        sep = ",".join(map(str, self.separator))
        return f"Clique[{fr} : {sep}]"


@dataclass(slots=True, eq=False)
class BayesTree:
    """Clique tree plus the nonlinear bookkeeping for incremental updates."""

    dims: dict[int, int] = field(default_factory=dict)
    root: Clique | None = None
    var_clique: dict[int, Clique] = field(default_factory=dict)
    values: dict[int, MarkovState] = field(default_factory=dict)
    delta: dict[int, np.ndarray] = field(default_factory=dict)
    factors: list[Factor] = field(default_factory=list)
    removed: set[int] = field(default_factory=set)
    home: dict[int, int] = field(default_factory=dict)
    mode: str = "natural"
    last_update_size: int = 0

    # ------------------------------------------------------------- structure

    def cliques(self) -> list[Clique]:
        """All cliques in deterministic preorder (root first)."""
        out: list[Clique] = []
        stack = [self.root] if self.root is not None else []
        while stack:
            c = stack.pop()
            out.append(c)
            stack.extend(reversed(c.children))
        return out

    def structure_lines(self) -> list[str]:
        """One line per clique: frontals, separator, and parent frontals."""
        lines = []
        for c in self.cliques():
            fr = ",".join(map(str, c.frontals))
            sep = ",".join(map(str, c.separator))
            par = ",".join(map(str, c.parent.frontals)) if c.parent is not None else "-"
            lines.append(f"[{fr} : {sep}] parent=[{par}]")
        return lines

    def estimate(self) -> dict[int, MarkovState]:
        """Linearization points updated by the current solved increments."""
        return {v: s.retract(self.delta[v]) for v, s in self.values.items()}

    def error(self) -> float:
        """Sum of squared whitened residuals of the active factors at the estimate."""
        est = self.estimate()
        total = 0.0
        for i in self._active_ids():
            f = self.factors[i]
            r_w = f.noise.whiten(f.error([est[v] for v in f.vars]))
            total += float(r_w @ r_w)
        return total

    # -------------------------------------------------------------- builders

    @classmethod
    def from_factor_graph(
        cls,
        graph: FactorGraph | list[Factor],
        values: dict[int, MarkovState],
        mode: str = "natural",
    ) -> BayesTree:
        factors = list(graph.factors) if isinstance(graph, FactorGraph) else list(graph)
        tree = cls(
            dims={v: s.dim for v, s in values.items()},
            values=dict(values),
            delta={v: np.zeros(s.dim) for v, s in values.items()},
            factors=factors,
            mode=mode,
        )
        tree._full_build()
        return tree

    def _active_ids(self) -> list[int]:
        return [i for i in range(len(self.factors)) if i not in self.removed]

    def _full_build(self) -> None:
        linear = [_linearize_one(self.factors[i], self.values, i) for i in self._active_ids()]
        scopes = [tuple(f.blocks) for f in linear]
        ordering = _ordering_from_scopes(scopes, self.mode)
        missing = set(self.values) - set(ordering)
        if missing:
            raise ValueError(f"variable {min(missing)} is unconstrained (no factor touches it)")
        self._eliminate_and_install(linear, ordering, orphans=())
        self.last_update_size = len(ordering)

    def _eliminate_and_install(
        self,
        linear: list[GaussianFactor],
        ordering: list[int],
        orphans: tuple[Clique, ...],
    ) -> None:
        """Eliminate the given factors, install the new cliques, attach orphans."""
        conditionals, emitted, homes = _eliminate_factors(linear, ordering, self.dims)
        self.home.update(homes)
        pos = {v: k for k, v in enumerate(ordering)}
        root, var_clique = _build_cliques(conditionals, pos)
        for clique in _preorder(root):
            clique.cached = emitted.get(clique.frontals[-1])
        self.var_clique.update(var_clique)
        for orphan in orphans:
            anchor = min(orphan.separator, key=pos.__getitem__)
            parent = var_clique[anchor]
            orphan.parent = parent
            parent.children.append(orphan)
        self.root = root

    # ------------------------------------------------------------ the update

    def update(
        self,
        new_factors: tuple[Factor, ...] | list[Factor] = (),
        *,
        new_values: dict[int, MarkovState] | None = None,
        removed_factors: tuple[int, ...] = (),
        relin_vars: tuple[int, ...] | set[int] = (),
        step_scale: float = 1.0,
    ) -> list[int]:
        """Incremental re-elimination; returns the ids of the added factors.

        ``step_scale`` damps the relinearization point shift: marked
        variables move by that fraction of their solved increment before
        re-elimination.  One (the default) is a full Gauss-Newton step.
        """
        if not 0.0 < step_scale <= 1.0:
            raise ValueError("step_scale must be in (0, 1]")
        for v, s in (new_values or {}).items():
            if v in self.values:
                raise ValueError(f"variable {v} already exists")
            self.values[v] = s
            self.delta[v] = np.zeros(s.dim)
            self.dims[v] = s.dim
        new_ids = []
        for f in new_factors:
            for v in f.vars:
                if v not in self.values:
                    raise ValueError(f"factor references unknown variable {v}")
            self.factors.append(f)
            new_ids.append(len(self.factors) - 1)
        for fid in removed_factors:
            if fid in self.removed or not 0 <= fid < len(self.factors):
                raise ValueError(f"cannot remove factor {fid}")
            self.removed.add(fid)
            self.home.pop(fid, None)

        if self.root is None:
            self._full_build()
            return new_ids

        touched = {v for f in new_factors for v in f.vars}
        for fid in removed_factors:
            touched.update(self.factors[fid].vars)
        relin = set(relin_vars)
        if not touched and not relin and not new_values:
            self.last_update_size = 0
            return new_ids

        # move the linearization point of relinearized variables
        for v in sorted(relin):
            dv = self.delta[v]
            if np.any(dv != 0.0):
                self.values[v] = self.values[v].retract(step_scale * dv)
                self.delta[v] = np.zeros_like(dv)

        # collect the affected cliques: factor-touched frontals and every
        # clique containing a relinearized variable, plus all their ancestors
        removed_list: list[Clique] = []
        removed_set: set[Clique] = set()

        def mark_up(c: Clique | None) -> None:
            while c is not None and c not in removed_set:
                removed_set.add(c)
                removed_list.append(c)
                c = c.parent

        for v in sorted(touched):
            if v in self.var_clique:
                mark_up(self.var_clique[v])
        if relin:
            for c in self.cliques():
                if c not in removed_set and relin & c.scope:
                    mark_up(c)

        if self.root not in removed_set:
            raise ValueError("update does not connect to the existing tree")

        detached: list[int] = []
        for c in removed_list:
            detached.extend(c.frontals)
        detached_set = set(detached)
        orphans = tuple(
            ch for c in removed_list for ch in c.children if ch not in removed_set
        )

        # factors homed in a detached variable are re-linearized from scratch;
        # orphaned subtrees contribute their cached separator messages
        gathered = [
            fid
            for fid, hv in sorted(self.home.items())
            if hv in detached_set and fid not in self.removed
        ]
        linear = [_linearize_one(self.factors[i], self.values, i) for i in gathered]
        linear.extend(_linearize_one(self.factors[i], self.values, i) for i in new_ids)
        linear.extend(o.cached for o in orphans if o.cached is not None)

        elim_vars = detached_set | set(new_values or {})
        for f in linear:
            stray = set(f.blocks) - elim_vars
            if stray:
                raise AssertionError(f"update scope leak: variables {sorted(stray)}")

        scopes = [tuple(f.blocks) for f in linear]
        forced_last = frozenset(v for f in new_factors for v in f.vars)
        ordering = _ordering_from_scopes(scopes, "min_degree", forced_last=forced_last)
        missing = elim_vars - set(ordering)
        if missing:
            raise ValueError(
                f"variable {min(missing)} is unconstrained (no factor touches it)"
            )
        for v in detached_set:
            del self.var_clique[v]
        self._eliminate_and_install(linear, ordering, orphans)
        self.last_update_size = len(ordering)
        return new_ids

    # ---------------------------------------------------------------- solves

    def solve(self) -> dict[int, np.ndarray]:
        """Full downward pass; stores and returns the tangent increments."""
        delta: dict[int, np.ndarray] = {}
        stack = [self.root] if self.root is not None else []
        while stack:
            c = stack.pop()
            for f in reversed(c.frontals):
                delta[f] = c.conditionals[f].solve(delta)
            stack.extend(reversed(c.children))
        for v in self.values:
            if v not in delta:
                raise AssertionError(f"variable {v} missing from the tree")
        self.delta = delta
        return dict(delta)

    def mark_relinearization(self, threshold: float) -> list[int]:
        """Variables whose solved increment exceeds the threshold (inf-norm)."""
        return sorted(
            v for v, dv in self.delta.items() if np.max(np.abs(dv), initial=0.0) > threshold
        )


def incremental_update(tree: BayesTree, new_factors=(), **kwargs) -> list[int]:
    return tree.update(new_factors, **kwargs)


def solve_tree(tree: BayesTree) -> dict[int, np.ndarray]:
    return tree.solve()


def mark_relinearization(tree: BayesTree, threshold: float) -> list[int]:
    return tree.mark_relinearization(threshold)


def relinearize_to_quiescence(
    tree: BayesTree,
    threshold: float,
    max_cycles: int,
    min_scale: float = 1.0 / 64.0,
) -> int:
    """Damped relinearization until every solved increment is below threshold.

    Each cycle shifts the linearization points of the marked variables by a
    fraction of their increment and re-eliminates.  A full Gauss-Newton step
    can overshoot on long, loosely coupled chains, so the fraction is halved
    whenever a cycle increases the total error and doubled (capped at one)
    after a cycle that decreases it.  Returns the total number of variables
    re-eliminated across all cycles.
    """
    if max_cycles <= 0:
        return 0
    err = tree.error()
    scale = 1.0
    count = 0
    for _ in range(max_cycles):
        marks = tree.mark_relinearization(threshold)
        if not marks:
            break
        tree.update(relin_vars=marks, step_scale=scale)
        count += tree.last_update_size
        tree.solve()
        new_err = tree.error()
        scale = max(scale * 0.5, min_scale) if new_err > err else min(scale * 2.0, 1.0)
        err = new_err
    return count


# ------------------------------------------------------------------ ordering


def compute_ordering(graph: FactorGraph, mode: str = "natural") -> list[int]:
    """Elimination ordering over the graph's variables.

    "natural" orders by ascending variable id; "min_degree" greedily
    eliminates the variable of smallest degree (ties to the lowest id).
    """
    scopes = [f.vars for f in graph.factors]
    return _ordering_from_scopes(scopes, mode)


def _ordering_from_scopes(
    scopes: list[tuple[int, ...]],
    mode: str,
    forced_last: frozenset[int] = frozenset(),
) -> list[int]:
    if mode == "natural":
        return sorted({v for sc in scopes for v in sc})
    if mode != "min_degree":
        raise ValueError(f"unknown ordering mode {mode!r}")
    adj: dict[int, set[int]] = {}
    for sc in scopes:
        for a in sc:
            adj.setdefault(a, set()).update(sc)
    for a in adj:
        adj[a].discard(a)
    remaining = set(adj)
    order: list[int] = []
    while remaining:
        candidates = remaining - forced_last
        if not candidates:
            candidates = remaining
        v = min(candidates, key=lambda u: (len(adj[u] & remaining), u))
        order.append(v)
        remaining.discard(v)
        nbrs = adj[v] & remaining
        for a in nbrs:
            adj[a].update(nbrs)
            adj[a].discard(a)
    return order


# --------------------------------------------------------------- elimination


def _linearize_one(factor: Factor, values: dict[int, MarkovState], fid: int) -> GaussianFactor:
    r_w, jac_w = evaluate_factor(factor, values)
    if not np.all(np.isfinite(r_w)) or any(not np.all(np.isfinite(j)) for j in jac_w.values()):
        raise FloatingPointError(
            f"non-finite linearization in factor {fid} ({factor.kind}, vars={factor.vars})"
        )
    return GaussianFactor(jac_w, -r_w, source=fid)


def system_to_factors(system: LinearSystem) -> list[GaussianFactor]:
    """Adapt a whitened linearization (rhs = residual) to least-squares form."""
    return [GaussianFactor(dict(row.blocks), -row.rhs, row.source) for row in system.rows]


def eliminate(
    factors: list[GaussianFactor], ordering: list[int], dims: dict[int, int]
) -> list[Conditional]:
    """Sequential QR elimination; returns one conditional per variable."""
    return _eliminate_factors(factors, ordering, dims)[0]


def _eliminate_factors(
    factors: list[GaussianFactor], ordering: list[int], dims: dict[int, int]
) -> tuple[list[Conditional], dict[int, GaussianFactor | None], dict[int, int]]:
    pos = {v: k for k, v in enumerate(ordering)}
    buckets: dict[int, list[GaussianFactor]] = {v: [] for v in ordering}
    for f in factors:
        if not f.blocks:
            continue
        first = min(f.blocks, key=pos.__getitem__)
        buckets[first].append(f)

    conditionals: list[Conditional] = []
    emitted: dict[int, GaussianFactor | None] = {}
    homes: dict[int, int] = {}
    for v in ordering:
        involved = buckets[v]
        if not involved:
            raise ValueError(f"variable {v} is unconstrained (no factor touches it)")
        for f in involved:
            if f.source is not None:
                homes[f.source] = v
        seps = sorted({u for f in involved for u in f.blocks if u != v}, key=pos.__getitem__)
        dv = dims[v]
        col_of = {v: 0}
        c = dv
        for u in seps:
            col_of[u] = c
            c += dims[u]
        nrows = sum(f.rhs.shape[0] for f in involved)
        mat = np.zeros((nrows, c + 1))
        r0 = 0
        for f in involved:
            nr = f.rhs.shape[0]
            for u, blk in f.blocks.items():
                mat[r0 : r0 + nr, col_of[u] : col_of[u] + dims[u]] = blk
            mat[r0 : r0 + nr, -1] = f.rhs
            r0 += nr
        if nrows < dv:
            raise ValueError(f"variable {v} is rank deficient ({nrows} rows < dim {dv})")
        r = np.linalg.qr(mat, mode="r")
        if np.any(np.abs(np.diag(r)[:dv]) <= RANK_TOL):
            raise ValueError(f"variable {v} is rank deficient at elimination")
        cond = Conditional(
            v,
            tuple(seps),
            r[:dv, :dv].copy(),
            {u: r[:dv, col_of[u] : col_of[u] + dims[u]].copy() for u in seps},
            r[:dv, -1].copy(),
        )
        conditionals.append(cond)
        nkeep = min(r.shape[0], c)
        new_factor = None
        if seps and nkeep > dv:
            new_factor = GaussianFactor(
                {u: r[dv:nkeep, col_of[u] : col_of[u] + dims[u]].copy() for u in seps},
                r[dv:nkeep, -1].copy(),
            )
            buckets[seps[0]].append(new_factor)
        emitted[v] = new_factor
    return conditionals, emitted, homes


# --------------------------------------------------------- clique assembly


def _preorder(root: Clique) -> list[Clique]:
    out = []
    stack = [root]
    while stack:
        c = stack.pop()
        out.append(c)
        stack.extend(reversed(c.children))
    return out


def build_bayes_tree(conditionals: list[Conditional], ordering: list[int]) -> BayesTree:
    """Assemble a solvable tree from an eliminated sequence of conditionals."""
    pos = {v: k for k, v in enumerate(ordering)}
    root, var_clique = _build_cliques(conditionals, pos)
    dims = {c.frontal: c.r.shape[0] for c in conditionals}
    return BayesTree(dims=dims, root=root, var_clique=var_clique)


def _build_cliques(
    conditionals: list[Conditional], pos: dict[int, int]
) -> tuple[Clique, dict[int, Clique]]:
    root: Clique | None = None
    var_clique: dict[int, Clique] = {}
    for cond in reversed(conditionals):
        f = cond.frontal
        if not cond.separator:
            if root is not None:
                raise ValueError("factor graph is disconnected (multiple roots)")
            clique = Clique([f], (), {f: cond})
            root = clique
            var_clique[f] = clique
            continue
        anchor = min(cond.separator, key=pos.__getitem__)
        parent = var_clique[anchor]
        if set(cond.separator) == parent.scope:
            parent.frontals.insert(0, f)
            parent.conditionals[f] = cond
            var_clique[f] = parent
        else:
            clique = Clique(
                [f], tuple(sorted(cond.separator, key=pos.__getitem__)), {f: cond}, parent=parent
            )
            parent.children.append(clique)
            var_clique[f] = clique
    if root is None:
        raise ValueError("no root conditional (empty elimination)")
    return root, var_clique
