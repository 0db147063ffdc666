"""Augmented balanced tree answering donation-wealth queries in O(log n)."""

import math


class _Node:
    __slots__ = ("key", "idx", "ge", "g", "left", "right", "height", "s_ge", "s_g", "count")

    def __init__(self, key, idx, ge, g):
        self.key = key
        self.idx = idx
        self.ge = ge
        self.g = g
        self.left = None
        self.right = None
        self.height = 1
        self.s_ge = ge
        self.s_g = g
        self.count = 1


def _h(n):
    return n.height if n is not None else 0


def _pull(n):
    l, r = n.left, n.right
    n.height = 1 + max(_h(l), _h(r))
    n.s_ge = n.ge + (l.s_ge if l else 0.0) + (r.s_ge if r else 0.0)
    n.s_g = n.g + (l.s_g if l else 0.0) + (r.s_g if r else 0.0)
    n.count = 1 + (l.count if l else 0) + (r.count if r else 0)


def _rot_right(n):
    l = n.left
    n.left = l.right
    l.right = n
    _pull(n)
    _pull(l)
    return l


def _rot_left(n):
    r = n.right
    n.right = r.left
    r.left = n
    _pull(n)
    _pull(r)
    return r


def _balance(n):
    _pull(n)
    bf = _h(n.left) - _h(n.right)
    if bf > 1:
        if _h(n.left.left) < _h(n.left.right):
            n.left = _rot_left(n.left)
        return _rot_right(n)
    if bf < -1:
        if _h(n.right.right) < _h(n.right.left):
            n.right = _rot_right(n.right)
        return _rot_left(n)
    return n


class WealthLedger:
    """Rejected hypotheses keyed by ``gamma_i (E_i - 1)`` plus unrejected mass.

    Each node stores subtree sums of ``gamma_i E_i``, ``gamma_i`` and the
    node count, so for a threshold ``c``

    ``sum_i min(gamma_i E_i - c, gamma_i)``

    splits into the keys at most ``c`` (first branch) and the rest, and is
    read off one root-to-leaf path. Equal keys are ordered by index.

    ``visits`` counts nodes touched by the most recent operation.
    """

    def __init__(self):
        self.root = None
        self.unrejected_mass = 0.0
        self._unrejected = {}
        self._members = set()
        self.visits = 0

    def __len__(self):
        return len(self._members)

    def __contains__(self, i):
        return i in self._members

    # -- mutation ----------------------------------------------------------
    def add_unrejected(self, i, gamma_i, e_i):
        """Count ``gamma_i (E_i ^ 1)`` for a hypothesis that is not rejected."""
        if i in self._members or i in self._unrejected:
            raise ValueError(f"index {i} already recorded in the ledger")
        v = gamma_i * min(e_i, 1.0)
        self._unrejected[i] = v
        self.unrejected_mass += v

    def insert(self, i, gamma_i, e_i):
        """Add rejected hypothesis ``i``; any unrejected contribution is withdrawn."""
        if i in self._members:
            raise ValueError(f"index {i} already in the ledger")
        if i in self._unrejected:
            self.unrejected_mass -= self._unrejected.pop(i)
            if not self._unrejected:
                self.unrejected_mass = 0.0
        self.visits = 0
        key = gamma_i * (e_i - 1.0)
        self.root = self._insert(self.root, _Node(key, i, gamma_i * e_i, gamma_i))
        self._members.add(i)

    def _insert(self, n, new):
        if n is None:
            return new
        self.visits += 1
        if (new.key, new.idx) < (n.key, n.idx):
            n.left = self._insert(n.left, new)
        else:
            n.right = self._insert(n.right, new)
        return _balance(n)

    # -- queries -----------------------------------------------------------
    def split_sums(self, c):
        """``(sum gamma E, count)`` over keys ``<= c`` and ``sum gamma`` over keys ``> c``."""
        ge_lo = 0.0
        n_lo = 0
        g_hi = 0.0
        n = self.root
        self.visits = 0
        while n is not None:
            self.visits += 1
            if n.key <= c:
                if n.left is not None:
                    ge_lo += n.left.s_ge
                    n_lo += n.left.count
                ge_lo += n.ge
                n_lo += 1
                n = n.right
            else:
                if n.right is not None:
                    g_hi += n.right.s_g
                g_hi += n.g
                n = n.left
        return ge_lo, n_lo, g_hi

    def rejected_wealth(self, c):
        """``sum over rejected of min(gamma_i E_i - c, gamma_i)``."""
        if c == math.inf:
            return -math.inf if self.root is not None else 0.0
        ge_lo, n_lo, g_hi = self.split_sums(c)
        return (ge_lo - c * n_lo) + g_hi

    def wealth(self, c):
        """Rejected donation term at threshold ``c`` plus the unrejected mass."""
        return self.rejected_wealth(c) + self.unrejected_mass

    # -- diagnostics -------------------------------------------------------
    def height(self):
        return _h(self.root)

    def items(self):
        """In-order ``(key, index, gamma E, gamma)`` tuples."""
        out = []
        stack = []
        n = self.root
        while stack or n is not None:
            while n is not None:
                stack.append(n)
                n = n.left
            n = stack.pop()
            out.append((n.key, n.idx, n.ge, n.g))
            n = n.right
        return out

    def check(self, rtol=1e-9):
        """Recompute every augmented field bottom-up; raise on any mismatch."""

        def walk(n):
            if n is None:
                return 0, 0.0, 0.0, 0
            hl, gel, gl, cl = walk(n.left)
            hr, ger, gr, cr = walk(n.right)
            h = 1 + max(hl, hr)
            ge, g, c = n.ge + gel + ger, n.g + gl + gr, 1 + cl + cr
            if abs(hl - hr) > 1 or n.height != h or n.count != c:
                raise AssertionError(f"shape invariant broken at index {n.idx}")
            for have, want in ((n.s_ge, ge), (n.s_g, g)):
                if abs(have - want) > rtol * max(abs(want), 1e-300) + 1e-15:
                    raise AssertionError(f"augmented sum mismatch at index {n.idx}")
            return h, ge, g, c

        walk(self.root)
        keys = [(k, i) for k, i, _, _ in self.items()]
        if keys != sorted(keys) or len(keys) != len(self._members):
            raise AssertionError("in-order traversal is not sorted by (key, index)")
        if self.unrejected_mass < -1e-12:
            raise AssertionError("negative unrejected mass")
        return True
