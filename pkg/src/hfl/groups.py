"""Group backends: free groups on reduced words and finite groups by table.

Free-group elements are tuples of nonzero ints: generator ``i`` is the token
``i + 1`` and its inverse is ``-(i + 1)``.  Tuples are kept freely reduced, so
they can be used directly as dictionary keys.  Finite-group elements are row
indices of the multiplication table.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

DEFAULT_CAP = 10**6


class GroupError(ValueError):
    pass


class CapExceeded(GroupError):
    pass


def reduce_word(letters: Iterable[int]) -> tuple[int, ...]:
    out: list[int] = []
    for t in letters:
        if t == 0:
            raise GroupError("0 is not a valid token")
        if out and out[-1] == -t:
            out.pop()
        else:
            out.append(t)
    return tuple(out)


def cyclically_reduce(word: Sequence[int]) -> tuple[int, ...]:
    w = reduce_word(word)
    i, j = 0, len(w)
    while j - i >= 2 and w[i] == -w[j - 1]:
        i += 1
        j -= 1
    return w[i:j]


@dataclass(frozen=True)
class WalkMeasure:
    """Finitely supported probability measure on group elements."""

    support: dict
    basepoint: object

    def total(self) -> float:
        return float(sum(self.support.values()))

    def __len__(self) -> int:
        return len(self.support)


class Group:
    """Common interface for the two backends.

    Subclasses provide ``identity``, ``tokens`` (the symmetric generating set
    as right-multiplication tokens), ``token_inverse``, ``step`` and the
    element arithmetic.
    """

    identity: object
    tokens: tuple
    cap: int

    @property
    def n_gens(self) -> int:
        return len(self.tokens)

    def multiply(self, g, h):
        raise NotImplementedError

    def inverse(self, g):
        raise NotImplementedError

    def step(self, g, token):
        """Right multiplication ``g * s`` by a generator token."""
        raise NotImplementedError

    def word_of(self, g) -> tuple:
        """A shortest token sequence spelling ``g``."""
        raise NotImplementedError

    def word_length(self, g) -> int:
        raise NotImplementedError

    def conjugacy_length(self, g) -> int:
        raise NotImplementedError

    def token_name(self, t) -> str:
        raise NotImplementedError

    def parse_token(self, name: str):
        raise NotImplementedError

    def format(self, g) -> str:
        raise NotImplementedError

    def parse(self, text: str):
        raise NotImplementedError

    def token_element(self, t):
        return self.step(self.identity, t)

    def ball(self, radius: int) -> list:
        """All elements of word length at most ``radius``, in BFS order."""
        if radius < 0:
            raise GroupError("radius must be nonnegative")
        self._check_ball_size(radius)
        seen = {self.identity: 0}
        order = [self.identity]
        frontier = [self.identity]
        for r in range(1, radius + 1):
            nxt = []
            for g in frontier:
                for t in self.tokens:
                    h = self.step(g, t)
                    if h not in seen:
                        seen[h] = r
                        order.append(h)
                        nxt.append(h)
                        if len(order) > self.cap:
                            raise CapExceeded(f"ball({radius}) exceeds cap {self.cap}")
            frontier = nxt
            if not frontier:
                break
        return order

    def _check_ball_size(self, radius: int) -> None:
        pass

    def walk_convolution(self, n: int, basepoint=None) -> WalkMeasure:
        """Exact law of the n-step standard random walk started at ``basepoint``."""
        if n < 0:
            raise GroupError("n must be nonnegative")
        x = self.identity if basepoint is None else basepoint
        p = 1.0 / self.n_gens
        dist = {x: 1.0}
        for _ in range(n):
            nxt: dict = {}
            for g, w in dist.items():
                q = w * p
                for t in self.tokens:
                    h = self.step(g, t)
                    nxt[h] = nxt.get(h, 0.0) + q
            if len(nxt) > self.cap:
                raise CapExceeded(f"walk support {len(nxt)} exceeds cap {self.cap}")
            dist = nxt
        return WalkMeasure(dist, x)


class FreeGroup(Group):
    def __init__(self, m: int, cap: int = DEFAULT_CAP):
        if m < 1:
            raise GroupError("free group needs m >= 1")
        self.m = m
        self.cap = cap
        self.identity: tuple[int, ...] = ()
        self.tokens = tuple(t for i in range(1, m + 1) for t in (i, -i))

    def __repr__(self) -> str:
        return f"FreeGroup(m={self.m})"

    def __eq__(self, other) -> bool:
        return isinstance(other, FreeGroup) and other.m == self.m

    def __hash__(self) -> int:
        return hash(("free", self.m))

    def token_inverse(self, t: int) -> int:
        return -t

    def is_involutive(self, t: int) -> bool:
        return False

    def _validate(self, g: Sequence[int]) -> None:
        for t in g:
            if t == 0 or abs(t) > self.m:
                raise GroupError(f"token {t!r} not in generating set of F_{self.m}")

    def element(self, letters: Iterable[int]) -> tuple[int, ...]:
        letters = tuple(letters)
        self._validate(letters)
        return reduce_word(letters)

    def multiply(self, g, h):
        self._validate(g)
        self._validate(h)
        return reduce_word(tuple(g) + tuple(h))

    def inverse(self, g):
        return tuple(-t for t in reversed(g))

    def step(self, g, t):
        if g and g[-1] == -t:
            return g[:-1]
        return g + (t,)

    def word_of(self, g):
        return tuple(g)

    def word_length(self, g) -> int:
        return len(reduce_word(g))

    def conjugacy_length(self, g) -> int:
        return len(cyclically_reduce(g))

    def ball_size(self, radius: int) -> int:
        if self.m == 1:
            return 2 * radius + 1
        k = 2 * self.m
        return 1 + k * ((k - 1) ** radius - 1) // (k - 2)

    def _check_ball_size(self, radius: int) -> None:
        if self.ball_size(radius) > self.cap:
            raise CapExceeded(f"ball({radius}) of F_{self.m} exceeds cap {self.cap}")

    def token_name(self, t: int) -> str:
        return f"g{abs(t) - 1}" + ("^-1" if t < 0 else "")

    def parse_token(self, name: str) -> int:
        name = name.strip()
        neg = name.endswith("^-1")
        base = name[:-3] if neg else name
        if not (base.startswith("g") and base[1:].isdigit()):
            raise GroupError(f"bad token {name!r}")
        i = int(base[1:])
        if i >= self.m:
            raise GroupError(f"token {name!r} not in generating set of F_{self.m}")
        return -(i + 1) if neg else i + 1

    def format(self, g) -> str:
        return " ".join(self.token_name(t) for t in g) if g else "e"

    def parse(self, text: str):
        text = text.strip()
        if text in ("", "e"):
            return ()
        return reduce_word(self.parse_token(s) for s in text.split())


class FiniteGroup(Group):
    """Finite group given by its multiplication table ``table[g][h] = g*h``."""

    def __init__(self, table: Sequence[Sequence[int]], generators: Sequence[int],
                 cap: int = DEFAULT_CAP):
        n = len(table)
        if n == 0 or any(len(row) != n for row in table):
            raise GroupError("multiplication table must be square and nonempty")
        self.table = tuple(tuple(int(x) for x in row) for row in table)
        self.order = n
        self.cap = cap
        for row in self.table:
            for x in row:
                if not 0 <= x < n:
                    raise GroupError(f"table entry {x} out of range")
        ident = [e for e in range(n)
                 if all(self.table[e][x] == x and self.table[x][e] == x for x in range(n))]
        if not ident:
            raise GroupError("table has no identity element")
        self.identity = ident[0]
        self._inv = []
        for g in range(n):
            hs = [h for h in range(n) if self.table[g][h] == self.identity]
            if len(hs) != 1:
                raise GroupError(f"element {g} has no unique inverse")
            self._inv.append(hs[0])
        gens = []
        for s in generators:
            s = int(s)
            if not 0 <= s < n:
                raise GroupError(f"generator {s} out of range")
            if s == self.identity:
                raise GroupError("the identity is not allowed as a generator")
            if s not in gens:
                gens.append(s)
        if not gens:
            raise GroupError("empty generating set")
        for s in gens:
            if self._inv[s] not in gens:
                raise GroupError(f"generating set not symmetric: inverse of {s} missing")
        self.tokens = tuple(gens)
        self._bfs()

    def __repr__(self) -> str:
        return f"FiniteGroup(order={self.order}, S={list(self.tokens)})"

    def _bfs(self) -> None:
        dist = {self.identity: 0}
        word = {self.identity: ()}
        queue = deque([self.identity])
        while queue:
            g = queue.popleft()
            for t in self.tokens:
                h = self.table[g][t]
                if h not in dist:
                    dist[h] = dist[g] + 1
                    word[h] = word[g] + (t,)
                    queue.append(h)
        if len(dist) != self.order:
            raise GroupError("generators do not generate the group")
        self._dist = dist
        self._word = word

    def check_associative(self) -> bool:
        t = self.table
        r = range(self.order)
        return all(t[t[a][b]][c] == t[a][t[b][c]] for a in r for b in r for c in r)

    def token_inverse(self, t: int) -> int:
        return self._inv[t]

    def is_involutive(self, t: int) -> bool:
        return self._inv[t] == t

    def _validate(self, g) -> None:
        if not (isinstance(g, int) and 0 <= g < self.order):
            raise GroupError(f"{g!r} is not an element of this group")

    def multiply(self, g, h):
        self._validate(g)
        self._validate(h)
        return self.table[g][h]

    def inverse(self, g):
        self._validate(g)
        return self._inv[g]

    def step(self, g, t):
        if t not in self.tokens:
            raise GroupError(f"token {t!r} not in generating set")
        return self.table[g][t]

    def word_of(self, g):
        self._validate(g)
        return self._word[g]

    def word_length(self, g) -> int:
        self._validate(g)
        return self._dist[g]

    def conjugacy_class(self, g) -> set[int]:
        return {self.table[self.table[h][g]][self._inv[h]] for h in range(self.order)}

    def conjugacy_length(self, g) -> int:
        return min(self._dist[c] for c in self.conjugacy_class(g))

    def token_name(self, t: int) -> str:
        return f"g{t}"

    def parse_token(self, name: str) -> int:
        name = name.strip()
        if not (name.startswith("g") and name[1:].isdigit()):
            raise GroupError(f"bad token {name!r}")
        t = int(name[1:])
        if t not in self.tokens:
            raise GroupError(f"token {name!r} not in generating set")
        return t

    def format(self, g) -> str:
        return str(g)

    def parse(self, text: str):
        g = int(text)
        self._validate(g)
        return g


def cyclic_group(n: int, generators: Sequence[int] = (1,)) -> FiniteGroup:
    """Z/n with the symmetric closure of ``generators``."""
    gens = set()
    for s in generators:
        gens.add(s % n)
        gens.add((-s) % n)
    table = [[(i + j) % n for j in range(n)] for i in range(n)]
    return FiniteGroup(table, sorted(gens))


def klein_four() -> FiniteGroup:
    table = [[i ^ j for j in range(4)] for i in range(4)]
    return FiniteGroup(table, [1, 2, 3])
