"""Atomic prior representations.

Continuous priors are discretized once, up front, by Gauss-Hermite quadrature
of their continuous component; after that every scalar expectation in the
package is an exact finite sum over atoms.  The only approximation is the
quadrature itself, which is testable against Gaussian closed forms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_QUAD_NODES = 101


def _gauss_hermite_standard_normal(n_nodes: int):
    """Nodes and weights for E_{z~N(0,1)}[f(z)] ~= sum_i w_i f(z_i)."""
    nodes, weights = np.polynomial.hermite_e.hermegauss(n_nodes)
    return nodes, weights / np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class Prior:
    """Finite atomic measure standing in for the coordinate prior.

    ``zero_spike_weight`` is the prior mass at exactly 0 that belongs to a
    discrete spike (as opposed to quadrature nodes of a continuous component
    that happen to land at 0).  It is what posterior inclusion probabilities
    condition on.
    """

    locations: np.ndarray
    weights: np.ndarray
    kind: str  # "explicit-discrete" | "quadrature-of-continuous"
    source_descriptor: str
    zero_spike_weight: float = 0.0
    # sampling recipe for drawing exact (non-quadrature) signals:
    # ("atoms",) or ("bernoulli-gaussian", sparsity, variance)
    sampler: tuple = ("atoms",)
    log_weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        locs = np.asarray(self.locations, dtype=np.float64)
        w = np.asarray(self.weights, dtype=np.float64)
        if locs.ndim != 1 or w.shape != locs.shape:
            raise ValueError("locations and weights must be 1-d arrays of equal length")
        if not np.all(np.isfinite(locs)):
            raise ValueError("prior locations must be finite")
        if np.any(w <= 0):
            raise ValueError("prior weights must be strictly positive")
        order = np.argsort(locs)
        locs, w = locs[order], w[order]
        # merge duplicate locations
        keep_locs, keep_w = [locs[0]], [w[0]]
        for a, wt in zip(locs[1:], w[1:]):
            if a == keep_locs[-1]:
                keep_w[-1] += wt
            else:
                keep_locs.append(a)
                keep_w.append(wt)
        locs = np.array(keep_locs)
        w = np.array(keep_w)
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"prior weights must sum to 1, got {w.sum()!r}")
        if len(locs) < 3:
            raise ValueError("prior needs at least 3 distinct support points")
        object.__setattr__(self, "locations", locs)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "log_weights", np.log(w))
        locs.setflags(write=False)
        w.setflags(write=False)
        self.log_weights.setflags(write=False)

    @property
    def support_lo(self) -> float:
        return float(self.locations[0])

    @property
    def support_hi(self) -> float:
        return float(self.locations[-1])

    @property
    def mean(self) -> float:
        return float(self.weights @ self.locations)

    @property
    def second_moment(self) -> float:
        return float(self.weights @ self.locations**2)

    @property
    def variance(self) -> float:
        return self.second_moment - self.mean**2

    def zero_spike_fraction_of_atom(self) -> float:
        """Fraction of the weight of the atom at 0 attributable to the spike."""
        idx = np.flatnonzero(self.locations == 0.0)
        if len(idx) == 0 or self.zero_spike_weight == 0.0:
            return 0.0
        return self.zero_spike_weight / float(self.weights[idx[0]])

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        """Draw iid signal coordinates, sampling continuous parts exactly."""
        if self.sampler[0] == "bernoulli-gaussian":
            _, sparsity, variance = self.sampler
            mask = rng.random(size) < sparsity
            out = np.zeros(size)
            out[mask] = rng.normal(0.0, np.sqrt(variance), size=int(mask.sum()))
            return out
        return rng.choice(self.locations, size=size, p=self.weights)


def three_point() -> Prior:
    """Uniform on {-1, 0, 1}."""
    return Prior(
        locations=np.array([-1.0, 0.0, 1.0]),
        weights=np.array([1.0, 1.0, 1.0]) / 3.0,
        kind="explicit-discrete",
        source_descriptor="three-point",
        zero_spike_weight=1.0 / 3.0,
    )


def point_mass_prior(pairs, descriptor=None) -> Prior:
    locs = np.array([v for v, _ in pairs], dtype=np.float64)
    w = np.array([wt for _, wt in pairs], dtype=np.float64)
    spike0 = float(w[locs == 0.0].sum())
    desc = descriptor or "point-mass:" + ";".join(f"{v:g},{wt:g}" for v, wt in pairs)
    return Prior(
        locations=locs,
        weights=w,
        kind="explicit-discrete",
        source_descriptor=desc,
        zero_spike_weight=spike0,
    )


def bernoulli_gaussian(sparsity: float, variance: float,
                       n_nodes: int = DEFAULT_QUAD_NODES) -> Prior:
    """(1 - sparsity) * delta_0 + sparsity * N(0, variance), via quadrature."""
    if not 0.0 < sparsity <= 1.0:
        raise ValueError("sparsity must be in (0, 1]")
    if variance <= 0:
        raise ValueError("variance must be positive")
    nodes, w = _gauss_hermite_standard_normal(n_nodes)
    locs = nodes * np.sqrt(variance)
    weights = w * sparsity
    if sparsity < 1.0:
        locs = np.append(locs, 0.0)
        weights = np.append(weights, 1.0 - sparsity)
    weights = weights / weights.sum()  # absorb quadrature round-off
    return Prior(
        locations=locs,
        weights=weights,
        kind="quadrature-of-continuous",
        source_descriptor=f"bernoulli-gaussian({sparsity:g}, {variance:g})",
        zero_spike_weight=(1.0 - sparsity),
        sampler=("bernoulli-gaussian", sparsity, variance),
    )


def gaussian_prior(variance: float, n_nodes: int = DEFAULT_QUAD_NODES) -> Prior:
    """N(0, variance) as a pure quadrature prior."""
    return bernoulli_gaussian(1.0, variance, n_nodes=n_nodes)


def parse_prior(descriptor: str) -> Prior:
    """Parse the CLI prior descriptors.

    Grammar: ``three-point``, ``point-mass:<v1,w1;v2,w2;...>``,
    ``bernoulli-gaussian:<sparsity>,<variance>``.
    """
    text = descriptor.strip()
    if text == "three-point":
        return three_point()
    if text.startswith("point-mass:"):
        body = text[len("point-mass:"):]
        pairs = []
        for chunk in body.split(";"):
            v, w = chunk.split(",")
            pairs.append((float(v), float(w)))
        return point_mass_prior(pairs, descriptor=text)
    if text.startswith("bernoulli-gaussian:"):
        body = text[len("bernoulli-gaussian:"):]
        sparsity, variance = (float(x) for x in body.split(","))
        return bernoulli_gaussian(sparsity, variance)
    raise ValueError(f"unrecognized prior descriptor: {descriptor!r}")
