"""Shared tree builders for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from psrom.tree import CenterlineTree


def path_tree(radii, spacing=0.1, name="path") -> CenterlineTree:
    """Single unbranched vessel: point i at arc i*spacing with radii[i]."""
    radii = np.asarray(radii, dtype=float)
    n = radii.shape[0]
    parent = np.arange(-1, n - 1)
    arc = np.full(n, float(spacing))
    arc[0] = 0.0
    outlet = np.zeros(n, dtype=bool)
    outlet[-1] = True
    return CenterlineTree(name=name, source="test", parent=parent, arc_length=arc, radius=radii, is_outlet=outlet)


def fork_tree(trunk, left, right, spacing=0.1, name="fork") -> CenterlineTree:
    """Trunk radii followed by a bifurcation into two daughter radius lists."""
    trunk = list(map(float, trunk))
    left = list(map(float, left))
    right = list(map(float, right))
    nt, nl = len(trunk), len(left)
    parent, radius = [], []
    for i, r in enumerate(trunk):
        parent.append(i - 1)
        radius.append(r)
    for i, r in enumerate(left):
        parent.append(nt - 1 if i == 0 else nt + i - 1)
        radius.append(r)
    for i, r in enumerate(right):
        parent.append(nt - 1 if i == 0 else nt + nl + i - 1)
        radius.append(r)
    n = len(radius)
    arc = np.full(n, float(spacing))
    arc[0] = 0.0
    outlet = np.zeros(n, dtype=bool)
    outlet[nt + nl - 1] = True
    outlet[n - 1] = True
    return CenterlineTree(
        name=name,
        source="test",
        parent=np.asarray(parent),
        arc_length=arc,
        radius=np.asarray(radius, dtype=float),
        is_outlet=outlet,
    )


def random_tree(rng: np.random.Generator, max_depth=3, seg_points=(3, 7), radius0=None) -> CenterlineTree:
    """Small random bifurcating tree with distally non-increasing radii."""
    parent = [-1]
    radius = [float(radius0 if radius0 is not None else rng.uniform(0.12, 0.25))]
    arc = [0.0]
    outlet_flags = [False]

    def grow(tip: int, r: float, depth: int) -> None:
        n_seg = int(rng.integers(seg_points[0], seg_points[1] + 1))
        for _ in range(n_seg):
            parent.append(tip)
            r = r * float(rng.uniform(0.96, 1.0))
            radius.append(r)
            arc.append(float(rng.uniform(0.05, 0.3)))
            outlet_flags.append(False)
            tip = len(parent) - 1
        if depth <= 0 or rng.uniform() < 0.25:
            outlet_flags[tip] = True
            return
        for frac in rng.uniform(0.6, 0.85, size=2):
            grow(tip, r * float(frac), depth - 1)

    grow(0, radius[0], max_depth)
    return CenterlineTree(
        name="random",
        source="test",
        parent=np.asarray(parent),
        arc_length=np.asarray(arc),
        radius=np.asarray(radius),
        is_outlet=np.asarray(outlet_flags),
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260819)
