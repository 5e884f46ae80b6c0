#!/usr/bin/env python3
"""Generate and verify the built-in surface files under catalog/.

Every surface this script writes is verified before the file goes out:
unit norm, conformality, and (where claimed) minimality, symbolically when
sympy can close the form and otherwise numerically at random points with
50-digit arithmetic.  The cubic sphere's harmonic normalization constants
are computed from scratch here rather than hand-entered.

Run from the repository root:  python3 tools/make_catalog.py
"""

import random
import sys
from fractions import Fraction
from pathlib import Path

import mpmath as mp
import sympy as sp

x, y = sp.symbols("x y", real=True)
S = 1 + x**2 + y**2

# Inverse stereographic parametrization of the unit two-sphere.
N1, N2, N3 = 2 * x / S, 2 * y / S, (1 - x**2 - y**2) / S

OUT = Path(__file__).resolve().parent.parent / "catalog"


def dsl(expr):
    """Render a sympy expression in the surface-file grammar."""
    text = sp.sstr(sp.nsimplify(expr, rational=False))
    return text.replace("**", "^")


def write_surface(name, dim, components, domain=None, periodic=None, notes=()):
    lines = [f"# {line}" for line in notes]
    lines.append(f"dim {dim}")
    body = ",\n      ".join(dsl(c) for c in components)
    lines.append(f"f = ( {body} )")
    if domain is not None:
        (ax, bx), (ay, by) = domain
        lines.append(f"domain x in [{ax}, {bx}], y in [{ay}, {by}]")
    if periodic is not None:
        lines.append(f"periodic {periodic[0]} {periodic[1]}")
    path = OUT / f"{name}.crv"
    path.write_text("\n".join(lines) + "\n")
    print(f"wrote {path.relative_to(OUT.parent)}")


def check_symbolic(name, components, minimal=True, expect_F=None):
    f = sp.Matrix(components)
    norm2 = sp.simplify(f.dot(f))
    assert norm2 == 1, f"{name}: |f|^2 simplifies to {norm2}"
    fx, fy = f.diff(x), f.diff(y)
    assert sp.simplify(fx.dot(fy)) == 0, f"{name}: <fx,fy> != 0"
    assert sp.simplify(fx.dot(fx) - fy.dot(fy)) == 0, f"{name}: |fx| != |fy|"
    F = sp.simplify((fx.dot(fx) + fy.dot(fy)) / 2)
    if expect_F is not None:
        assert sp.simplify(F - expect_F) == 0, f"{name}: F = {F}"
    if minimal:
        res = sp.simplify(f.diff(x, 2) + f.diff(y, 2) + 2 * F * f)
        assert res == sp.zeros(len(components), 1), f"{name}: not minimal: {res}"
    print(f"verified (symbolic) {name}")
    return F


def check_numeric(name, components, minimal=True, points=20, seed=7):
    """Spot-check unit norm, conformality, minimality at random points."""
    mp.mp.dps = 50
    rng = random.Random(seed)
    f = sp.Matrix(components)
    fx, fy = f.diff(x), f.diff(y)
    F = (fx.dot(fx) + fy.dot(fy)) / 2
    lap = f.diff(x, 2) + f.diff(y, 2)
    exprs = {
        "unit": f.dot(f) - 1,
        "conf": fx.dot(fy),
        "iso": fx.dot(fx) - fy.dot(fy),
    }
    if minimal:
        for i in range(len(components)):
            exprs[f"min{i}"] = lap[i] + 2 * F * f[i]
    fns = {k: sp.lambdify((x, y), v, modules="mpmath") for k, v in exprs.items()}
    for _ in range(points):
        px, py = rng.uniform(-0.85, 0.85), rng.uniform(-0.85, 0.85)
        for k, fn in fns.items():
            v = abs(fn(mp.mpf(px), mp.mpf(py)))
            assert v < mp.mpf("1e-40"), f"{name}: {k} = {v} at ({px}, {py})"
    print(f"verified (numeric, {points} points) {name}")


def invert(components):
    """Compose with the coordinate inversion z -> 1/z (second atlas chart)."""
    r2 = x**2 + y**2
    return [sp.cancel(sp.together(c.subs({x: x / r2, y: -y / r2}, simultaneous=True)))
            for c in components]


# ---------------------------------------------------------------------------
# Totally geodesic spheres.
# ---------------------------------------------------------------------------

geodesic = [N1, N2, N3]
check_symbolic("geodesic_s2", geodesic, expect_F=4 / S**2)
geodesic2 = invert(geodesic)
check_symbolic("geodesic_s2_chart2", geodesic2)
write_surface("geodesic_s2", 3, geodesic, domain=((-3, 3), (-3, 3)),
              notes=["Great two-sphere, inverse stereographic chart."])
write_surface("geodesic_s2_chart2", 3, geodesic2, domain=((-3, 3), (-3, 3)),
              notes=["Great two-sphere, chart after the inversion z -> 1/z."])

zero = sp.Integer(0) * x
assoc = [N1, N2, N3, zero, zero, zero, zero]
check_symbolic("assoc_s2", assoc)
assoc2 = [c if isinstance(c, sp.Integer) or c == zero else c for c in invert(assoc)]
check_symbolic("assoc_s2_chart2", assoc2)
write_surface("assoc_s2", 7, assoc, domain=((-3, 3), (-3, 3)),
              notes=["Great two-sphere spanned by the first three imaginary",
                     "units, a multiplication-closed triple."])
write_surface("assoc_s2_chart2", 7, assoc2, domain=((-3, 3), (-3, 3)),
              notes=["Second chart of assoc_s2 (inversion z -> 1/z)."])

# Same image with the opposite orientation: the cross-product alignment test
# must flag it even though every metric invariant matches.
assoc_rev = [c.subs(y, -y) for c in assoc]
check_symbolic("assoc_s2_reversed", assoc_rev)
write_surface("assoc_s2_reversed", 7, assoc_rev, domain=((-3, 3), (-3, 3)),
              notes=["Orientation-reversed copy of assoc_s2."])

# ---------------------------------------------------------------------------
# Flat tori.
# ---------------------------------------------------------------------------

sq2, sq3 = sp.sqrt(2), sp.sqrt(3)
u1 = sq2 * x
u2 = sq2 * (-x / 2 + sq3 * y / 2)
u3 = sq2 * (-x / 2 - sq3 * y / 2)
flat_torus = [sp.cos(u1) / sq3, sp.sin(u1) / sq3,
              sp.cos(u2) / sq3, sp.sin(u2) / sq3,
              sp.cos(u3) / sq3, sp.sin(u3) / sq3]
check_symbolic("flat_torus_s5", flat_torus, expect_F=1)
# Periods: u1 advances by 2 pi when x advances by 2 pi / sqrt(2) = pi sqrt(2),
# but u2 and u3 need the joint lattice; the fundamental cell below is the
# smallest rectangle closing all three phases.
Lx = 2 * sp.pi * sq2
Ly = 2 * sp.pi * sq2 / sq3
assert all(sp.simplify(c.subs(x, x + Lx) - c) == 0 for c in flat_torus)
assert all(sp.simplify(c.subs(y, y + Ly) - c) == 0 for c in flat_torus)
write_surface("flat_torus_s5", 6, flat_torus,
              periodic=(float(Lx), float(Ly)),
              notes=["Equilateral flat torus on three phase directions."])

clifford = [sp.cos(sq2 * x) / sq2, sp.sin(sq2 * x) / sq2,
            sp.cos(sq2 * y) / sq2, sp.sin(sq2 * y) / sq2]
check_symbolic("clifford_s3", clifford, expect_F=1)
Lc = 2 * sp.pi / sq2
write_surface("clifford_s3", 4, clifford,
              periodic=(float(Lc), float(Lc)),
              notes=["Square Clifford torus in the three-sphere."])

# Flat torus precomposed with holomorphic coordinate changes.  Composition
# with a holomorphic map preserves conformality and minimality; the numeric
# oracle re-checks the composed forms directly.
warp_u = x + sp.Rational(3, 10) * (x**2 - y**2)
warp_v = y + sp.Rational(3, 5) * x * y
torus_warp = [c.subs({x: warp_u, y: warp_v}, simultaneous=True) for c in flat_torus]
check_numeric("torus_warp", torus_warp)
write_surface("torus_warp", 6, torus_warp, domain=((-1, 1), (-1, 1)),
              notes=["Flat torus after the coordinate change",
                     "z -> z + 0.3 z^2 (injective on the square)."])

branch_u = x**2 - y**2
branch_v = 2 * x * y
torus_branch = [c.subs({x: branch_u, y: branch_v}, simultaneous=True)
                for c in flat_torus]
check_numeric("torus_branch", torus_branch)
write_surface("torus_branch", 6, torus_branch, domain=((-0.9, 0.9), (-0.9, 0.9)),
              notes=["Flat torus after z -> z^2: a double cover branched",
                     "at the origin."])

# ---------------------------------------------------------------------------
# Quadratic sphere in the four-sphere.
# ---------------------------------------------------------------------------

veronese4 = [
    4 * sq3 * x * y / S**2,
    2 * sq3 * x * (1 - x**2 - y**2) / S**2,
    2 * sq3 * y * (1 - x**2 - y**2) / S**2,
    2 * sq3 * (x**2 - y**2) / S**2,
    (2 * (x**2 + y**2) - (1 - x**2 - y**2) ** 2) / S**2,
]
check_symbolic("veronese_s4", veronese4, expect_F=12 / S**2)
veronese4_2 = invert(veronese4)
check_symbolic("veronese_s4_chart2", veronese4_2)
write_surface("veronese_s4", 5, veronese4, domain=((-3, 3), (-3, 3)),
              notes=["Quadratic sphere of curvature 1/3."])
write_surface("veronese_s4_chart2", 5, veronese4_2, domain=((-3, 3), (-3, 3)),
              notes=["Second chart of veronese_s4 (inversion z -> 1/z)."])

# ---------------------------------------------------------------------------
# Cubic sphere in the six-sphere: degree-3 harmonics, normalization computed.
# ---------------------------------------------------------------------------

w1, w2, w3 = sp.symbols("w1 w2 w3", real=True)
cubics = [
    w3 * (2 * w3**2 - 3 * w1**2 - 3 * w2**2),
    w1 * (4 * w3**2 - w1**2 - w2**2),
    w2 * (4 * w3**2 - w1**2 - w2**2),
    w3 * (w1**2 - w2**2),
    w1 * w2 * w3,
    w1 * (w1**2 - 3 * w2**2),
    w2 * (3 * w1**2 - w2**2),
]
for h in cubics:
    lap3 = sum(h.diff(w, 2) for w in (w1, w2, w3))
    assert sp.expand(lap3) == 0, f"not harmonic: {h}"

theta, phi = sp.symbols("theta phi", real=True)
sphere_sub = {w1: sp.sin(theta) * sp.cos(phi),
              w2: sp.sin(theta) * sp.sin(phi),
              w3: sp.cos(theta)}


def sphere_integral(expr):
    e = sp.expand_trig(sp.expand(expr.subs(sphere_sub))) * sp.sin(theta)
    return sp.integrate(sp.integrate(e, (phi, 0, 2 * sp.pi)), (theta, 0, sp.pi))


norms2 = [sphere_integral(h**2) for h in cubics]
for i in range(len(cubics)):
    for j in range(i + 1, len(cubics)):
        assert sphere_integral(cubics[i] * cubics[j]) == 0, (i, j)

# Components sqrt(4 pi / 7) * h / ||h||: by the addition theorem the squared
# norms then sum to one on the sphere.
coeffs = [sp.sqrt(4 * sp.pi / 7 / n2) for n2 in norms2]
print("cubic normalization:", [sp.sstr(sp.nsimplify(c)) for c in coeffs])
veronese6 = [
    sp.cancel(sp.together((c * h).subs({w1: N1, w2: N2, w3: N3}, simultaneous=True)))
    for c, h in zip(coeffs, cubics)
]
check_symbolic("veronese3_s6", veronese6, expect_F=24 / S**2)
veronese6_2 = invert(veronese6)
check_symbolic("veronese3_s6_chart2", veronese6_2)
write_surface("veronese3_s6", 7, veronese6, domain=((-3, 3), (-3, 3)),
              notes=["Cubic sphere of curvature 1/6, from an orthonormal",
                     "basis of degree-3 harmonics (constants computed by",
                     "tools/make_catalog.py)."])
write_surface("veronese3_s6_chart2", 7, veronese6_2, domain=((-3, 3), (-3, 3)),
              notes=["Second chart of veronese3_s6 (inversion z -> 1/z)."])

# ---------------------------------------------------------------------------
# Non-minimal control: a distance sphere of radius 4/5.
# ---------------------------------------------------------------------------

c_, s_ = sp.Rational(4, 5), sp.Rational(3, 5)
small = [c_ * N1, c_ * N2, c_ * N3, s_ + 0 * x]
f = sp.Matrix(small)
assert sp.simplify(f.dot(f)) == 1
fx, fy = f.diff(x), f.diff(y)
assert sp.simplify(fx.dot(fy)) == 0
F_small = sp.simplify((fx.dot(fx) + fy.dot(fy)) / 2)
res = f.diff(x, 2) + f.diff(y, 2) + 2 * F_small * f
ratio2 = sp.simplify(res.dot(res) / (4 * F_small**2))
assert ratio2 == sp.Rational(9, 16), ratio2  # mean-curvature ratio 3/4, squared
print("verified (symbolic) smallsphere_s3: mean-curvature ratio 3/4")
write_surface("smallsphere_s3", 4, small, domain=((-1.2, 1.2), (-1.2, 1.2)),
              notes=["Distance sphere of radius 4/5: constant curvature",
                     "25/16, not minimal (control entry)."])

print("all surfaces verified")
