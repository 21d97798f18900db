"""Euler-Bernoulli frame elements with polynomial area dependence.

Element stiffness splits into a membrane part, linear in the cross-section
area, and a bending part whose degree (1, 2 or 3) is fixed by the section
scaling rule.  Assembly produces, per loadcase, the coefficient matrices of

    K(a) = sum_e a_e K1[e] + a_e^2 K2[e] + a_e^3 K3[e]
    M(a) = M0 + sum_e a_e M1[e]

on the free dofs, with one coefficient slot per design group.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .model import DOF_NAMES, FrameModel, LoadCase

RANK_TOL = 1e-8  # relative eigenvalue threshold shared by kernel/image tests


def element_matrices(xa, ya, xb, yb, material, section):
    """Local 6x6 coefficient matrices {k1, k2, k3, m1} in global coordinates.

    Dof order (uxa, uya, rza, uxb, uyb, rzb).  K(a) = a k1 + a² k2 + a³ k3,
    M(a) = a m1.  Closed-form Hermite/linear shape-function stencils.
    """
    dx, dy = xb - xa, yb - ya
    length = math.hypot(dx, dy)
    if length <= 0.0:
        raise ValueError("zero-length element")
    e_mod, rho = material.e_mod, material.rho
    if section.scaling not in ("uniform", "width", "depth"):
        raise ValueError(f"unknown scaling rule '{section.scaling}'")

    c, s = dx / length, dy / length
    t = np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])
    rot = np.zeros((6, 6))
    rot[:3, :3] = t
    rot[3:, 3:] = t

    def to_global(local):
        return rot.T @ local @ rot

    # membrane, linear in a
    k_m = np.zeros((6, 6))
    k_ax = (e_mod / length) * np.array([[1.0, -1.0], [-1.0, 1.0]])
    ax = np.ix_((0, 3), (0, 3))
    k_m[ax] = k_ax

    # bending, degree p in a with coefficient E i0 / a0**p
    ell = length
    k_b = np.zeros((6, 6))
    bend = np.array(
        [
            [12.0, 6.0 * ell, -12.0, 6.0 * ell],
            [6.0 * ell, 4.0 * ell**2, -6.0 * ell, 2.0 * ell**2],
            [-12.0, -6.0 * ell, 12.0, -6.0 * ell],
            [6.0 * ell, 2.0 * ell**2, -6.0 * ell, 4.0 * ell**2],
        ]
    ) / ell**3
    bd = np.ix_((1, 2, 4, 5), (1, 2, 4, 5))
    power = section.bending_power
    k_b[bd] = (e_mod * section.i0 / section.a0**power) * bend

    # consistent mass, linear in a
    m_loc = np.zeros((6, 6))
    m_loc[ax] = (rho * ell / 420.0) * np.array([[140.0, 70.0], [70.0, 140.0]])
    m_loc[bd] = (rho * ell / 420.0) * np.array(
        [
            [156.0, 22.0 * ell, 54.0, -13.0 * ell],
            [22.0 * ell, 4.0 * ell**2, 13.0 * ell, -3.0 * ell**2],
            [54.0, 13.0 * ell, 156.0, -22.0 * ell],
            [-13.0 * ell, -3.0 * ell**2, -22.0 * ell, 4.0 * ell**2],
        ]
    )

    out = {"k1": to_global(k_m), "k2": np.zeros((6, 6)), "k3": np.zeros((6, 6)),
           "m1": to_global(m_loc)}
    out[f"k{power}"] = out[f"k{power}"] + to_global(k_b)
    return out


@dataclass
class SubElement:
    group: int
    xa: float
    ya: float
    xb: float
    yb: float
    material: object
    section: object
    node_a: object   # refined-mesh node ids
    node_b: object


@dataclass
class RefinedMesh:
    node_ids: list          # deterministic order, model nodes first
    node_xy: dict
    subelements: list


def refine_mesh(model: FrameModel) -> RefinedMesh:
    """Split every design element into model.subelements equal pieces."""
    node_ids = [n.id for n in model.nodes]
    node_xy = {n.id: (n.x, n.y) for n in model.nodes}
    group_of = model.group_of_element()
    subs = []
    n_sub = model.subelements
    for el in model.elements:
        xa, ya = model.node_xy(el.node_a)
        xb, yb = model.node_xy(el.node_b)
        pts = [el.node_a]
        for k in range(1, n_sub):
            nid = ("sub", el.id, k)
            frac = k / n_sub
            node_xy[nid] = (xa + frac * (xb - xa), ya + frac * (yb - ya))
            node_ids.append(nid)
            pts.append(nid)
        pts.append(el.node_b)
        for a, b in zip(pts[:-1], pts[1:]):
            subs.append(
                SubElement(
                    group=group_of[el.id],
                    xa=node_xy[a][0], ya=node_xy[a][1],
                    xb=node_xy[b][0], yb=node_xy[b][1],
                    material=model.materials[el.material],
                    section=model.sections[el.section],
                    node_a=a, node_b=b,
                )
            )
    return RefinedMesh(node_ids=node_ids, node_xy=node_xy, subelements=subs)


@dataclass
class CaseOperators:
    """Assembled polynomial operators of one loadcase, on free dofs."""

    case: LoadCase
    n_dof: int
    dof_index: dict          # (node_id, dof_name) -> free dof index
    k1: np.ndarray           # (n_groups, n_dof, n_dof)
    k2: np.ndarray
    k3: np.ndarray
    m1: np.ndarray
    m0: np.ndarray           # (n_dof, n_dof)
    f: np.ndarray | None
    lambda_lb: float | None
    c_ub: float | None

    @property
    def n_groups(self):
        return self.k1.shape[0]

    @property
    def stiffness_degree(self):
        if np.any(self.k3):
            return 3
        if np.any(self.k2):
            return 2
        return 1


@dataclass
class ModelOperators:
    """Per-loadcase operators plus model-level weight coefficients."""

    cases: list
    group_weight: np.ndarray   # (n_groups,) sums of rho*l per group [kg/m²]
    group_ids: list
    mesh: RefinedMesh

    @property
    def n_groups(self):
        return len(self.group_ids)

    @property
    def stiffness_degree(self):
        return max(c.stiffness_degree for c in self.cases)

    def weight(self, a):
        return float(self.group_weight @ np.asarray(a, dtype=float))


def assemble(model: FrameModel, loadcase: LoadCase, mesh: RefinedMesh | None = None) -> CaseOperators:
    """Assemble one loadcase's operators on its free dofs."""
    if mesh is None:
        mesh = refine_mesh(model)
    constrained = set()
    for sup in loadcase.supports:
        for d in sup.dofs:
            constrained.add((sup.node, d))

    dof_index = {}
    for nid in mesh.node_ids:
        for d in DOF_NAMES:
            if (nid, d) not in constrained:
                dof_index[(nid, d)] = len(dof_index)
    n = len(dof_index)
    n_g = len(model.groups)

    k1 = np.zeros((n_g, n, n))
    k2 = np.zeros((n_g, n, n))
    k3 = np.zeros((n_g, n, n))
    m1 = np.zeros((n_g, n, n))

    for sub in mesh.subelements:
        mats = element_matrices(sub.xa, sub.ya, sub.xb, sub.yb, sub.material, sub.section)
        dofs = [
            dof_index.get((nid, d))
            for nid in (sub.node_a, sub.node_b)
            for d in DOF_NAMES
        ]
        keep = [i for i, ix in enumerate(dofs) if ix is not None]
        idx = np.array([dofs[i] for i in keep], dtype=int)
        sel = np.ix_(keep, keep)
        tgt = np.ix_(idx, idx)
        g = sub.group
        k1[g][tgt] += mats["k1"][sel]
        k2[g][tgt] += mats["k2"][sel]
        k3[g][tgt] += mats["k3"][sel]
        m1[g][tgt] += mats["m1"][sel]

    m0 = np.zeros((n, n))
    for pm in loadcase.masses:
        for d in loadcase.mass_dofs:
            ix = dof_index.get((pm.node, d))
            if ix is not None:
                m0[ix, ix] += pm.mass

    f = None
    if loadcase.has_static:
        f = np.zeros(n)
        for pf in loadcase.forces:
            for d, val in (("ux", pf.fx), ("uy", pf.fy), ("rz", pf.mz)):
                ix = dof_index.get((pf.node, d))
                if ix is not None:
                    f[ix] += val

    return CaseOperators(
        case=loadcase,
        n_dof=n,
        dof_index=dof_index,
        k1=k1, k2=k2, k3=k3, m1=m1, m0=m0,
        f=f,
        lambda_lb=loadcase.lambda_lb if loadcase.has_vibration else None,
        c_ub=loadcase.c_ub if loadcase.has_static else None,
    )


def assemble_all(model: FrameModel) -> ModelOperators:
    mesh = refine_mesh(model)
    cases = [assemble(model, lc, mesh) for lc in model.loadcases]
    weights = np.zeros(len(model.groups))
    group_of = model.group_of_element()
    for el in model.elements:
        mat = model.materials[el.material]
        weights[group_of[el.id]] += mat.rho * model.element_length(el)
    return ModelOperators(
        cases=cases,
        group_weight=weights,
        group_ids=[g.id for g in model.groups],
        mesh=mesh,
    )


def eval_operators(ops: CaseOperators, a):
    """Stiffness and mass matrices at areas a >= 0."""
    a = np.asarray(a, dtype=float)
    if np.any(a < 0):
        raise ValueError("negative area component")
    k = np.tensordot(a, ops.k1, 1)
    if np.any(ops.k2):
        k += np.tensordot(a**2, ops.k2, 1)
    if np.any(ops.k3):
        k += np.tensordot(a**3, ops.k3, 1)
    m = ops.m0 + np.tensordot(a, ops.m1, 1)
    return k, m


def range_split(mat, tol=RANK_TOL):
    """Orthonormal (range, kernel) bases of a symmetric PSD matrix."""
    w, v = scipy.linalg.eigh((mat + mat.T) / 2.0)
    top = float(np.abs(w).max()) if w.size else 0.0
    mask = w > tol * max(top, 1e-300)
    return v[:, mask], v[:, ~mask], w[mask]


def min_eigenvalue(ops: CaseOperators, a, tol=RANK_TOL):
    """Smallest generalized eigenvalue of (K(a), M(a)) over v outside Ker M.

    Restricts to the numerical range of M and eliminates massless directions
    through the Schur complement of K; returns +inf when M is numerically zero.
    """
    k, m = eval_operators(ops, a)
    r, nkern, wm = range_split(m, tol)
    if r.shape[1] == 0:
        return math.inf
    a_rr = r.T @ k @ r
    if nkern.shape[1]:
        b = r.T @ k @ nkern
        if np.abs(b).max() > 0:
            c = nkern.T @ k @ nkern
            wc, vc = scipy.linalg.eigh((c + c.T) / 2.0)
            topc = float(np.abs(wc).max()) if wc.size else 0.0
            pos = wc > tol * max(topc, 1e-300)
            if np.any(pos):
                bv = b @ vc[:, pos]
                a_rr = a_rr - bv @ np.diag(1.0 / wc[pos]) @ bv.T
    d = 1.0 / np.sqrt(wm)
    red = d[:, None] * a_rr * d[None, :]
    vals = scipy.linalg.eigvalsh((red + red.T) / 2.0)
    return float(vals[0])


def compliance(ops: CaseOperators, a, tol=RANK_TOL):
    """Compliance fᵀu and minimum-norm displacement u, or (+inf, None)."""
    if ops.f is None:
        raise ValueError("loadcase has no static part")
    f = ops.f
    k, _ = eval_operators(ops, a)
    fn = float(np.linalg.norm(f))
    if fn == 0.0:
        return 0.0, np.zeros_like(f)
    r, _, wk = range_split(k, tol)
    proj = r @ (r.T @ f)
    if np.linalg.norm(f - proj) > tol * fn:
        return math.inf, None
    u = r @ ((r.T @ f) / wk)
    return float(f @ u), u
