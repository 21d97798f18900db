"""Frame model description: parsing, validation and serialization.

Models are plain YAML (or JSON) documents with top-level keys ``nodes``,
``materials``, ``sections``, ``elements``, ``groups``, ``loadcases``, ``mesh``
and ``solver``.  All numeric fields are SI: meters, Pascal, kg, N, rad²/s².
The full schema is documented in the repository README.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import yaml

DOF_NAMES = ("ux", "uy", "rz")
SCALING_RULES = ("uniform", "width", "depth")
LOADCASE_KINDS = ("static", "free_vibration", "both")


class ModelError(ValueError):
    """Raised when a model document cannot be turned into a valid FrameModel."""

    def __init__(self, message, locus=None):
        self.locus = locus
        super().__init__(f"{locus}: {message}" if locus else message)


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    locus: str
    message: str


@dataclass(frozen=True)
class Material:
    id: object
    e_mod: float  # Young modulus [Pa]
    rho: float    # density [kg/m³]


@dataclass(frozen=True)
class Section:
    """Cross-section family: reference area/inertia plus a scaling rule.

    The rule fixes how the second moment follows the area,
    I(a) = i0 * (a / a0)**p with p = 1 (width), 2 (uniform) or 3 (depth).
    """

    id: object
    a0: float  # reference area [m²]
    i0: float  # reference second moment [m⁴]
    scaling: str = "uniform"

    @property
    def bending_power(self):
        return {"width": 1, "uniform": 2, "depth": 3}[self.scaling]


@dataclass(frozen=True)
class Node:
    id: object
    x: float
    y: float


@dataclass(frozen=True)
class Element:
    id: object
    node_a: object
    node_b: object
    material: object
    section: object


@dataclass(frozen=True)
class Support:
    node: object
    dofs: tuple  # subset of DOF_NAMES


@dataclass(frozen=True)
class PointForce:
    node: object
    fx: float = 0.0
    fy: float = 0.0
    mz: float = 0.0


@dataclass(frozen=True)
class PointMass:
    node: object
    mass: float


@dataclass(frozen=True)
class LoadCase:
    id: object
    kind: str  # "static" | "free_vibration" | "both"
    supports: tuple = ()
    forces: tuple = ()
    masses: tuple = ()
    lambda_lb: float | None = None  # eigenvalue lower bound [rad²/s²]
    c_ub: float | None = None       # compliance upper bound [J]
    mass_dofs: tuple = ("ux", "uy")

    @property
    def has_static(self):
        return self.kind in ("static", "both")

    @property
    def has_vibration(self):
        return self.kind in ("free_vibration", "both")


@dataclass(frozen=True)
class Group:
    id: object
    elements: tuple


@dataclass
class FrameModel:
    name: str
    nodes: list
    elements: list
    materials: dict
    sections: dict
    groups: list
    loadcases: list
    subelements: int = 2
    solver: dict = field(default_factory=dict)

    def node_xy(self, node_id):
        return self._node_map[node_id]

    def __post_init__(self):
        self._node_map = {n.id: (n.x, n.y) for n in self.nodes}

    @property
    def n_groups(self):
        return len(self.groups)

    def element_length(self, el: Element):
        xa, ya = self.node_xy(el.node_a)
        xb, yb = self.node_xy(el.node_b)
        return math.hypot(xb - xa, yb - ya)

    def group_of_element(self):
        """Map element id -> group index."""
        out = {}
        for gi, g in enumerate(self.groups):
            for eid in g.elements:
                out[eid] = gi
        return out

    def with_subelements(self, n):
        m = replace(self, subelements=int(n))
        m.__post_init__()
        return m


def _req(mapping, key, locus):
    if not isinstance(mapping, dict) or key not in mapping:
        raise ModelError(f"missing required field '{key}'", locus)
    return mapping[key]


def _num(value, key, locus):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ModelError(f"field '{key}' must be a number, got {value!r}", locus)
    return float(value)


def _parse_supports(raw, locus):
    out = []
    for i, s in enumerate(raw or []):
        node = _req(s, "node", f"{locus}[{i}]")
        dofs = _req(s, "dofs", f"{locus}[{i}]")
        for d in dofs:
            if d not in DOF_NAMES:
                raise ModelError(f"unknown dof '{d}'", f"{locus}[{i}]")
        out.append(Support(node=node, dofs=tuple(dofs)))
    return tuple(out)


def _parse_loadcase(raw, idx):
    locus = f"loadcases[{idx}]"
    kind = _req(raw, "kind", locus)
    if kind not in LOADCASE_KINDS:
        raise ModelError(f"unknown loadcase kind '{kind}'", locus)
    forces = tuple(
        PointForce(
            node=_req(f, "node", f"{locus}.forces[{i}]"),
            fx=_num(f.get("fx", 0.0), "fx", f"{locus}.forces[{i}]"),
            fy=_num(f.get("fy", 0.0), "fy", f"{locus}.forces[{i}]"),
            mz=_num(f.get("mz", 0.0), "mz", f"{locus}.forces[{i}]"),
        )
        for i, f in enumerate(raw.get("forces") or [])
    )
    masses = tuple(
        PointMass(
            node=_req(m, "node", f"{locus}.masses[{i}]"),
            mass=_num(_req(m, "mass", f"{locus}.masses[{i}]"), "mass", locus),
        )
        for i, m in enumerate(raw.get("masses") or [])
    )
    lam = raw.get("lambda_lb")
    cub = raw.get("c_ub")
    mass_dofs = tuple(raw.get("mass_dofs", ("ux", "uy")))
    for d in mass_dofs:
        if d not in ("ux", "uy"):
            raise ModelError(f"mass_dofs entries must be translations, got '{d}'", locus)
    return LoadCase(
        id=raw.get("id", idx),
        kind=kind,
        supports=_parse_supports(raw.get("supports"), f"{locus}.supports"),
        forces=forces,
        masses=masses,
        lambda_lb=None if lam is None else _num(lam, "lambda_lb", locus),
        c_ub=None if cub is None else _num(cub, "c_ub", locus),
        mass_dofs=mass_dofs,
    )


def parse_model(text: str) -> FrameModel:
    """Parse a model document, returning a validated FrameModel.

    Raises ModelError on schema violations, dangling references or any
    failed model invariant.
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ModelError(f"not a well-formed document: {exc}") from None
    if not isinstance(doc, dict):
        raise ModelError("document root must be a mapping")

    nodes = []
    for i, n in enumerate(_req(doc, "nodes", "document")):
        locus = f"nodes[{i}]"
        nodes.append(
            Node(
                id=_req(n, "id", locus),
                x=_num(_req(n, "x", locus), "x", locus),
                y=_num(_req(n, "y", locus), "y", locus),
            )
        )

    materials = {}
    for i, m in enumerate(_req(doc, "materials", "document")):
        locus = f"materials[{i}]"
        mat = Material(
            id=_req(m, "id", locus),
            e_mod=_num(_req(m, "E", locus), "E", locus),
            rho=_num(_req(m, "rho", locus), "rho", locus),
        )
        materials[mat.id] = mat

    sections = {}
    for i, s in enumerate(_req(doc, "sections", "document")):
        locus = f"sections[{i}]"
        scaling = s.get("scaling", "uniform")
        if scaling not in SCALING_RULES:
            raise ModelError(f"unknown scaling rule '{scaling}'", locus)
        sec = Section(
            id=_req(s, "id", locus),
            a0=_num(_req(s, "a0", locus), "a0", locus),
            i0=_num(_req(s, "i0", locus), "i0", locus),
            scaling=scaling,
        )
        sections[sec.id] = sec

    elements = []
    for i, e in enumerate(_req(doc, "elements", "document")):
        locus = f"elements[{i}]"
        nd = _req(e, "nodes", locus)
        if not isinstance(nd, (list, tuple)) or len(nd) != 2:
            raise ModelError("'nodes' must list exactly two node ids", locus)
        elements.append(
            Element(
                id=_req(e, "id", locus),
                node_a=nd[0],
                node_b=nd[1],
                material=_req(e, "material", locus),
                section=_req(e, "section", locus),
            )
        )

    groups = []
    raw_groups = doc.get("groups")
    if raw_groups:
        for i, g in enumerate(raw_groups):
            locus = f"groups[{i}]"
            groups.append(
                Group(id=g.get("id", i), elements=tuple(_req(g, "elements", locus)))
            )
    else:
        # default: one design variable per element
        groups = [Group(id=e.id, elements=(e.id,)) for e in elements]

    loadcases = [_parse_loadcase(lc, i) for i, lc in enumerate(_req(doc, "loadcases", "document"))]

    mesh = doc.get("mesh") or {}
    subelements = mesh.get("subelements_per_design_element", 2)
    if not isinstance(subelements, int) or subelements < 1:
        raise ModelError("subelements_per_design_element must be a positive integer", "mesh")

    model = FrameModel(
        name=str(doc.get("name", "")),
        nodes=nodes,
        elements=elements,
        materials=materials,
        sections=sections,
        groups=groups,
        loadcases=loadcases,
        subelements=subelements,
        solver=doc.get("solver") or {},
    )

    errors = [d for d in validate(model) if d.severity == "error"]
    if errors:
        first = errors[0]
        raise ModelError(
            first.message + ("" if len(errors) == 1 else f" (+{len(errors) - 1} more)"),
            first.locus,
        )
    return model


def load_model(path) -> FrameModel:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_model(fh.read())


def validate(model: FrameModel) -> list:
    """Check all model invariants; returns a list of diagnostics (empty if valid)."""
    diags = []
    err = lambda locus, msg: diags.append(Diagnostic("error", locus, msg))

    node_ids = {n.id for n in model.nodes}
    if len(node_ids) != len(model.nodes):
        err("nodes", "duplicate node ids")

    for mat in model.materials.values():
        if mat.e_mod <= 0:
            err(f"materials[{mat.id}]", "nonpositive Young modulus")
        if mat.rho <= 0:
            err(f"materials[{mat.id}]", "nonpositive density")
    for sec in model.sections.values():
        if sec.a0 <= 0:
            err(f"sections[{sec.id}]", "nonpositive reference area")
        if sec.i0 <= 0:
            err(f"sections[{sec.id}]", "nonpositive reference second moment")

    elem_ids = set()
    for el in model.elements:
        locus = f"elements[{el.id}]"
        if el.id in elem_ids:
            err(locus, "duplicate element id")
        elem_ids.add(el.id)
        dangling = False
        for nid in (el.node_a, el.node_b):
            if nid not in node_ids:
                err(locus, f"reference to unknown node '{nid}'")
                dangling = True
        if el.material not in model.materials:
            err(locus, f"reference to unknown material '{el.material}'")
        if el.section not in model.sections:
            err(locus, f"reference to unknown section '{el.section}'")
        if not dangling and model.element_length(el) <= 0.0:
            err(locus, "zero-length element")

    seen = set()
    for g in model.groups:
        for eid in g.elements:
            if eid not in elem_ids:
                err(f"groups[{g.id}]", f"reference to unknown element '{eid}'")
            elif eid in seen:
                err(f"groups[{g.id}]", f"element '{eid}' appears in more than one group")
            seen.add(eid)
    missing = elem_ids - seen
    if missing:
        err("groups", f"elements not covered by any group: {sorted(map(str, missing))}")

    for lc in model.loadcases:
        locus = f"loadcases[{lc.id}]"
        for s in lc.supports:
            if s.node not in node_ids:
                err(locus, f"support on unknown node '{s.node}'")
        for f in lc.forces:
            if f.node not in node_ids:
                err(locus, f"force on unknown node '{f.node}'")
        for m in lc.masses:
            if m.node not in node_ids:
                err(locus, f"mass on unknown node '{m.node}'")
            if m.mass <= 0:
                err(locus, "nonpositive nonstructural mass")
        if lc.has_static:
            if lc.c_ub is None or lc.c_ub <= 0:
                err(locus, "static loadcase requires a positive compliance bound c_ub")
            n_constrained = sum(len(set(s.dofs)) for s in lc.supports)
            if n_constrained < 3:
                err(locus, "rigid-body motion: supports remove fewer than 3 dofs")
        if lc.has_vibration:
            if lc.lambda_lb is None or lc.lambda_lb <= 0:
                err(locus, "free-vibration loadcase requires a positive eigenvalue bound lambda_lb")
    if not model.loadcases:
        err("loadcases", "model defines no loadcases")

    return diags


def serialize(model: FrameModel) -> str:
    """Render a FrameModel back to its document form (parse ∘ serialize = id)."""
    doc = {
        "name": model.name,
        "nodes": [{"id": n.id, "x": n.x, "y": n.y} for n in model.nodes],
        "materials": [
            {"id": m.id, "E": m.e_mod, "rho": m.rho} for m in model.materials.values()
        ],
        "sections": [
            {"id": s.id, "a0": s.a0, "i0": s.i0, "scaling": s.scaling}
            for s in model.sections.values()
        ],
        "elements": [
            {
                "id": e.id,
                "nodes": [e.node_a, e.node_b],
                "material": e.material,
                "section": e.section,
            }
            for e in model.elements
        ],
        "groups": [{"id": g.id, "elements": list(g.elements)} for g in model.groups],
        "loadcases": [
            {
                "id": lc.id,
                "kind": lc.kind,
                "supports": [{"node": s.node, "dofs": list(s.dofs)} for s in lc.supports],
                "forces": [
                    {"node": f.node, "fx": f.fx, "fy": f.fy, "mz": f.mz} for f in lc.forces
                ],
                "masses": [{"node": m.node, "mass": m.mass} for m in lc.masses],
                **({"lambda_lb": lc.lambda_lb} if lc.lambda_lb is not None else {}),
                **({"c_ub": lc.c_ub} if lc.c_ub is not None else {}),
                "mass_dofs": list(lc.mass_dofs),
            }
            for lc in model.loadcases
        ],
        "mesh": {"subelements_per_design_element": model.subelements},
        "solver": model.solver,
    }
    return yaml.safe_dump(doc, sort_keys=False)
