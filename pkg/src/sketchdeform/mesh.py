"""Mesh storage, OBJ persistence, blendshape posing, and mirror-averaging.

Meshes are plain indexed polygon soups: an ``(n, 3)`` float64 vertex array
plus a list of triangle or quad faces. All functions here are pure; meshes
are treated as immutable values (vertex arrays are frozen on construction),
so everything is safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import MeshError, ObjParseError, RigError

__all__ = [
    "Mesh",
    "BlendshapeRig",
    "ActivationVector",
    "BoundingBox",
    "load_obj",
    "save_obj",
    "load_rig_manifest",
    "load_activations",
    "save_activations",
    "apply_blendshapes",
    "bounding_box",
    "mirror_average",
]


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=np.float64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Mesh:
    """Indexed polygon mesh with triangle and/or quad faces.

    ``vertices`` is an ``(n, 3)`` float64 array in model units. ``faces`` is a
    tuple of index tuples, each of length 3 or 4, all indices 0-based.
    """

    vertices: np.ndarray
    faces: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "vertices", _frozen(np.atleast_2d(self.vertices)))
        object.__setattr__(self, "faces", tuple(tuple(int(i) for i in f) for f in self.faces))

    @property
    def vertex_count(self) -> int:
        return int(self.vertices.shape[0])

    def validate(self) -> None:
        """Raise :class:`MeshError` if the mesh violates its invariants."""
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise MeshError(f"vertex array must be (n, 3), got {self.vertices.shape}")
        if self.vertex_count == 0:
            raise MeshError("mesh has no vertices")
        if not np.all(np.isfinite(self.vertices)):
            raise MeshError("mesh has non-finite vertex coordinates")
        n = self.vertex_count
        for k, f in enumerate(self.faces):
            if len(f) not in (3, 4):
                raise MeshError(f"face {k} has {len(f)} indices; only triangles and quads are supported")
            if len(set(f)) != len(f):
                raise MeshError(f"face {k} repeats a vertex index: {f}")
            for i in f:
                if not 0 <= i < n:
                    raise MeshError(f"face {k} references vertex {i}, but mesh has {n} vertices")


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box; ``min`` <= ``max`` componentwise."""

    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "min", _frozen(np.asarray(self.min, dtype=np.float64).reshape(3)))
        object.__setattr__(self, "max", _frozen(np.asarray(self.max, dtype=np.float64).reshape(3)))

    @property
    def center(self) -> np.ndarray:
        return (self.min + self.max) / 2.0

    @property
    def size(self) -> np.ndarray:
        return self.max - self.min

    @property
    def height(self) -> float:
        return float(self.max[1] - self.min[1])


@dataclass(frozen=True)
class BlendshapeRig:
    """Base mesh plus same-topology morph targets.

    ``max_level`` is the activation level that maps to the full target
    displacement; levels in between blend linearly.
    """

    base: Mesh
    targets: dict[str, Mesh] = field(default_factory=dict)
    max_level: float = 10.0

    def validate(self) -> None:
        self.base.validate()
        if not self.max_level > 0:
            raise RigError(f"max_level must be positive, got {self.max_level}")
        for name, target in self.targets.items():
            target.validate()
            if target.vertex_count != self.base.vertex_count:
                raise RigError(
                    f"target '{name}' has {target.vertex_count} vertices, base has {self.base.vertex_count}"
                )
            if target.faces != self.base.faces:
                raise RigError(f"target '{name}' has a different face list than the base mesh")


@dataclass(frozen=True)
class ActivationVector:
    """Named activation levels, each in ``[0, max_level]`` of its rig."""

    entries: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "entries", {str(k): float(v) for k, v in self.entries.items()})


def load_obj(path: str | Path) -> Mesh:
    """Parse a Wavefront OBJ file into a :class:`Mesh`.

    Only ``v`` and ``f`` records are honored; normals, texture coordinates,
    materials, groups, and comments are skipped. Face indices may be 1-based
    or negative (relative to the vertices defined so far) and may carry
    ``v/vt/vn`` slash suffixes; all resolve to 0-based vertex indices.
    """
    path = Path(path)
    vertices: list[tuple[float, float, float]] = []
    faces: list[tuple[int, ...]] = []
    pending: list[tuple[int, tuple[int, ...]]] = []  # (line_no, raw 1-based indices)

    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            tag = parts[0]
            if tag == "v":
                if len(parts) < 4:
                    raise ObjParseError(f"{path.name}:{line_no}: vertex record needs 3 coordinates")
                try:
                    x, y, z = (float(parts[1]), float(parts[2]), float(parts[3]))
                except ValueError as exc:
                    raise ObjParseError(f"{path.name}:{line_no}: bad vertex coordinate: {exc}") from None
                vertices.append((x, y, z))
            elif tag == "f":
                if len(parts) < 4:
                    raise ObjParseError(f"{path.name}:{line_no}: face record needs at least 3 indices")
                idx: list[int] = []
                for token in parts[1:]:
                    head = token.split("/")[0]
                    try:
                        raw_i = int(head)
                    except ValueError:
                        raise ObjParseError(f"{path.name}:{line_no}: bad face index '{token}'") from None
                    if raw_i == 0:
                        raise ObjParseError(f"{path.name}:{line_no}: OBJ indices are 1-based; 0 is invalid")
                    if raw_i < 0:
                        # Negative indices are relative to the vertices seen so far.
                        resolved = len(vertices) + raw_i
                        if resolved < 0:
                            raise ObjParseError(
                                f"{path.name}:{line_no}: relative index {raw_i} precedes the first vertex"
                            )
                        idx.append(resolved)
                    else:
                        idx.append(raw_i - 1)
                pending.append((line_no, tuple(idx)))
            # Every other record type (vn, vt, o, g, s, usemtl, ...) is ignored.

    if not vertices:
        raise MeshError(f"{path.name}: no vertices found")

    n = len(vertices)
    for line_no, f in pending:
        if len(f) not in (3, 4):
            raise ObjParseError(f"{path.name}:{line_no}: face with {len(f)} vertices; only tris/quads supported")
        for i in f:
            if i >= n:
                raise ObjParseError(f"{path.name}:{line_no}: face index {i + 1} out of range (have {n} vertices)")
        if len(set(f)) != len(f):
            raise ObjParseError(f"{path.name}:{line_no}: face repeats a vertex index")
        faces.append(f)

    mesh = Mesh(np.array(vertices, dtype=np.float64), tuple(faces))
    mesh.validate()
    return mesh


def save_obj(mesh: Mesh, path: str | Path) -> None:
    """Write an ASCII OBJ with ``v`` then 1-based ``f`` records.

    Coordinates use 9 significant digits, which round-trips well under 1e-6
    for model-scale coordinates.
    """
    mesh.validate()
    path = Path(path)
    lines = [f"v {x:.9g} {y:.9g} {z:.9g}" for x, y, z in mesh.vertices]
    for f in mesh.faces:
        lines.append("f " + " ".join(str(i + 1) for i in f))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_rig_manifest(path: str | Path) -> BlendshapeRig:
    """Load a blendshape rig from a flat ``name = file.obj`` manifest.

    Reserved keys: ``base`` (required, the neutral mesh) and ``max_level``
    (optional, defaults to 10). Every other entry names a morph target.
    Relative OBJ paths resolve against the manifest's directory.
    """
    path = Path(path)
    base_path: Path | None = None
    max_level = 10.0
    target_paths: dict[str, Path] = {}
    for line_no, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise RigError(f"{path.name}:{line_no}: expected 'name = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key == "max_level":
            try:
                max_level = float(value)
            except ValueError:
                raise RigError(f"{path.name}:{line_no}: bad max_level '{value}'") from None
        elif key == "base":
            base_path = path.parent / value
        else:
            if key in target_paths:
                raise RigError(f"{path.name}:{line_no}: duplicate target '{key}'")
            target_paths[key] = path.parent / value

    if base_path is None:
        raise RigError(f"{path.name}: manifest has no 'base = <file.obj>' entry")
    rig = BlendshapeRig(
        base=load_obj(base_path),
        targets={name: load_obj(p) for name, p in target_paths.items()},
        max_level=max_level,
    )
    rig.validate()
    return rig


def load_activations(path: str | Path) -> ActivationVector:
    """Read a flat ``name = level`` activation file."""
    path = Path(path)
    entries: dict[str, float] = {}
    for line_no, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise RigError(f"{path.name}:{line_no}: expected 'name = level'")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            entries[key] = float(value)
        except ValueError:
            raise RigError(f"{path.name}:{line_no}: bad level '{value}'") from None
    return ActivationVector(entries)


def save_activations(act: ActivationVector, path: str | Path) -> None:
    Path(path).write_text(
        "".join(f"{name} = {level:.9g}\n" for name, level in act.entries.items()),
        encoding="utf-8",
    )


def apply_blendshapes(rig: BlendshapeRig, act: ActivationVector) -> Mesh:
    """Pose the rig: ``base + sum((level / max_level) * (target - base))``.

    Targets blend additively; faces are copied from the base. Raises
    :class:`RigError` for unknown names or levels outside ``[0, max_level]``.
    """
    rig.validate()
    for name, level in act.entries.items():
        if name not in rig.targets:
            raise RigError(f"unknown activation '{name}'; rig targets: {sorted(rig.targets)}")
        if not math.isfinite(level) or level < 0 or level > rig.max_level:
            raise RigError(f"activation '{name}' level {level} outside [0, {rig.max_level}]")

    out = rig.base.vertices.copy()
    # Iterate in rig order so the floating-point sum is reproducible.
    for name, target in rig.targets.items():
        if name not in act.entries:
            continue
        weight = act.entries[name] / rig.max_level
        if weight != 0.0:
            out += weight * (target.vertices - rig.base.vertices)
    return Mesh(out, rig.base.faces)


def bounding_box(mesh: Mesh) -> BoundingBox:
    """Componentwise min/max over all vertices."""
    if mesh.vertex_count == 0:
        raise MeshError("bounding_box of an empty mesh")
    return BoundingBox(mesh.vertices.min(axis=0), mesh.vertices.max(axis=0))


def mirror_average(mesh: Mesh, plane_x: float) -> Mesh:
    """Average each vertex with the reflection of its mirror partner.

    The partner of ``v`` is the vertex nearest to ``reflect(v)``, where
    ``reflect`` negates ``x - plane_x``; ties break to the lowest vertex
    index. The output vertex is ``(v + reflect(partner)) / 2``, so an exactly
    symmetric mesh is a fixed point. Topology is unchanged.
    """
    if mesh.vertex_count == 0:
        raise MeshError("mirror_average of an empty mesh")
    verts = mesh.vertices
    reflected = verts.copy()
    reflected[:, 0] = 2.0 * plane_x - reflected[:, 0]

    n = mesh.vertex_count
    partners = np.empty(n, dtype=np.int64)
    # Chunked brute-force nearest neighbor; argmin picks the first (lowest
    # index) occurrence on ties, which is the documented tie-break.
    chunk = max(1, int(4_000_000 // max(n, 1)))
    for start in range(0, n, chunk):
        block = reflected[start : start + chunk]
        d2 = ((block[:, None, :] - verts[None, :, :]) ** 2).sum(axis=2)
        partners[start : start + chunk] = np.argmin(d2, axis=1)

    partner_reflected = verts[partners].copy()
    partner_reflected[:, 0] = 2.0 * plane_x - partner_reflected[:, 0]
    return Mesh((verts + partner_reflected) / 2.0, mesh.faces)
