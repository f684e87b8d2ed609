"""
Analytic signed-distance scenes.

A scene is a tree of SdfNode objects: primitives in local coordinates,
Transformed wrappers (rigid motion plus uniform scale) and combinators. Every
node evaluates batches of points [N, 3] with numpy and returns distances [N].
"""

from __future__ import annotations

import numpy as np

from sgir.errors import DegenerateNormal, ValidationError

SURFACE_TOLERANCE = 1e-4
NORMAL_STEP = 1e-4
SMOOTH_UNION_LIPSCHITZ = 1.2
EMPTY_DISTANCE = 1e9


def as_points(p):
    p = np.asarray(p, dtype=np.float64)
    return p.reshape(1, 3) if p.ndim == 1 else p


def central_difference_gradient(fn, p, h=NORMAL_STEP):
    """Central-difference gradient of a batched scalar function."""
    p = as_points(p)
    grad = np.empty_like(p)
    for axis in range(3):
        offset = np.zeros(3)
        offset[axis] = h
        grad[:, axis] = (fn(p + offset) - fn(p - offset)) / (2.0 * h)
    return grad


class SdfNode:
    """A node of the scene tree."""

    def distance(self, p):
        raise NotImplementedError("Subclasses must implement distance")

    def gradient(self, p):
        """Gradient of the distance; central differences unless overridden."""
        return central_difference_gradient(self.distance, p)

    def accept(self, visitor):
        return visitor.visit(self)


class Sphere(SdfNode):
    def __init__(self, radius=1.0):
        self.radius = float(radius)

    def distance(self, p):
        return np.linalg.norm(as_points(p), axis=-1) - self.radius

    def gradient(self, p):
        p = as_points(p)
        norm = np.linalg.norm(p, axis=-1, keepdims=True)
        return np.divide(p, norm, out=np.zeros_like(p), where=norm > 0)


class Box(SdfNode):
    def __init__(self, half_extents):
        self.half_extents = np.asarray(half_extents, dtype=np.float64).reshape(3)

    def distance(self, p):
        q = np.abs(as_points(p)) - self.half_extents
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(q.max(axis=-1), 0.0)
        return outside + inside

    def gradient(self, p):
        p = as_points(p)
        q = np.abs(p) - self.half_extents
        sign = np.where(p < 0, -1.0, 1.0)
        pos = np.maximum(q, 0.0)
        norm = np.linalg.norm(pos, axis=-1, keepdims=True)
        outside = sign * np.divide(pos, norm, out=np.zeros_like(pos), where=norm > 0)
        inside = np.zeros_like(p)
        axis = q.argmax(axis=-1)
        inside[np.arange(len(p)), axis] = sign[np.arange(len(p)), axis]
        return np.where(norm > 0, outside, inside)


class Plane(SdfNode):
    """Half-space n . p <= height; the surface is n . p = height."""

    def __init__(self, normal=(0.0, 1.0, 0.0), height=0.0):
        normal = np.asarray(normal, dtype=np.float64).reshape(3)
        self.normal = normal / np.linalg.norm(normal)
        self.height = float(height)

    def distance(self, p):
        return as_points(p) @ self.normal - self.height

    def gradient(self, p):
        return np.broadcast_to(self.normal, as_points(p).shape).copy()


class Torus(SdfNode):
    """Torus around the local y axis."""

    def __init__(self, major_radius=1.0, minor_radius=0.25):
        self.major_radius = float(major_radius)
        self.minor_radius = float(minor_radius)

    def _q(self, p):
        p = as_points(p)
        rho = np.hypot(p[:, 0], p[:, 2])
        return p, rho, np.stack([rho - self.major_radius, p[:, 1]], axis=-1)

    def distance(self, p):
        _, _, q = self._q(p)
        return np.linalg.norm(q, axis=-1) - self.minor_radius

    def gradient(self, p):
        p, rho, q = self._q(p)
        d = np.linalg.norm(q, axis=-1)
        safe_d = np.where(d > 0, d, 1.0)
        safe_rho = np.where(rho > 0, rho, 1.0)
        radial = q[:, 0] / safe_d
        return np.stack([radial * p[:, 0] / safe_rho, q[:, 1] / safe_d, radial * p[:, 2] / safe_rho], axis=-1)


class Empty(SdfNode):
    """No geometry: a constant, very large distance."""

    def distance(self, p):
        return np.full(len(as_points(p)), EMPTY_DISTANCE)

    def gradient(self, p):
        return np.zeros_like(as_points(p))


def rotation_matrix(spec):
    """A 3x3 rotation from a matrix or {"axis": [...], "degrees": angle}."""
    if spec is None:
        return np.eye(3)
    if isinstance(spec, dict):
        axis = np.asarray(spec["axis"], dtype=np.float64)
        axis = axis / np.linalg.norm(axis)
        theta = np.radians(float(spec["degrees"]))
        k = np.array([[0.0, -axis[2], axis[1]], [axis[2], 0.0, -axis[0]], [-axis[1], axis[0], 0.0]])
        return np.eye(3) + np.sin(theta) * k + (1.0 - np.cos(theta)) * (k @ k)
    matrix = np.asarray(spec, dtype=np.float64)
    if matrix.shape != (3, 3) or not np.allclose(matrix @ matrix.T, np.eye(3), atol=1e-6):
        raise ValidationError("rotation must be an orthonormal 3x3 matrix or an axis-angle object")
    return matrix


class Transformed(SdfNode):
    """child placed by p = translation + scale * rotation @ p_local."""

    def __init__(self, child, rotation=None, translation=(0.0, 0.0, 0.0), scale=1.0):
        if scale <= 0:
            raise ValidationError("transform scale must be positive")
        self.child = child
        self.rotation = np.eye(3) if rotation is None else np.asarray(rotation, dtype=np.float64)
        self.translation = np.asarray(translation, dtype=np.float64).reshape(3)
        self.scale = float(scale)

    def to_local(self, p):
        return ((as_points(p) - self.translation) @ self.rotation) / self.scale

    def distance(self, p):
        return self.scale * self.child.distance(self.to_local(p))

    def gradient(self, p):
        return self.child.gradient(self.to_local(p)) @ self.rotation.T


class Union(SdfNode):
    def __init__(self, children):
        if not children:
            raise ValidationError("a union needs at least one child")
        self.children = list(children)

    def distance(self, p):
        return np.min([c.distance(p) for c in self.children], axis=0)

    def gradient(self, p):
        p = as_points(p)
        nearest = np.argmin([c.distance(p) for c in self.children], axis=0)
        grad = np.zeros_like(p)
        for i, child in enumerate(self.children):
            mask = nearest == i
            if mask.any():
                grad[mask] = child.gradient(p[mask])
        return grad


class SmoothUnion(SdfNode):
    """Polynomial smooth minimum with blend radius k, folded left over the children."""

    def __init__(self, children, k):
        if not children:
            raise ValidationError("a smooth union needs at least one child")
        if k <= 0:
            raise ValidationError("smooth union radius must be positive")
        self.children = list(children)
        self.k = float(k)

    def _blend(self, p):
        p = as_points(p)
        d = self.children[0].distance(p)
        g = self.children[0].gradient(p)
        for child in self.children[1:]:
            d2 = child.distance(p)
            g2 = child.gradient(p)
            h = np.clip(0.5 + 0.5 * (d2 - d) / self.k, 0.0, 1.0)
            d = d2 * (1.0 - h) + d * h - self.k * h * (1.0 - h)
            g = g2 * (1.0 - h)[:, None] + g * h[:, None]
        return d, g

    def distance(self, p):
        d = self.children[0].distance(p)
        for child in self.children[1:]:
            d2 = child.distance(p)
            h = np.clip(0.5 + 0.5 * (d2 - d) / self.k, 0.0, 1.0)
            d = d2 * (1.0 - h) + d * h - self.k * h * (1.0 - h)
        return d

    def gradient(self, p):
        return self._blend(p)[1]


class SdfVisitor:
    """Dispatches on the node class name."""

    def visit(self, node):
        method_name = f'visit_{node.__class__.__name__}'
        visitor = getattr(self, method_name, self.generic_visit)
        return visitor(node)

    def generic_visit(self, node):
        raise NotImplementedError(
            f"{self.__class__.__name__} has no visit method for {node.__class__.__name__}"
        )


class LipschitzBound(SdfVisitor):
    """Upper bound on the Lipschitz constant of a node's distance."""

    def visit_Sphere(self, node):
        return 1.0

    visit_Box = visit_Plane = visit_Torus = visit_Empty = visit_Sphere

    def visit_Transformed(self, node):
        return self.visit(node.child)

    def visit_Union(self, node):
        return max(self.visit(c) for c in node.children)

    def visit_SmoothUnion(self, node):
        return SMOOTH_UNION_LIPSCHITZ * max(self.visit(c) for c in node.children)


class SceneConfigWriter(SdfVisitor):
    """Serializes a node tree back to the scene JSON primitive form."""

    def visit_Sphere(self, node):
        return {"shape": "sphere", "radius": node.radius}

    def visit_Box(self, node):
        return {"shape": "box", "half_extents": node.half_extents.tolist()}

    def visit_Plane(self, node):
        return {"shape": "plane", "normal": node.normal.tolist(), "height": node.height}

    def visit_Torus(self, node):
        return {"shape": "torus", "major_radius": node.major_radius, "minor_radius": node.minor_radius}

    def visit_Transformed(self, node):
        entry = self.visit(node.child)
        entry["transform"] = {
            "translation": node.translation.tolist(),
            "rotation": node.rotation.tolist(),
            "scale": node.scale,
        }
        return entry

    def visit_Empty(self, node):
        return None

    def visit_Union(self, node):
        return [self.visit(c) for c in node.children]

    visit_SmoothUnion = visit_Union


PRIMITIVES = {
    "sphere": lambda e: Sphere(e.get("radius", 1.0)),
    "box": lambda e: Box(e["half_extents"]),
    "plane": lambda e: Plane(e.get("normal", (0.0, 1.0, 0.0)), e.get("height", 0.0)),
    "torus": lambda e: Torus(e.get("major_radius", 1.0), e.get("minor_radius", 0.25)),
}


def primitive_from_config(entry):
    shape = entry.get("shape")
    if shape not in PRIMITIVES:
        raise ValidationError(f"unknown primitive shape {shape!r}")
    node = PRIMITIVES[shape](entry)
    transform = entry.get("transform")
    if transform:
        node = Transformed(node, rotation_matrix(transform.get("rotation")),
                           transform.get("translation", (0.0, 0.0, 0.0)), transform.get("scale", 1.0))
    return node


class SdfScene:
    """A bounded SDF scene.

    Args:
        root: the node tree
        bbox: [[lo], [hi]] box enclosing the zero level set
        primitives: the leaves addressed by material index (default: root's children)
        materials: per-primitive material descriptions (scene JSON form)
        environment: environment description (SG mixture JSON), if any
    """

    def __init__(self, root, bbox, primitives=None, materials=None, environment=None, combinator="union"):
        self.root = root
        self.bbox = np.asarray(bbox, dtype=np.float64).reshape(2, 3)
        if not (self.bbox[1] > self.bbox[0]).all():
            raise ValidationError("bbox upper corner must exceed the lower corner")
        if primitives is None:
            primitives = list(getattr(root, "children", [root]))
        self.primitives = primitives
        self.materials = materials or [{} for _ in primitives]
        self.environment = environment
        self.combinator = combinator
        self.lipschitz = root.accept(LipschitzBound())

    @property
    def extent(self):
        return float((self.bbox[1] - self.bbox[0]).max())

    @property
    def center(self):
        return 0.5 * (self.bbox[0] + self.bbox[1])

    def distance(self, p):
        return self.root.distance(p)

    def primitive_index(self, p):
        """Index of the primitive whose surface is closest to each point."""
        distances = np.abs(np.stack([prim.distance(p) for prim in self.primitives]))
        return distances.argmin(axis=0)

    @classmethod
    def from_config(cls, config):
        entries = config.get("primitives") or []
        prims = [primitive_from_config(e) for e in entries]
        combinator = config.get("combinator", "union")
        if not prims:
            root = Empty()
        elif combinator == "union":
            root = Union(prims)
        elif isinstance(combinator, dict) and "smooth_union" in combinator:
            root = SmoothUnion(prims, combinator["smooth_union"])
        else:
            raise ValidationError(f"unknown combinator {combinator!r}")
        bbox = config.get("bbox", [[-2.0] * 3, [2.0] * 3])
        return cls(root, bbox, prims or [root], [e.get("material", {}) for e in entries] or [{}],
                   config.get("environment"), combinator)

    def to_config(self):
        writer = SceneConfigWriter()
        primitives = []
        for prim, material in zip(self.primitives, self.materials):
            entry = prim.accept(writer)
            if entry is None:
                continue
            entry["material"] = material
            primitives.append(entry)
        config = {"bbox": self.bbox.tolist(), "primitives": primitives, "combinator": self.combinator}
        if self.environment is not None:
            config["environment"] = self.environment
        return config


STANDARD_SCENE_CONFIG = {
    "bbox": [[-2.0, -2.0, -2.0], [2.0, 2.0, 2.0]],
    "primitives": [
        {"shape": "sphere", "radius": 1.0,
         "material": {"albedo": [0.8, 0.3, 0.3], "roughness": 0.6}},
        {"shape": "plane", "normal": [0.0, 1.0, 0.0], "height": -1.0,
         "material": {"checker": {"albedo_a": [0.9, 0.9, 0.9], "albedo_b": [0.2, 0.2, 0.7], "size": 0.5},
                      "roughness": 0.9}},
    ],
    "combinator": "union",
    "environment": {
        "lobes": [
            {"axis": [0.35, 0.85, 0.4], "sharpness": 80.0, "amplitude": [12.0, 12.0, 11.0]},
            {"axis": [-0.6, 0.7, -0.2], "sharpness": 80.0, "amplitude": [6.0, 6.0, 7.0]},
        ]
    },
}


def standard_scene():
    """Unit sphere resting on the plane y = -1 inside [-2, 2]^3."""
    return SdfScene.from_config(STANDARD_SCENE_CONFIG)


def sdf_eval(scene, p):
    """Signed distance of point(s) p; a float for a single point."""
    p = np.asarray(p, dtype=np.float64)
    d = scene.distance(as_points(p))
    return float(d[0]) if p.ndim == 1 else d


def sdf_normal(scene, p, method="auto", h=NORMAL_STEP):
    """Unit outward normal(s) at p.

    ``method`` is "analytic" (node gradients), "central" (central differences
    with step h) or "auto" (analytic).

    Raises:
        DegenerateNormal: the gradient vanishes
    """
    p = np.asarray(p, dtype=np.float64)
    points = as_points(p)
    if method in ("auto", "analytic"):
        grad = scene.root.gradient(points)
    elif method == "central":
        grad = central_difference_gradient(scene.distance, points, h)
    else:
        raise ValidationError(f"unknown normal method {method!r}")
    norm = np.linalg.norm(grad, axis=-1, keepdims=True)
    if (norm < 1e-12).any():
        raise DegenerateNormal("sdf gradient vanishes; the normal is undefined")
    n = grad / norm
    return n[0] if p.ndim == 1 else n
