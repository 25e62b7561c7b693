"""Plain-text scene files.

Grammar (one record per line, ``#`` starts a comment)::

    pushgrasp-scene v1                      header, must be the first line
    workspace = <x0> <y0> <size>            square bounds in meters
    goal = <object-id> | none
    objects = <count>                       number of object lines that follow
    object id=<int> shape=<rect|disc|triangle> dims=<d1>[,<d2>] height=<m>
           color=<int> pose=<x>,<y>,<theta>  [goal=1]

Object records are single lines (wrapped above for width).  Floats are
written with ``repr`` so a save/load round trip is exact.  ``goal=1`` on an
object line is an alternative way to flag the goal; if both forms are
present they must agree.
"""
from __future__ import annotations

from pathlib import Path

from .errors import SceneParseError
from .world import ObjectSpec, Pose2D, Scene, SceneObject, Workspace

HEADER = "pushgrasp-scene v1"
_OBJECT_KEYS = ("id", "shape", "dims", "height", "color", "pose")


def format_scene(scene: Scene) -> str:
    ws = scene.workspace
    lines = [HEADER,
             f"workspace = {ws.x0!r} {ws.y0!r} {ws.size!r}",
             f"goal = {'none' if scene.goal_id is None else scene.goal_id}",
             f"objects = {len(scene.objects)}"]
    for obj in scene.objects:
        s, p = obj.spec, obj.pose
        dims = ",".join(repr(float(d)) for d in s.dims)
        flag = " goal=1" if obj.object_id == scene.goal_id else ""
        lines.append(f"object id={s.object_id} shape={s.shape} dims={dims} height={s.height!r} "
                     f"color={s.color} pose={p.x!r},{p.y!r},{p.theta!r}{flag}")
    return "\n".join(lines) + "\n"


def save_scene(scene: Scene, path) -> None:
    Path(path).write_text(format_scene(scene))


def _floats(text, lineno, field, count=None):
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise SceneParseError(f"expected number(s), got {text!r}", lineno, field) from None
    if count is not None and len(vals) not in count:
        raise SceneParseError(f"expected {'/'.join(map(str, count))} values, got {len(vals)}",
                              lineno, field)
    return vals


def _int(text, lineno, field):
    try:
        return int(text)
    except ValueError:
        raise SceneParseError(f"expected integer, got {text!r}", lineno, field) from None


def _parse_object(body: str, lineno: int):
    fields = {}
    for token in body.split():
        if "=" not in token:
            raise SceneParseError(f"expected key=value, got {token!r}", lineno)
        k, v = token.split("=", 1)
        if k in fields:
            raise SceneParseError("duplicate key", lineno, k)
        fields[k] = v
    for k in _OBJECT_KEYS:
        if k not in fields:
            raise SceneParseError("missing field", lineno, k)
    unknown = set(fields) - set(_OBJECT_KEYS) - {"goal"}
    if unknown:
        raise SceneParseError("unknown field", lineno, sorted(unknown)[0])
    pose = _floats(fields["pose"], lineno, "pose", (3,))
    try:
        spec = ObjectSpec(_int(fields["id"], lineno, "id"), fields["shape"],
                          _floats(fields["dims"], lineno, "dims", (1, 2)),
                          _floats(fields["height"], lineno, "height", (1,))[0],
                          _int(fields["color"], lineno, "color"))
    except ValueError as exc:
        raise SceneParseError(str(exc), lineno, "shape") from None
    is_goal = fields.get("goal", "0") == "1"
    return SceneObject(spec, Pose2D(*pose)), is_goal


def parse_scene(text: str) -> Scene:
    lines = [(i + 1, ln.split("#", 1)[0].strip()) for i, ln in enumerate(text.splitlines())]
    lines = [(i, ln) for i, ln in lines if ln]
    if not lines or lines[0][1] != HEADER:
        found = lines[0][1] if lines else "<empty>"
        raise SceneParseError(f"expected header {HEADER!r}, found {found!r}",
                              lines[0][0] if lines else 1, "header")
    header = {}
    objects, flagged = [], []
    for lineno, line in lines[1:]:
        if line.startswith("object "):
            obj, is_goal = _parse_object(line[len("object "):], lineno)
            objects.append(obj)
            if is_goal:
                flagged.append(obj.object_id)
            continue
        if "=" not in line:
            raise SceneParseError(f"unrecognised line {line!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in ("workspace", "goal", "objects"):
            raise SceneParseError("unknown key", lineno, key)
        if objects:
            raise SceneParseError("header keys must precede object lines", lineno, key)
        header[key] = (lineno, value)
    for key in ("workspace", "goal", "objects"):
        if key not in header:
            raise SceneParseError("missing header key", None, key)
    lineno, value = header["workspace"]
    ws_vals = _floats(value.replace(" ", ","), lineno, "workspace", (3,)) if value else ()
    if len(ws_vals) != 3 or ws_vals[2] <= 0:
        raise SceneParseError("expected '<x0> <y0> <size>'", lineno, "workspace")
    lineno, value = header["objects"]
    count = _int(value, lineno, "objects")
    if count != len(objects):
        raise SceneParseError(f"declared {count} objects, found {len(objects)} (truncated file?)",
                              lineno, "objects")
    ids = [o.object_id for o in objects]
    if len(set(ids)) != len(ids):
        raise SceneParseError("duplicate object id", None, "id")
    lineno, value = header["goal"]
    goal = None if value.lower() == "none" else _int(value, lineno, "goal")
    if goal is not None and goal not in ids:
        raise SceneParseError(f"goal {goal} is not an object id", lineno, "goal")
    if flagged and (len(flagged) > 1 or flagged[0] != goal):
        raise SceneParseError("goal=1 flag disagrees with goal header", None, "goal")
    return Scene(tuple(objects), Workspace(*ws_vals), goal)


def load_scene(path) -> Scene:
    return parse_scene(Path(path).read_text())
