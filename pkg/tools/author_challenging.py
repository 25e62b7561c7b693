"""Regenerate the bundled challenging scene files (coordinates in grid cells)."""
import math
from pathlib import Path

from pushgrasp.scenefile import save_scene
from pushgrasp.world import ObjectSpec, Pose2D, Scene, SceneObject, Workspace

CELL = 0.01
OUT = Path(__file__).resolve().parents[1] / "src" / "pushgrasp" / "data" / "challenging"


def rect(i, cx, cy, w, l, color, h=0.04, theta=0.0):
    return SceneObject(ObjectSpec(i, "rect", (w * CELL, l * CELL), h, color),
                       Pose2D(cx * CELL, cy * CELL, theta))


def disc(i, cx, cy, r, color, h=0.03):
    return SceneObject(ObjectSpec(i, "disc", (r * CELL,), h, color), Pose2D(cx * CELL, cy * CELL))


def tri(i, cx, cy, b, hh, color, h=0.035):
    return SceneObject(ObjectSpec(i, "triangle", (b * CELL, hh * CELL), h, color),
                       Pose2D(cx * CELL, cy * CELL, 0.0))


def pinwheel(c, first_id=1, h=0.05):
    return [rect(first_id, c - 2.0, c + 3.5, 7, 4, 1, h),
            rect(first_id + 1, c + 3.5, c + 2.0, 4, 7, 2, h),
            rect(first_id + 2, c + 2.0, c - 3.5, 7, 4, 3, h),
            rect(first_id + 3, c - 3.5, c - 2.0, 4, 7, 4, h)]


def cases():
    c = 32.5
    yield "01-side-row", [rect(0, c, c, 3, 5, 0)] + [
        rect(i + 1, c + dx, c, 3, 5, i + 1) for i, dx in enumerate((-6, -3, 3, 6))], 0
    grid = []
    oid = 0
    for dy in (-3, 0, 3):
        for dx in (-3, 0, 3):
            grid.append(rect(oid, c + dx, c + dy, 3, 3, oid % 8, 0.03 + 0.002 * oid))
            oid += 1
    yield "02-side-grid", grid, 4
    yield "03-disc-between-walls", [disc(0, c, c, 1.5, 0),
                                     rect(1, c - 3.0, c, 3, 8, 1),
                                     rect(2, c + 3.0, c, 3, 8, 2),
                                     rect(3, c, c + 3.5, 3, 4, 3)], 0
    yield "04-triangle-packed", [tri(0, c, c, 3, 3, 0),
                                  rect(1, c, c - 2.5, 6, 3, 1),
                                  rect(2, c - 3.0, c + 0.5, 3, 3, 2),
                                  rect(3, c + 3.0, c + 0.5, 3, 3, 3)], 0
    yield "05-encircle-pinwheel", [rect(0, c, c, 3, 3, 0, 0.03)] + pinwheel(c), 0
    yield "06-encircle-disc", [disc(0, c, c, 1.5, 5, 0.03)] + pinwheel(c), 0
    yield "07-encircle-loose", [rect(0, c, c, 3, 3, 0, 0.03),
                                 rect(1, c - 3.5, c, 3, 4, 1), rect(2, c + 3.5, c, 3, 4, 2),
                                 rect(3, c, c + 3.5, 5, 3, 3), rect(4, c, c - 3.5, 5, 3, 4),
                                 disc(5, c - 4.0, c + 4.0, 1.5, 5), disc(6, c + 4.0, c - 4.0, 1.5, 6)], 0
    y = 32.0
    yield "08-edge-wall", [rect(0, 1.5, y, 3, 3, 0),
                            rect(1, 1.5, y + 4.5, 3, 6, 1), rect(2, 1.5, y - 4.5, 3, 6, 2),
                            rect(3, 4.5, y, 3, 5, 3)], 0
    yield "09-edge-corner", [rect(0, 1.5, 1.5, 3, 3, 0),
                              rect(1, 4.5, 2.5, 3, 5, 1), rect(2, 1.5, 5.5, 3, 5, 2, 0.045, math.pi / 2 * 0)], 0
    yield "10-edge-bottom-row", [rect(0, 32.0, 2.5, 3, 5, 0)] + [
        rect(i + 1, 32.0 + dx, 2.5, 3, 5, i + 1) for i, dx in enumerate((-6, -3, 3, 6))], 0


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for name, objs, goal in cases():
        save_scene(Scene(tuple(objs), Workspace(0.0, 0.0, 0.64), goal), OUT / f"{name}.scene")


if __name__ == "__main__":
    main()
