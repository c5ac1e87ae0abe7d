#!/usr/bin/env python3
"""Generate the bundled benchmark maps as line-oriented map documents.

Each map is a closed room drawn on a cell grid (8.8 mm cells): '#' wall,
'.' free, 'R' robot start. The five layouts: an open room with round
obstacles, a radial maze, a rectilinear maze, an office floor, and a
nested labyrinth.
"""

import math
import os
import sys
from collections import deque

CELL_MM = 8.8
OUT_DIR = os.path.join(os.path.dirname(__file__), "..", "crates", "core", "maps")


class Canvas:
    def __init__(self, w, h, fill="#"):
        self.w = w
        self.h = h
        self.g = [[fill] * w for _ in range(h)]

    def rect(self, x0, y0, x1, y1, ch):
        for y in range(max(0, y0), min(self.h, y1)):
            for x in range(max(0, x0), min(self.w, x1)):
                self.g[y][x] = ch

    def disc(self, cx, cy, r, ch):
        for y in range(max(0, cy - r - 1), min(self.h, cy + r + 2)):
            for x in range(max(0, cx - r - 1), min(self.w, cx + r + 2)):
                if (x - cx) ** 2 + (y - cy) ** 2 <= r * r:
                    self.g[y][x] = ch

    def stroke(self, x0, y0, x1, y1, brush, ch):
        steps = max(abs(x1 - x0), abs(y1 - y0)) * 2 + 1
        for i in range(steps + 1):
            t = i / steps
            self.disc(round(x0 + t * (x1 - x0)), round(y0 + t * (y1 - y0)), brush, ch)

    def border(self, thickness):
        self.rect(0, 0, self.w, thickness, "#")
        self.rect(0, self.h - thickness, self.w, self.h, "#")
        self.rect(0, 0, thickness, self.h, "#")
        self.rect(self.w - thickness, 0, self.w, self.h, "#")

    def put_start(self, x, y):
        assert self.g[y][x] == ".", f"start ({x},{y}) not free"
        self.g[y][x] = "R"

    def text(self):
        rows = ["".join(r) for r in self.g]
        return f"cellsize_mm={CELL_MM}\n" + "\n".join(rows) + "\n"


def flood(canvas, seeds, passable):
    seen = set(seeds)
    q = deque(seeds)
    while q:
        x, y = q.popleft()
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                if dx == 0 and dy == 0:
                    continue
                nx, ny = x + dx, y + dy
                if 0 <= nx < canvas.w and 0 <= ny < canvas.h:
                    if (nx, ny) not in seen and passable(nx, ny):
                        seen.add((nx, ny))
                        q.append((nx, ny))
    return seen


def validate(name, canvas):
    start = None
    free = set()
    for y in range(canvas.h):
        for x in range(canvas.w):
            ch = canvas.g[y][x]
            if ch == "R":
                start = (x, y)
                free.add((x, y))
            elif ch == ".":
                free.add((x, y))
    assert start, f"{name}: no start"

    # every free cell reachable from the start
    reach = flood(canvas, [start], lambda x, y: (x, y) in free)
    stranded = free - reach
    assert not stranded, f"{name}: {len(stranded)} free cells unreachable, e.g. {sorted(stranded)[:5]}"

    # erode by the robot radius (3.125 cells; chamfer threshold 3.625) and
    # check the eroded region is connected and the start is inside it
    INF = 1e18
    dist = [[INF] * canvas.w for _ in range(canvas.h)]
    for y in range(canvas.h):
        for x in range(canvas.w):
            if (x, y) not in free:
                dist[y][x] = 0.0
    d2 = math.sqrt(2)
    for _ in range(2):
        for y in range(canvas.h):
            for x in range(canvas.w):
                best = dist[y][x]
                for dx, dy, c in ((-1, 0, 1), (0, -1, 1), (-1, -1, d2), (1, -1, d2)):
                    nx, ny = x + dx, y + dy
                    if 0 <= nx < canvas.w and 0 <= ny < canvas.h:
                        best = min(best, dist[ny][nx] + c)
                dist[y][x] = best
        for y in range(canvas.h - 1, -1, -1):
            for x in range(canvas.w - 1, -1, -1):
                best = dist[y][x]
                for dx, dy, c in ((1, 0, 1), (0, 1, 1), (1, 1, d2), (-1, 1, d2)):
                    nx, ny = x + dx, y + dy
                    if 0 <= nx < canvas.w and 0 <= ny < canvas.h:
                        best = min(best, dist[ny][nx] + c)
                dist[y][x] = best
    thr = 3.125 + 0.5
    eroded = {(x, y) for (x, y) in free if dist[y][x] >= thr}
    assert start in eroded, f"{name}: start has no robot clearance"
    ereach = flood(canvas, [start], lambda x, y: (x, y) in eroded)
    lost = eroded - ereach
    assert not lost, f"{name}: {len(lost)} eroded cells disconnected, e.g. {sorted(lost)[:5]}"
    print(f"{name}: {canvas.w}x{canvas.h} = {canvas.w*canvas.h} cells, "
          f"{len(free)} free, {len(eroded)} eroded-reachable")


def open_room():
    c = Canvas(113, 113)
    c.rect(2, 2, 111, 111, ".")
    c.disc(36, 34, 10, "#")
    c.disc(78, 42, 12, "#")
    c.disc(44, 82, 11, "#")
    c.disc(88, 88, 9, "#")
    c.put_start(14, 14)
    return c


def radial_maze():
    c = Canvas(170, 170)
    cx = cy = 85
    c.disc(cx, cy, 27, ".")
    for k in range(8):
        a = k * math.pi / 4
        x1 = round(cx + 76 * math.cos(a))
        y1 = round(cy + 76 * math.sin(a))
        c.stroke(cx, cy, x1, y1, 9, ".")
    c.border(4)
    c.put_start(cx, cy)
    return c


def maze():
    # 5x5 rooms of 32 cells, border 5, internal walls 4 thick with
    # 24-wide door openings along a fixed spanning tree plus two loops
    c = Canvas(170, 170)
    c.rect(5, 5, 165, 165, ".")
    # internal lattice walls
    for k in range(1, 5):
        p = 5 + 32 * k
        c.rect(p - 2, 5, p + 2, 165, "#")
        c.rect(5, p - 2, 165, p + 2, "#")

    def room_center(i, j):
        return 5 + 32 * i + 16, 5 + 32 * j + 16

    def open_between(a, b):
        (ax, ay), (bx, by) = room_center(*a), room_center(*b)
        mx, my = (ax + bx) // 2, (ay + by) // 2
        if ay == by:  # vertical wall between horizontally adjacent rooms
            c.rect(mx - 2, my - 12, mx + 2, my + 12, ".")
        else:
            c.rect(mx - 12, my - 2, mx + 12, my + 2, ".")

    passages = [
        # serpentine spine
        ((0, 0), (1, 0)), ((1, 0), (2, 0)), ((2, 0), (3, 0)), ((3, 0), (4, 0)),
        ((4, 0), (4, 1)), ((4, 1), (3, 1)), ((3, 1), (2, 1)), ((2, 1), (1, 1)),
        ((1, 1), (1, 2)), ((1, 2), (2, 2)), ((2, 2), (3, 2)), ((3, 2), (4, 2)),
        ((4, 2), (4, 3)), ((4, 3), (3, 3)), ((3, 3), (2, 3)), ((2, 3), (1, 3)),
        ((1, 3), (0, 3)), ((0, 3), (0, 4)), ((0, 4), (1, 4)), ((1, 4), (2, 4)),
        ((2, 4), (3, 4)), ((3, 4), (4, 4)),
        # dead-end branches
        ((0, 0), (0, 1)), ((0, 1), (0, 2)),
        ((1, 1), (1, 0)),  # loop back
        ((2, 2), (2, 3)),  # loop
        ((4, 4), (4, 3)),  # loop
    ]
    for a, b in passages:
        open_between(a, b)
    c.put_start(*room_center(0, 0))
    return c


def office():
    c = Canvas(170, 170)
    c.rect(3, 3, 167, 167, ".")
    # corridor band stays open between the two wall strips
    c.rect(3, 67, 167, 72, "#")   # top corridor wall
    c.rect(3, 98, 167, 103, "#")  # bottom corridor wall
    # rooms above: three partitions -> four rooms
    for px in (43, 84, 125):
        c.rect(px, 3, px + 5, 72, "#")
    # rooms below: two partitions -> three rooms
    for px in (58, 112):
        c.rect(px, 98, px + 5, 167, "#")
    # doors from each room onto the corridor
    for dx in (20, 62, 103, 145):  # upper room door centers
        c.rect(dx - 10, 67, dx + 10, 72, ".")
    for dx in (30, 85, 139):  # lower room door centers
        c.rect(dx - 10, 98, dx + 10, 103, ".")
    # a cupboard obstacle inside two rooms
    c.rect(8, 30, 26, 44, "#")
    c.rect(130, 120, 150, 140, "#")
    c.put_start(85, 85)
    return c


def aaai():
    c = Canvas(154, 154)
    c.rect(3, 3, 151, 151, ".")
    # outer ring wall with an opening on the east side
    c.rect(28, 28, 126, 32, "#")
    c.rect(28, 122, 126, 126, "#")
    c.rect(28, 32, 32, 122, "#")
    c.rect(122, 32, 126, 122, "#")
    c.rect(122, 64, 126, 90, ".")  # east opening
    # inner ring wall with an opening on the west side
    c.rect(52, 52, 102, 56, "#")
    c.rect(52, 98, 102, 102, "#")
    c.rect(52, 56, 56, 98, "#")
    c.rect(98, 56, 102, 98, "#")
    c.rect(52, 66, 56, 88, ".")  # west opening
    # spur walls in the outermost corridor: dead ends
    c.rect(64, 3, 68, 20, "#")
    c.rect(100, 134, 104, 151, "#")
    c.put_start(14, 14)
    return c


def main():
    os.makedirs(OUT_DIR, exist_ok=True)
    for name, build in (
        ("open_room", open_room),
        ("radial_maze", radial_maze),
        ("maze", maze),
        ("office", office),
        ("aaai", aaai),
    ):
        canvas = build()
        validate(name, canvas)
        path = os.path.join(OUT_DIR, f"{name}.txt")
        with open(path, "w") as f:
            f.write(canvas.text())
    print("done")


if __name__ == "__main__":
    sys.exit(main())
