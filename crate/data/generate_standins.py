#!/usr/bin/env python3
"""Regenerate the bundled benchmark maps and scenario files.

empty-32-32 is identical to the movingai original. random-32-32-20 and
warehouse-10-20-10-2-1 are seeded stand-ins with the same dimensions and
layout family; drop the originals into data/ to use them instead.
"""
import random
from collections import deque
from pathlib import Path

ROOT = Path(__file__).resolve().parent
SCENES = 25


def write_map(name, grid):
    h, w = len(grid), len(grid[0])
    lines = ["type octile", f"height {h}", f"width {w}", "map"] + ["".join(r) for r in grid]
    (ROOT / "maps" / f"{name}.map").write_text("\n".join(lines) + "\n")


def components(grid):
    h, w = len(grid), len(grid[0])
    seen = [[-1] * w for _ in range(h)]
    comps = []
    for r in range(h):
        for c in range(w):
            if grid[r][c] != "." or seen[r][c] >= 0:
                continue
            comp = []
            q = deque([(r, c)])
            seen[r][c] = len(comps)
            while q:
                y, x = q.popleft()
                comp.append((y, x))
                for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                    ny, nx = y + dy, x + dx
                    if 0 <= ny < h and 0 <= nx < w and grid[ny][nx] == "." and seen[ny][nx] < 0:
                        seen[ny][nx] = len(comps)
                        q.append((ny, nx))
            comps.append(comp)
    return comps


def bfs(grid, start, goal):
    h, w = len(grid), len(grid[0])
    dist = {start: 0}
    q = deque([start])
    while q:
        y, x = q.popleft()
        if (y, x) == goal:
            return dist[(y, x)]
        for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            n = (y + dy, x + dx)
            if 0 <= n[0] < h and 0 <= n[1] < w and grid[n[0]][n[1]] == "." and n not in dist:
                dist[n] = dist[(y, x)] + 1
                q.append(n)
    raise ValueError("unreachable")


def write_scens(name, grid, entries):
    h, w = len(grid), len(grid[0])
    cells = max(components(grid), key=len)
    entries = min(entries, len(cells))
    for k in range(1, SCENES + 1):
        rng = random.Random(f"{name}-{k}")
        starts = rng.sample(cells, entries)
        goals = rng.sample(cells, entries)
        # no agent starts on its own goal
        for i in range(entries):
            if starts[i] == goals[i]:
                j = (i + 1) % entries
                goals[i], goals[j] = goals[j], goals[i]
        lines = ["version 1"]
        for i, (s, g) in enumerate(zip(starts, goals)):
            d = bfs(grid, s, g)
            lines.append(f"{d // 4}\t{name}.map\t{w}\t{h}\t{s[1]}\t{s[0]}\t{g[1]}\t{g[0]}\t{float(d):.8f}")
        (ROOT / "scen" / f"{name}-random-{k}.scen").write_text("\n".join(lines) + "\n")


def empty():
    return [["."] * 32 for _ in range(32)]


def random_map():
    rng = random.Random("random-32-32-20")
    grid = empty()
    cells = [(r, c) for r in range(32) for c in range(32)]
    for r, c in rng.sample(cells, round(0.2 * 32 * 32)):
        grid[r][c] = "@"
    keep = set(max(components(grid), key=len))
    for r in range(32):
        for c in range(32):
            if grid[r][c] == "." and (r, c) not in keep:
                grid[r][c] = "@"
    return grid


def warehouse():
    # 20 free columns per side, 11 shelf columns of length 10 split by
    # 1-wide aisles, 21 shelf rows split by 2-wide aisles, 1-row border.
    h, w = 63, 161
    grid = [["."] * w for _ in range(h)]
    for row in range(21):
        r = 1 + row * 3
        for col in range(11):
            c0 = 20 + col * 11
            for c in range(c0, c0 + 10):
                grid[r][c] = "@"
    return grid


if __name__ == "__main__":
    for name, grid, entries in (
        ("empty-32-32", empty(), 500),
        ("random-32-32-20", random_map(), 500),
        ("warehouse-10-20-10-2-1", warehouse(), 1000),
    ):
        write_map(name, grid)
        write_scens(name, grid, entries)
