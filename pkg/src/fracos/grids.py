"""Deterministic grid-world environments and the MetaGrid procedural generator.

All environments are closed arenas on a cell grid: `#` wall, `.` empty,
`S` spawn, `G` goal. The agent moves up/down/left/right, observes a 7x7
ego-centric window plus a quantized goal bearing, gets +1 for reaching the
goal and -0.001 per step, and episodes are capped (default 500 steps).

The three named layouts are shipped as golden ASCII maps. The Ramesh maze
geometry is a best-effort transcription; treat individual wall cells as
approximate, the doorway structure and scale are what matter.
"""
from __future__ import annotations

import math
import random
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterable

from .errors import PlacementError

# Cell categories as seen in observations.
EMPTY = 0
WALL = 1
GOAL = 2
OUT_OF_BOUNDS = 3

# Primitive actions: up, down, left, right.
UP, DOWN, LEFT, RIGHT = 0, 1, 2, 3
PRIMITIVES = (UP, DOWN, LEFT, RIGHT)
_MOVES = {UP: (-1, 0), DOWN: (1, 0), LEFT: (0, -1), RIGHT: (0, 1)}

OBS_SIZE = 7
OBS_HALF = OBS_SIZE // 2
N_SECTORS = 8

STEP_PENALTY = -0.001
GOAL_REWARD = 1.0
DEFAULT_MAX_EPISODE_STEPS = 500

# Minimum episode return for a trajectory to count as successful.
SUCCESS_THRESHOLDS = {
    "four_rooms": 0.97,
    "nine_rooms": 0.60,
    "ramesh_maze": 0.70,
    "metagrid_14x14": 0.95,
    "metagrid_21x21": 0.95,
}


@dataclass(frozen=True)
class GridWorld:
    """Static maze layout: closed arena with one spawn and one goal cell."""

    width: int
    height: int
    walls: frozenset
    spawn: tuple
    goal: tuple

    def in_bounds(self, cell) -> bool:
        r, c = cell
        return 0 <= r < self.height and 0 <= c < self.width

    def is_wall(self, cell) -> bool:
        return cell in self.walls

    def is_open(self, cell) -> bool:
        return self.in_bounds(cell) and cell not in self.walls

    def open_cells(self):
        """All non-wall cells in row-major order (deterministic)."""
        return [
            (r, c)
            for r in range(self.height)
            for c in range(self.width)
            if (r, c) not in self.walls
        ]

    def render(self) -> str:
        rows = []
        for r in range(self.height):
            row = []
            for c in range(self.width):
                if (r, c) == self.spawn:
                    row.append("S")
                elif (r, c) == self.goal:
                    row.append("G")
                elif (r, c) in self.walls:
                    row.append("#")
                else:
                    row.append(".")
            rows.append("".join(row))
        return "\n".join(rows)


@dataclass(frozen=True)
class Task:
    """One MDP: a layout plus goal, success threshold and episode cap."""

    grid: GridWorld
    success_threshold: float
    task_id: str
    rng_seed: int = 0
    max_episode_steps: int = DEFAULT_MAX_EPISODE_STEPS


@dataclass(frozen=True)
class Observation:
    """Ego-centric 7x7 cell-category patch plus goal bearing sector.

    `patch[3][3]` is the agent's own cell. `reward_direction` is one of 8
    compass sectors (0=E, counter-clockwise), with sector 0 when the agent
    stands on the goal.
    """

    patch: tuple
    reward_direction: int

    def digest(self) -> tuple:
        """Flat hashable form: 49 cell categories followed by the sector."""
        flat = tuple(cell for row in self.patch for cell in row)
        return flat + (self.reward_direction,)


@dataclass(frozen=True)
class EnvState:
    agent_pos: tuple
    steps_elapsed: int = 0
    done: bool = False


# --------------------------------------------------------------------------
# Golden layouts
# --------------------------------------------------------------------------

FOUR_ROOMS_LAYOUT = """\
##############
#S....##.....#
#.....##.....#
#............#
#.....##.....#
#.....##.....#
###.######.###
###.######.###
#.....##.....#
#.....##.....#
#............#
#.....##.....#
#.....##.....#
##############
"""

NINE_ROOMS_LAYOUT = """\
#####################
#S....##.....##.....#
#.....##.....##.....#
#...................#
#.....##.....##.....#
#.....##.....##.....#
###.######.######.###
###.######.######.###
#.....##.....##.....#
#.....##.....##.....#
#...................#
#.....##.....##.....#
#.....##.....##.....#
###.######.######.###
###.######.######.###
#.....##.....##.....#
#.....##.....##.....#
#...................#
#.....##.....##.....#
#.....##.....##.....#
#####################
"""

RAMESH_MAZE_LAYOUT = """\
#####################
#S....#.......#.....#
#.....#.......#.....#
#..#..#...#...#..#..#
#..#......#......#..#
#..#######.#######..#
#..#.....#.#........#
#..#.#.#.#.#.####.#.#
#....#.#...#....#.#.#
#.####.#####.##.#.#.#
#.#....#...#..#.#.#.#
#.#.####.#.##.#.#.#.#
#.#......#....#.#...#
#.#.########.##.##..#
#.#.#......#.#...#..#
#...#..##..#.#.#.##.#
#.#####....#.#.#....#
#.#......#.#.#.####.#
#.#.######.#.#....#.#
#...#......#...#....#
#####################
"""

NAMED_LAYOUTS = {
    "four_rooms": FOUR_ROOMS_LAYOUT,
    "nine_rooms": NINE_ROOMS_LAYOUT,
    "ramesh_maze": RAMESH_MAZE_LAYOUT,
}


def parse_layout(text: str):
    """Parse an ASCII map into (width, height, walls, spawn, goal).

    Spawn and goal are None when the map does not mark them.
    """
    rows = [line for line in text.splitlines() if line]
    height = len(rows)
    width = len(rows[0])
    if any(len(row) != width for row in rows):
        raise ValueError("ragged layout: all rows must have equal length")
    walls = set()
    spawn = goal = None
    for r, row in enumerate(rows):
        for c, ch in enumerate(row):
            if ch == "#":
                walls.add((r, c))
            elif ch == "S":
                spawn = (r, c)
            elif ch == "G":
                goal = (r, c)
            elif ch != ".":
                raise ValueError(f"unknown map character {ch!r} at {(r, c)}")
    return width, height, frozenset(walls), spawn, goal


def reachable_cells(grid: GridWorld, start) -> set:
    """Cells reachable from `start` through non-wall cells (4-connectivity)."""
    seen = {start}
    frontier = deque([start])
    while frontier:
        r, c = frontier.popleft()
        for dr, dc in _MOVES.values():
            nxt = (r + dr, c + dc)
            if nxt not in seen and grid.is_open(nxt):
                seen.add(nxt)
                frontier.append(nxt)
    return seen


def _validate_grid(grid: GridWorld) -> None:
    for name, cell in (("spawn", grid.spawn), ("goal", grid.goal)):
        if not grid.in_bounds(cell):
            raise PlacementError(f"{name} {cell} is out of bounds")
        if grid.is_wall(cell):
            raise PlacementError(f"{name} {cell} is a wall cell")
    for r in range(grid.height):
        if (r, 0) not in grid.walls or (r, grid.width - 1) not in grid.walls:
            raise ValueError("arena is not closed: boundary column has a hole")
    for c in range(grid.width):
        if (0, c) not in grid.walls or (grid.height - 1, c) not in grid.walls:
            raise ValueError("arena is not closed: boundary row has a hole")
    if grid.goal not in reachable_cells(grid, grid.spawn):
        raise PlacementError(f"goal {grid.goal} is unreachable from spawn {grid.spawn}")


def make_named_env(name: str, goal, max_episode_steps: int = DEFAULT_MAX_EPISODE_STEPS) -> Task:
    """Build a Task for one of the named layouts with the given goal cell."""
    if name not in NAMED_LAYOUTS:
        raise ValueError(f"unknown environment {name!r}; expected one of {sorted(NAMED_LAYOUTS)}")
    width, height, walls, spawn, _ = parse_layout(NAMED_LAYOUTS[name])
    goal = (int(goal[0]), int(goal[1]))
    if goal == spawn:
        raise PlacementError(f"goal {goal} coincides with the spawn cell")
    grid = GridWorld(width=width, height=height, walls=walls, spawn=spawn, goal=goal)
    _validate_grid(grid)
    return Task(
        grid=grid,
        success_threshold=SUCCESS_THRESHOLDS[name],
        task_id=f"{name}:goal={goal[0]}-{goal[1]}",
        rng_seed=0,
        max_episode_steps=max_episode_steps,
    )


# --------------------------------------------------------------------------
# MetaGrid
# --------------------------------------------------------------------------
#
# Maps are tiled from 7x7 building blocks. Every block keeps its border
# walls except for single-cell doorways at the center of open edges; two
# adjacent blocks connect when both sides of the shared edge are open.
# Edge-opening order below is (N, E, S, W).

_BLOCK_PATTERNS = {
    "open_room": (
        "###.###",
        "#.....#",
        "#.....#",
        ".......",
        "#.....#",
        "#.....#",
        "###.###",
    ),
    "cross_corridor": (
        "###.###",
        "###.###",
        "###.###",
        ".......",
        "###.###",
        "###.###",
        "###.###",
    ),
    "pillar_room": (
        "###.###",
        "#.....#",
        "#.#.#.#",
        ".......",
        "#.#.#.#",
        "#.....#",
        "###.###",
    ),
    "split_room": (
        "###.###",
        "#.....#",
        "#.....#",
        ".......",
        "##.####",
        "#.....#",
        "#######",
    ),
    "nook_room": (
        "###.###",
        "#.....#",
        "#.##..#",
        "#.##...",
        "#.##..#",
        "#.....#",
        "###.###",
    ),
}

BLOCK_NAMES = tuple(sorted(_BLOCK_PATTERNS))
BLOCK_SIZE = 7
_FALLBACK_BLOCK = "cross_corridor"
_MATCH_RETRIES = 20
_CENTER = BLOCK_SIZE // 2


def _block_openings(pattern):
    """(N, E, S, W) openness flags read off the pattern's edge centers."""
    return (
        pattern[0][_CENTER] == ".",
        pattern[_CENTER][BLOCK_SIZE - 1] == ".",
        pattern[BLOCK_SIZE - 1][_CENTER] == ".",
        pattern[_CENTER][0] == ".",
    )

_OPENINGS = {name: _block_openings(pat) for name, pat in _BLOCK_PATTERNS.items()}


def _assemble_blocks(blocks_high: int, blocks_wide: int, rng: random.Random):
    """Pick a block grid honoring edge matching; returns (block_names, walls)."""
    chosen = [[None] * blocks_wide for _ in range(blocks_high)]
    for bi in range(blocks_high):
        for bj in range(blocks_wide):
            above = chosen[bi - 1][bj] if bi > 0 else None
            left = chosen[bi][bj - 1] if bj > 0 else None
            pick = None
            for _ in range(_MATCH_RETRIES):
                cand = BLOCK_NAMES[rng.randrange(len(BLOCK_NAMES))]
                if above is not None and _OPENINGS[cand][0] != _OPENINGS[above][2]:
                    continue
                if left is not None and _OPENINGS[cand][3] != _OPENINGS[left][1]:
                    continue
                pick = cand
                break
            chosen[bi][bj] = pick if pick is not None else _FALLBACK_BLOCK

    height = blocks_high * BLOCK_SIZE
    width = blocks_wide * BLOCK_SIZE
    walls = set()
    for bi in range(blocks_high):
        for bj in range(blocks_wide):
            pattern = _BLOCK_PATTERNS[chosen[bi][bj]]
            for r in range(BLOCK_SIZE):
                for c in range(BLOCK_SIZE):
                    if pattern[r][c] == "#":
                        walls.add((bi * BLOCK_SIZE + r, bj * BLOCK_SIZE + c))
    # Close the arena, then seal any doorway that dead-ends into a wall left
    # by a fallback placement.
    for r in range(height):
        walls.add((r, 0))
        walls.add((r, width - 1))
    for c in range(width):
        walls.add((0, c))
        walls.add((height - 1, c))
    for r in range(1, height - 1):
        for c in range(1, width - 1):
            if (r, c) in walls:
                continue
            on_edge = r % BLOCK_SIZE in (0, BLOCK_SIZE - 1) or c % BLOCK_SIZE in (0, BLOCK_SIZE - 1)
            if not on_edge:
                continue
            dr = 1 if r % BLOCK_SIZE == BLOCK_SIZE - 1 else -1 if r % BLOCK_SIZE == 0 else 0
            dc = 1 if c % BLOCK_SIZE == BLOCK_SIZE - 1 else -1 if c % BLOCK_SIZE == 0 else 0
            if dr and (r + dr, c) in walls:
                walls.add((r, c))
            elif dc and (r, c + dc) in walls:
                walls.add((r, c))
    return chosen, frozenset(walls)


def _parse_size(size) -> tuple:
    if isinstance(size, str):
        h, w = size.lower().split("x")
        size = (int(h), int(w))
    h, w = int(size[0]), int(size[1])
    if h % BLOCK_SIZE or w % BLOCK_SIZE:
        raise ValueError(f"MetaGrid size {h}x{w} must be a multiple of {BLOCK_SIZE}")
    return h, w


def generate_metagrid(size, rng_seed: int, max_episode_steps: int = DEFAULT_MAX_EPISODE_STEPS) -> Task:
    """Procedurally generate a MetaGrid Task; identical seeds give identical Tasks.

    Spawn is uniform over empty cells; the goal is uniform over the remaining
    cells reachable from spawn, which guarantees the reachability invariant.
    """
    height, width = _parse_size(size)
    rng = random.Random(rng_seed)
    for _ in range(64):
        _, walls = _assemble_blocks(height // BLOCK_SIZE, width // BLOCK_SIZE, rng)
        empties = [
            (r, c)
            for r in range(height)
            for c in range(width)
            if (r, c) not in walls
        ]
        if len(empties) < 2:
            continue
        spawn = empties[rng.randrange(len(empties))]
        probe = GridWorld(width=width, height=height, walls=walls, spawn=spawn, goal=spawn)
        reach = sorted(reachable_cells(probe, spawn) - {spawn})
        if not reach:
            continue
        goal = reach[rng.randrange(len(reach))]
        grid = GridWorld(width=width, height=height, walls=walls, spawn=spawn, goal=goal)
        _validate_grid(grid)
        threshold = SUCCESS_THRESHOLDS.get(f"metagrid_{height}x{width}", 0.95)
        return Task(
            grid=grid,
            success_threshold=threshold,
            task_id=f"metagrid:{height}x{width}:seed={rng_seed}",
            rng_seed=rng_seed,
            max_episode_steps=max_episode_steps,
        )
    raise RuntimeError(f"failed to assemble a usable MetaGrid for seed {rng_seed}")


# --------------------------------------------------------------------------
# Dynamics and observations
# --------------------------------------------------------------------------


def initial_state(task: Task) -> EnvState:
    return EnvState(agent_pos=task.grid.spawn, steps_elapsed=0, done=False)


def step(task: Task, state: EnvState, action: int):
    """Advance one primitive action; returns (state, observation, reward, done).

    Moving into a wall leaves the position unchanged but still costs a step.
    """
    if state.done:
        raise RuntimeError("step() called on a finished episode")
    if action not in _MOVES:
        raise ValueError(f"unknown primitive action {action}")
    r, c = state.agent_pos
    dr, dc = _MOVES[action]
    nxt = (r + dr, c + dc)
    if not task.grid.is_open(nxt):
        nxt = (r, c)
    steps = state.steps_elapsed + 1
    reached = nxt == task.grid.goal
    done = reached or steps >= task.max_episode_steps
    reward = STEP_PENALTY + (GOAL_REWARD if reached else 0.0)
    new_state = EnvState(agent_pos=nxt, steps_elapsed=steps, done=done)
    return new_state, observe(task, new_state), reward, done


def bearing_sector(agent, goal) -> int:
    """Quantize the agent-to-goal bearing into 8 sectors (0=E, CCW); 0 on the goal."""
    dr = goal[0] - agent[0]
    dc = goal[1] - agent[1]
    if dr == 0 and dc == 0:
        return 0
    angle = math.atan2(-dr, dc)  # rows grow downward
    return int(round(angle / (math.pi / 4))) % N_SECTORS


def observe(task: Task, state) -> Observation:
    """Ego-centric 7x7 patch around the agent plus the goal bearing sector."""
    pos = state.agent_pos if isinstance(state, EnvState) else state
    grid = task.grid
    ar, ac = pos
    rows = []
    for dr in range(-OBS_HALF, OBS_HALF + 1):
        row = []
        for dc in range(-OBS_HALF, OBS_HALF + 1):
            cell = (ar + dr, ac + dc)
            if not grid.in_bounds(cell):
                row.append(OUT_OF_BOUNDS)
            elif grid.is_wall(cell):
                row.append(WALL)
            elif cell == grid.goal:
                row.append(GOAL)
            else:
                row.append(EMPTY)
        rows.append(tuple(row))
    return Observation(patch=tuple(rows), reward_direction=bearing_sector(pos, grid.goal))


def shortest_path_length(grid: GridWorld, start, goal) -> int:
    """BFS distance in steps, or -1 when unreachable."""
    if start == goal:
        return 0
    seen = {start}
    frontier = deque([(start, 0)])
    while frontier:
        cell, d = frontier.popleft()
        for dr, dc in _MOVES.values():
            nxt = (cell[0] + dr, cell[1] + dc)
            if nxt == goal:
                return d + 1
            if nxt not in seen and grid.is_open(nxt):
                seen.add(nxt)
                frontier.append((nxt, d + 1))
    return -1
