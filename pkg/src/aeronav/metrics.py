"""Episode scoring (NE / SR / OSR / SPL), suite aggregation, and report output."""

from __future__ import annotations

import csv
import json
import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .geometry import WorldPoint
from .world import Scenario, find_goal_matches, scenario_from_dict

SUCCESS_RADIUS_M = 20.0

_STAGE_COLORS = {"Navigate": "#2b5fd9", "Search": "#e08a1e", "Localize": "#2f9e44"}


@dataclass(frozen=True)
class EpisodeScore:
    scenario_id: str
    seed: int
    ne_m: float
    success: bool
    oracle_success: bool
    spl: float
    path_m: float
    shortest_m: float
    steps: int
    stage_reached: str
    fallback_used: bool
    error: str | None = None


def _target_position(scenario: Scenario) -> WorldPoint:
    matches = find_goal_matches(scenario)
    if not matches:
        raise ValueError("scenario goal has no matching object")
    return matches[0].position


def _trace_positions(trace) -> list:
    start = trace.scenario["start"]
    points = [WorldPoint(start["x"], start["y"])]
    points.extend(WorldPoint(s["pose"][0], s["pose"][1]) for s in trace.steps)
    return points


def path_length(trace) -> float:
    pts = _trace_positions(trace)
    return sum(a.distance_to(b) for a, b in zip(pts, pts[1:]))


def score_episode(trace, scenario: Scenario | None = None) -> EpisodeScore:
    """Score one finished episode against the goal embedded in its trace."""
    scenario = scenario or scenario_from_dict(trace.scenario)
    target = _target_position(scenario)
    pts = _trace_positions(trace)

    final = WorldPoint(trace.final_pose[0], trace.final_pose[1])
    ne = final.distance_to(target)
    success = trace.stop_issued and ne <= SUCCESS_RADIUS_M
    oracle = any(p.distance_to(target) <= SUCCESS_RADIUS_M for p in pts)
    shortest = pts[0].distance_to(target)
    path = path_length(trace)
    if success:
        spl = 1.0 if shortest == 0 else shortest / max(path, shortest)
    else:
        spl = 0.0
    return EpisodeScore(
        scenario_id=f"scenario-{scenario.seed}",
        seed=trace.episode_seed,
        ne_m=ne,
        success=success,
        oracle_success=oracle,
        spl=spl,
        path_m=path,
        shortest_m=shortest,
        steps=trace.step_count,
        stage_reached=trace.stage_reached,
        fallback_used=bool(trace.flags.get("reasoner_fallback_used")),
    )


@dataclass
class SuiteReport:
    config_digest: str
    scores: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    def aggregates(self) -> dict:
        scored = [s for s in self.scores if s.error is None]
        n = len(scored)
        if n == 0:
            return {"episodes": 0, "failures": len(self.failures)}
        by_seed: dict = {}
        for s in scored:
            by_seed.setdefault(s.seed, []).append(s)
        seed_sr = [sum(x.success for x in group) / len(group)
                   for group in by_seed.values()]
        return {
            "episodes": n,
            "failures": len(self.failures),
            "ne_mean_m": sum(s.ne_m for s in scored) / n,
            "sr": sum(s.success for s in scored) / n,
            "osr": sum(s.oracle_success for s in scored) / n,
            "spl_mean": sum(s.spl for s in scored) / n,
            "sr_std_over_seeds": statistics.pstdev(seed_sr) if len(seed_sr) > 1 else 0.0,
        }


def run_suite(scenarios, config, reasoner=None, jobs: int = 1) -> SuiteReport:
    """Run every scenario under every configured seed; crashes become failures."""
    from .agent import run_episode

    report = SuiteReport(config_digest=config.digest())
    tasks = [(scenario, seed) for scenario in scenarios for seed in config.seeds]

    def one(task):
        scenario, seed = task
        try:
            trace = run_episode(scenario, reasoner, config, episode_seed=seed)
            return score_episode(trace), None
        except Exception as exc:  # recorded, not raised: one bad episode != lost suite
            return EpisodeScore(
                scenario_id=f"scenario-{scenario.seed}", seed=seed,
                ne_m=math.inf, success=False, oracle_success=False,
                spl=0.0, path_m=0.0, shortest_m=0.0, steps=0, stage_reached="Navigate",
                fallback_used=False, error=f"{type(exc).__name__}: {exc}",
            ), f"scenario-{scenario.seed}/seed-{seed}: {type(exc).__name__}: {exc}"

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, tasks))
    else:
        results = [one(t) for t in tasks]

    for score, failure in results:
        report.scores.append(score)
        if failure is not None:
            report.failures.append(failure)
    return report


_CSV_COLUMNS = ["scenario_id", "seed", "ne_m", "success", "oracle_success",
                "spl", "path_m", "steps", "stage_reached", "fallback_used"]


def emit_report(report: SuiteReport, out_dir) -> tuple:
    """Write results.csv and report.json under ``out_dir``; returns both paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "results.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=_CSV_COLUMNS, extrasaction="ignore")
        writer.writeheader()
        for s in report.scores:
            row = asdict(s)
            row["success"] = int(s.success)
            row["oracle_success"] = int(s.oracle_success)
            writer.writerow(row)
    json_path = out / "report.json"
    json_path.write_text(json.dumps({
        "config_digest": report.config_digest,
        "aggregates": report.aggregates(),
        "failures": report.failures,
        "scores": [asdict(s) for s in report.scores],
    }, indent=2, sort_keys=True))
    return csv_path, json_path


def emit_plot(trace, path) -> Path:
    """Deterministic SVG of the trajectory over the scenario layout."""
    scenario = scenario_from_dict(trace.scenario)
    b = scenario.bounds
    width, height = 800, 800
    sx = width / (b.x_max - b.x_min)
    sy = height / (b.y_max - b.y_min)

    def px(p: WorldPoint) -> tuple:
        return (round((p.x - b.x_min) * sx, 2), round((b.y_max - p.y) * sy, 2))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="#f8f8f6"/>',
    ]
    for lm in scenario.landmarks:
        pts = " ".join(f"{x},{y}" for x, y in (px(v) for v in lm.contour.vertices))
        parts.append(f'<polygon points="{pts}" fill="none" stroke="#444" stroke-width="1.5"/>')
        cx, cy = px(lm.contour.centroid())
        parts.append(f'<text x="{cx}" y="{cy}" font-size="12" fill="#444">{lm.name}</text>')

    pts = _trace_positions(trace)
    stages = ["Navigate"] + [s["stage"] for s in trace.steps]
    for (a, b2), stage in zip(zip(pts, pts[1:]), stages[1:]):
        (x1, y1), (x2, y2) = px(a), px(b2)
        color = _STAGE_COLORS.get(stage, "#888")
        parts.append(f'<line x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2}" '
                     f'stroke="{color}" stroke-width="2"/>')

    sxp, syp = px(pts[0])
    parts.append(f'<circle cx="{sxp}" cy="{syp}" r="5" fill="#2b5fd9"/>')
    target = _target_position(scenario)
    txp, typ = px(target)
    parts.append(f'<circle cx="{txp}" cy="{typ}" r="6" fill="none" '
                 f'stroke="#c92a2a" stroke-width="2"/>')
    fxp, fyp = px(WorldPoint(trace.final_pose[0], trace.final_pose[1]))
    parts.append(f'<rect x="{fxp - 4}" y="{fyp - 4}" width="8" height="8" fill="#2f9e44"/>')
    parts.append("</svg>")

    out = Path(path)
    out.write_text("\n".join(parts) + "\n")
    return out
