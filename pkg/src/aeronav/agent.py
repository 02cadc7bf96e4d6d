"""Three-stage navigation loop: planner, stage transitions, controllers,
and the reasoner-driven episode runner."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from . import query as query_mod
from . import scm as scm_mod
from .config import RunConfig
from .geometry import Pose, WorldPoint
from .hsg import init_graph
from .perception import NoiseModel, observe, project_detections
from .reasoner import ReasonerRequest, ReasonerResponse, ScriptedReasoner
from .scm import CognitiveMap, CoverageGrid, nav_rationale, search_rationale
from .world import (
    COMPASS_ACTIONS,
    MAX_STEPS,
    PLANAR_OFFSETS,
    Action,
    EpisodeState,
    Scenario,
    step as world_step,
)

NAV_THRESHOLD_M = 50.0
SUCCESS_RADIUS_M = 20.0
SEARCH_REGION_DILATION_M = 50.0
SEGMENT_EARLY_STOP_M = 2.5
INVOCATION_CADENCE = 10


@dataclass(frozen=True)
class SubGoal:
    goal_text: str
    strategy: str  # Navigate | Search | Localize
    anchor_landmark: str | None
    desired_state: str
    threshold: float


def plan(goal, priors, nav_threshold: float = NAV_THRESHOLD_M,
         coverage_threshold: float = 0.8) -> list:
    """Canonical three-subgoal decomposition: navigate, search, localize."""
    anchor = goal.anchor_landmark
    if anchor is not None and not any(lm.name == anchor for lm in priors):
        raise ValueError(f"unknown anchor landmark {anchor!r}")
    where = f"near {anchor}" if anchor else "in the scene"
    return [
        SubGoal(f"Navigate to {anchor or 'the search area'}", "Navigate", anchor,
                f"within {nav_threshold:.0f} m of the landmark centroid", nav_threshold),
        SubGoal(f"Search the region {where} for a {goal.target_class}", "Search", anchor,
                f"coverage >= {coverage_threshold:.0%} or search budget exhausted",
                coverage_threshold),
        SubGoal(f"Localize the {goal.target_class} and stop", "Localize", anchor,
                f"stop within {SUCCESS_RADIUS_M:.0f} m of the retrieved position",
                SUCCESS_RADIUS_M),
    ]


def check_transition(subgoal: SubGoal, pose: Pose, anchor_centroid,
                     coverage, search_invocations: int,
                     search_budget: int, stop_issued: bool) -> bool:
    if subgoal.strategy == "Navigate":
        if anchor_centroid is None:
            return True
        return pose.position.distance_to(anchor_centroid) <= subgoal.threshold
    if subgoal.strategy == "Search":
        if coverage is not None and coverage.coverage() >= subgoal.threshold:
            return True
        return search_invocations >= search_budget
    return stop_issued


def _greedy_planar(position: WorldPoint, target: WorldPoint):
    """Planar action minimizing remaining distance, or None if none improves."""
    current = position.distance_to(target)
    best, best_dist = None, current
    for action, (dx, dy) in PLANAR_OFFSETS.items():
        d = WorldPoint(position.x + dx, position.y + dy).distance_to(target)
        if d < best_dist - 1e-12:
            best, best_dist = action, d
    return best


def navigate_segment(state: EpisodeState, advice: ReasonerResponse,
                     budget: int = INVOCATION_CADENCE, on_step=None) -> list:
    """Execute up to ``budget`` primitive actions following one piece of advice."""
    actions = []
    for _ in range(budget):
        if state.done:
            break
        if advice.advice_type == "direction":
            action = COMPASS_ACTIONS[advice.value]
        elif advice.advice_type == "waypoint":
            target = advice.value
            if state.pose.position.distance_to(target) <= SEGMENT_EARLY_STOP_M:
                break
            action = _greedy_planar(state.pose.position, target)
            if action is None:
                break
        else:
            break
        world_step(state, action)
        actions.append(action)
        if on_step is not None and not on_step(state):
            break
    return actions


def localize_controller(state: EpisodeState, target: WorldPoint, on_step=None) -> list:
    """Greedy descent onto the target, then stop."""
    actions = []
    while not state.done:
        dist = state.pose.position.distance_to(target)
        action = _greedy_planar(state.pose.position, target)
        if dist <= SEGMENT_EARLY_STOP_M or action is None:
            world_step(state, Action.STOP)
            actions.append(Action.STOP)
            break
        world_step(state, action)
        actions.append(action)
        if on_step is not None and not on_step(state):
            break
    return actions


@dataclass
class EpisodeTrace:
    scenario: dict
    episode_seed: int
    config_digest: str
    subgoals: list
    steps: list = field(default_factory=list)  # {stage, action, pose}
    invocations: list = field(default_factory=list)
    retrieval: dict | None = None
    final_pose: tuple = ()
    stop_issued: bool = False
    step_count: int = 0
    stage_reached: str = "Navigate"
    flags: dict = field(default_factory=dict)

    @property
    def poses(self) -> list:
        return [tuple(s["pose"]) for s in self.steps]

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "episode_seed": self.episode_seed,
            "config_digest": self.config_digest,
            "subgoals": self.subgoals,
            "steps": self.steps,
            "invocations": self.invocations,
            "retrieval": self.retrieval,
            "final_pose": list(self.final_pose),
            "stop_issued": self.stop_issued,
            "step_count": self.step_count,
            "stage_reached": self.stage_reached,
            "flags": self.flags,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "EpisodeTrace":
        trace = cls(
            scenario=doc["scenario"],
            episode_seed=doc["episode_seed"],
            config_digest=doc["config_digest"],
            subgoals=doc["subgoals"],
            steps=doc["steps"],
            invocations=doc["invocations"],
            retrieval=doc.get("retrieval"),
            final_pose=tuple(doc["final_pose"]),
            stop_issued=doc["stop_issued"],
            step_count=doc["step_count"],
            stage_reached=doc.get("stage_reached", "Navigate"),
            flags=doc.get("flags", {}),
        )
        return trace

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))

    @classmethod
    def load(cls, path) -> "EpisodeTrace":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _obs_seed(episode_seed: int, step_index: int) -> int:
    return (episode_seed * 1_000_003 + step_index * 7919 + 12345) % (2 ** 31)


def run_episode(scenario: Scenario, reasoner=None, config: RunConfig | None = None,
                episode_seed: int = 0) -> EpisodeTrace:
    """Run the full staged episode; deterministic for fixed inputs."""
    from dataclasses import asdict

    from .world import scenario_to_dict

    config = config or RunConfig()
    reasoner = reasoner or ScriptedReasoner()
    goal = scenario.goal

    noise = NoiseModel.noiseless() if config.noiseless else NoiseModel(**asdict(config.noise))
    anchor = scenario.landmark(goal.anchor_landmark) if goal.anchor_landmark else None
    anchor_centroid = anchor.centroid() if anchor else None

    cmap: CognitiveMap | None = None
    coverage: CoverageGrid | None = None
    if not config.ablate_scm:
        cmap = scm_mod.init_map(scenario.landmarks, scenario.bounds)
        if anchor is not None:
            region = anchor.contour.envelope().dilated(SEARCH_REGION_DILATION_M)
        else:
            from .geometry import Rect

            b = scenario.bounds
            region = Rect(b.x_min, b.y_min, b.x_max, b.y_max)
        coverage = CoverageGrid(region)

    graph = None
    if not config.ablate_hsg:
        graph = init_graph(scenario.landmarks, scenario.bounds,
                           config.gamma, config.sigma, config.rho)

    subgoals = plan(goal, scenario.landmarks, config.nav_threshold,
                    config.coverage_threshold)
    if config.ablate_staging:
        subgoals = [sg for sg in subgoals if sg.strategy != "Search"]

    trace = EpisodeTrace(
        scenario=scenario_to_dict(scenario),
        episode_seed=episode_seed,
        config_digest=config.digest(),
        subgoals=[asdict(sg) for sg in subgoals],
        flags={
            "ablate_scm": config.ablate_scm,
            "ablate_hsg": config.ablate_hsg,
            "ablate_staging": config.ablate_staging,
            "noiseless": config.noiseless,
            "reasoner_fallback_used": False,
        },
    )

    state = EpisodeState(Pose(scenario.start.x, scenario.start.y,
                              config.altitude, scenario.start.theta))
    stage_idx = 0
    search_invocations = 0
    in_search = False

    def perceive(st: EpisodeState) -> None:
        frame = observe(scenario, st.pose, noise, _obs_seed(episode_seed, st.step_count),
                        negate_camera_offset=config.negate_camera_offset)
        increment = project_detections(frame, config.negate_camera_offset)
        if cmap is not None:
            cmap.update(increment, st.pose, st.step_count)
        if in_search:
            # search-stage exploration: coverage and the fine-scale graph
            if coverage is not None:
                coverage.update(frame.footprint)
            if graph is not None:
                graph.integrate(increment)

    def record_step(stage: str, action: Action, st: EpisodeState) -> None:
        trace.steps.append({
            "stage": stage,
            "action": action.value,
            "pose": [st.pose.x, st.pose.y, st.pose.z, st.pose.theta],
        })

    perceive(state)  # initial observation at the start pose

    while not state.done and stage_idx < len(subgoals):
        sg = subgoals[stage_idx]
        trace.stage_reached = sg.strategy
        if sg.strategy in ("Navigate", "Search"):
            if check_transition(sg, state.pose, anchor_centroid, coverage,
                                search_invocations, config.search_budget,
                                state.stop_issued):
                stage_idx += 1
                continue
            rationale = ""
            if sg.strategy == "Navigate" and anchor is not None:
                rationale = nav_rationale(state.pose, anchor)
            elif sg.strategy == "Search" and cmap is not None and coverage is not None:
                rationale = search_rationale(state.pose, cmap, coverage)
            req = ReasonerRequest(
                episode_id=f"ep-{scenario.seed}-{episode_seed}",
                stage=sg.strategy,
                subgoal_text=sg.goal_text,
                rationale_text=rationale,
                pose=state.pose,
                action_budget=config.budget,
                anchor_centroid=anchor_centroid,
                coverage=coverage,
            )
            resp = reasoner(req)
            if resp.fallback:
                trace.flags["reasoner_fallback_used"] = True
            trace.invocations.append({
                "step": state.step_count,
                "stage": sg.strategy,
                "request_digest": req.digest(),
                "response": resp.to_dict(),
            })
            if sg.strategy == "Search":
                search_invocations += 1
                in_search = True
            if resp.advice_type == "stop_search":
                stage_idx += 1
                in_search = False
                continue

            # execute until the next invocation cadence boundary
            slot_end = ((state.step_count // config.budget) + 1) * config.budget
            budget = min(slot_end - state.step_count, MAX_STEPS - state.step_count)
            for _ in range(budget):
                if state.done:
                    break
                if resp.advice_type == "direction":
                    action = COMPASS_ACTIONS[resp.value]
                elif resp.advice_type == "waypoint":
                    if state.pose.position.distance_to(resp.value) <= SEGMENT_EARLY_STOP_M:
                        action = Action.TURN_RIGHT  # hover until the next cadence slot
                    else:
                        action = _greedy_planar(state.pose.position, resp.value) \
                            or Action.TURN_RIGHT
                else:
                    break
                world_step(state, action)
                record_step(sg.strategy, action, state)
                perceive(state)
                if sg.strategy == "Search" and check_transition(
                        sg, state.pose, anchor_centroid, coverage,
                        search_invocations, config.search_budget, state.stop_issued):
                    # Localize needs no reasoner call, so ending the slot early
                    # keeps the invocation count within the cadence bound
                    break
            in_search = False
            if check_transition(sg, state.pose, anchor_centroid, coverage,
                                search_invocations, config.search_budget,
                                state.stop_issued):
                stage_idx += 1
        else:  # Localize
            if graph is not None:
                retrieval = query_mod.retrieve_target(graph, goal, state.pose,
                                                      config.max_trial)
            else:
                # no scene graph: greedy fallback onto the anchor centroid
                target = anchor_centroid or state.pose.position
                retrieval = query_mod.RetrievalResult(target, None, True,
                                                      config.max_trial, True)
            trace.retrieval = retrieval.to_dict()
            target = retrieval.position
            while not state.done:
                dist = state.pose.position.distance_to(target)
                action = _greedy_planar(state.pose.position, target)
                if dist <= SEGMENT_EARLY_STOP_M or action is None:
                    world_step(state, Action.STOP)
                    record_step("Localize", Action.STOP, state)
                    break
                world_step(state, action)
                record_step("Localize", action, state)
                perceive(state)
            stage_idx += 1

    trace.final_pose = (state.pose.x, state.pose.y, state.pose.z, state.pose.theta)
    trace.stop_issued = state.stop_issued
    trace.step_count = state.step_count
    return trace
