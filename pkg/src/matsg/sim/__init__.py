from .actions import Continuous, Macro, MacroCommand, Waypoint
from .birdview import BirdviewObservation, rasterize_birdview
from .controllers import macro_controller, npc_policy, waypoint_controller
from .env import IntersectionEnv
from .geometry import rects_collide, sat_overlap
from .kinematics import VehicleState, advance_kinematics
from .reward import compute_reward, decision_reward
from .roadmap import RoadMap, default_map, fourway_map, load_map
from .world import NpcBehaviorConfig, WorldState, detect_events
