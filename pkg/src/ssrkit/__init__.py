"""ssrkit: structured scene representation toolkit.

Scene parsing and transforms, rectilinear boundary extraction, voxel-based
layout violation metrics, stochastic asset retrieval, verifiable reward
scoring, and instruction-tuple generation for indoor scenes.
"""

__version__ = "0.1.0"

from .assets import (AssetEntry, Catalog, SamplerConfig, greedy_asset,
                     load_catalog, load_query_embeddings, sample_asset,
                     score_assets)
from .errors import ParseError, SsrkitError

from .boundary import (RectilinearPolygon, TriangleMesh, extract_corners,
                       extrude_boundary_mesh, load_obj, point_in_polygon,
                       polygon_area, polygon_from_scene)
from .commands import (CommandList, EditCommand, InvalidOutput,
                       parse_candidate_object, parse_commands, render_commands)
from .instructions import (Instruction, ObjectCountPrior, PromptBank,
                           gen_instruction, object_count_prior,
                           render_model_input)
from .rewards import (RewardConfig, RewardContext, RewardOutcome, best_of_n,
                      default_matcher, dss, group_advantage, pms,
                      removal_accuracy, score_candidate)
from .scene import (Quaternion, Scene, SceneObject, SceneValidity, Vec3,
                    add_object, apply_augmentation, augment, parse_ssr,
                    remove_objects, serialize_ssr, translate_scene,
                    translate_to_origin)
from .voxel import (ViolationReport, VoxelConfig, VoxelGrid, compute_mbl_pair,
                    compute_oob, compute_vbl, delta_vbl, place_object_voxels,
                    validate_scene, voxelize_mesh)
