from .manifest import (
    DatasetManifest,
    PoseRecord,
    image_to_tensor,
    load_alignment_pairs,
    load_image_tensors,
    load_manifest,
    read_pose_csv,
    save_manifest,
    write_pose_csv,
)
from .toycity import (
    DOMAIN_MIX,
    ToyCity,
    ToyCityConfig,
    generate_toy_city,
    shift_domain_image,
    shift_domain_tensor,
)
from .views import RenderedDatabase, render_at_geo, render_database

__all__ = [
    "DOMAIN_MIX",
    "DatasetManifest",
    "PoseRecord",
    "RenderedDatabase",
    "ToyCity",
    "ToyCityConfig",
    "generate_toy_city",
    "image_to_tensor",
    "load_alignment_pairs",
    "load_image_tensors",
    "load_manifest",
    "read_pose_csv",
    "render_at_geo",
    "render_database",
    "save_manifest",
    "shift_domain_image",
    "shift_domain_tensor",
    "write_pose_csv",
]
