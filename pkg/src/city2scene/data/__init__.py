from . import manifest, splits, synthetic
from .manifest import (
    ClipRecord,
    Manifest,
    ManifestParseError,
    Split,
    SplitAssignmentError,
    parse_manifest,
    write_manifest,
)
from .splits import carve_validation, stratified_split
from .synthetic import (
    SyntheticConfig,
    city_signature_hz,
    generate_synthetic,
    synthesize_clip,
)
