from . import errors, settings
from .errors import ShapeError, VocabularyMismatchError
from .settings import (
    ConfigurationError,
    Settings,
    apply_overrides,
    load_json,
    parse_override,
    save_json,
    set_nested_value,
)
