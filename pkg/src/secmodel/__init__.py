"""Security-annotated system models: parsing, attack analysis, ProVerif export and bounded verification."""

from importlib import resources

__version__ = "0.1.0"


def bundled_path(name: str):
    """Path-like handle to a model shipped with the package, e.g. ``keydist.ssec``."""
    return resources.files(__name__).joinpath("bundled", name)


BUNDLED_MODELS = ("keydist.ssec", "firmware_update.ssec")
