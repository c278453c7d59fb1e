"""Exception hierarchy shared by every scenedit module.

Each error carries a stable ``code`` (its class name) so the HTTP service
and CLI can report machine-readable diagnostics without string matching.
"""


class SceneEditError(Exception):
    """Base class for all scenedit errors."""

    @property
    def code(self) -> str:
        return type(self).__name__


# -- scene state / commands ------------------------------------------------

class UnknownInstance(SceneEditError):
    pass


class MissingAsset(SceneEditError):
    pass


class IllegalKindForDomain(SceneEditError):
    pass


class IllegalCommand(SceneEditError):
    pass


class BoundViolation(SceneEditError):
    pass


class DegenerateFootprint(SceneEditError):
    pass


# -- rendering ---------------------------------------------------------------

class SubpixelSize(SceneEditError):
    pass


# -- 3d planning -------------------------------------------------------------

class CollisionViolation(SceneEditError):
    pass


class FrustumViolation(SceneEditError):
    pass


class PlacementExhausted(SceneEditError):
    pass


class InconsistentSequence(SceneEditError):
    pass


# -- sampling ----------------------------------------------------------------

class SamplingExhausted(SceneEditError):
    pass


class SequenceTooShort(SceneEditError):
    pass


# -- numeric kernels ---------------------------------------------------------

class DimensionMismatch(SceneEditError):
    pass


class ShapeMismatch(SceneEditError):
    pass


class UnknownTarget(SceneEditError):
    pass


# -- session protocol --------------------------------------------------------

class InvalidN(SceneEditError):
    pass


class GeneratorFailure(SceneEditError):
    pass


class UnknownSession(SceneEditError):
    pass


# -- dataset io ----------------------------------------------------------------

class IoFailure(SceneEditError):
    pass


class CorruptManifest(SceneEditError):
    pass


class MissingFrame(SceneEditError):
    pass


class SchemaViolation(SceneEditError):
    pass


class TooSmall(SceneEditError):
    pass
