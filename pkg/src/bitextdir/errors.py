"""Exception hierarchy for bitextdir.

Every data-level failure raises a subclass of :class:`BitextDirError` so the
CLI can map them uniformly to exit code 2. Usage errors (bad flags) never
reach these classes.
"""


class BitextDirError(Exception):
    """Base class for all data and contract errors raised by this package."""


class MissingFileError(BitextDirError):
    def __init__(self, path):
        super().__init__(f"file not found: {path}")
        self.path = path


class InvalidEncodingError(BitextDirError):
    """A corpus file contained bytes that are not valid UTF-8."""

    def __init__(self, path, line_no):
        super().__init__(f"invalid UTF-8 in {path} at line {line_no}")
        self.path = path
        self.line_no = line_no


class ManifestSyntaxError(BitextDirError):
    def __init__(self, path, line_no, reason):
        super().__init__(f"bad manifest line {line_no} in {path}: {reason}")
        self.path = path
        self.line_no = line_no


class DuplicateNameError(BitextDirError):
    def __init__(self, name):
        super().__init__(f"duplicate sub-corpus name: {name!r}")
        self.name = name


class LineCountMismatchError(BitextDirError):
    def __init__(self, name, n_src, n_tgt):
        super().__init__(
            f"sub-corpus {name!r}: source has {n_src} lines, target has {n_tgt}"
        )
        self.name = name
        self.n_src = n_src
        self.n_tgt = n_tgt


class OneSidedBlankLineError(BitextDirError):
    def __init__(self, sub_corpus, line_no):
        super().__init__(
            f"sub-corpus {sub_corpus!r}: line {line_no} is blank on one side only"
        )
        self.sub_corpus = sub_corpus
        self.line_no = line_no


class EmptyInputError(BitextDirError):
    """An operation that requires a non-empty sequence got an empty one."""


class InvalidEpsilonError(BitextDirError):
    def __init__(self, epsilon):
        super().__init__(f"smoothing epsilon must be > 0, got {epsilon}")
        self.epsilon = epsilon


class EmptyPartitionError(BitextDirError):
    def __init__(self, name):
        super().__init__(f"partition {name!r} is empty")
        self.name = name


class EmptyClassError(BitextDirError):
    def __init__(self, which):
        super().__init__(f"training class {which!r} has no usable lines")
        self.which = which


class InvalidAlphaError(BitextDirError):
    def __init__(self, alpha):
        super().__init__(f"smoothing alpha must be > 0, got {alpha}")
        self.alpha = alpha


class SideMismatchError(BitextDirError):
    def __init__(self, expected, got):
        super().__init__(f"model side mismatch: expected {expected}, got {got}")
        self.expected = expected
        self.got = got


class VersionMismatchError(BitextDirError):
    def __init__(self, expected, got):
        super().__init__(f"model format version {got!r} not supported (reader is {expected!r})")
        self.expected = expected
        self.got = got


class CorruptModelError(BitextDirError):
    def __init__(self, reason):
        super().__init__(f"corrupt model file: {reason}")
        self.reason = reason


class InconsistentScriptError(BitextDirError):
    """An edit script does not consume its hypothesis/reference consistently."""


class MissingMtLineError(BitextDirError):
    def __init__(self, sub_corpus, line_no):
        super().__init__(f"no MT hypothesis for sub-corpus {sub_corpus!r} line {line_no}")
        self.sub_corpus = sub_corpus
        self.line_no = line_no


class ShortfallError(BitextDirError):
    def __init__(self, name, have, want):
        super().__init__(f"sub-corpus {name!r} has {have} pairs, need {want}")
        self.name = name
        self.have = have
        self.want = want


class MissingScoreError(BitextDirError):
    def __init__(self, sub_corpus, line_no):
        super().__init__(f"no direction score for sub-corpus {sub_corpus!r} line {line_no}")
        self.sub_corpus = sub_corpus
        self.line_no = line_no


class InsufficientSyntheticError(BitextDirError):
    def __init__(self, need, have):
        super().__init__(f"need {need} synthetic records but only {have} available")
        self.need = need
        self.have = have


class LengthMismatchError(BitextDirError):
    def __init__(self, n_a, n_b):
        super().__init__(f"sequence lengths differ: {n_a} vs {n_b}")
        self.n_a = n_a
        self.n_b = n_b


class ConstantInputError(BitextDirError):
    """Correlation is undefined for constant (or shorter-than-2) input."""


class MissingClassInGoldError(BitextDirError):
    def __init__(self, label):
        super().__init__(f"declared class {label!r} never occurs in gold labels")
        self.label = label


class FormatError(BitextDirError):
    """A dataset or scores file violates its documented layout."""

    def __init__(self, path, reason, line_no=None):
        where = f"{path}" if line_no is None else f"{path} line {line_no}"
        super().__init__(f"{where}: {reason}")
        self.path = path
        self.line_no = line_no
        self.reason = reason
