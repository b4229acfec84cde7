"""Exception hierarchy shared across the pipeline stages."""


class AffectPipeError(Exception):
    """Base class for all framework errors."""


# --- dataset / acquisition ---

class EmptyDataset(AffectPipeError):
    pass


class IOFailure(AffectPipeError):
    pass


class MissingHeader(AffectPipeError):
    def __init__(self, name):
        super().__init__(f"missing required CSV header: {name!r}")
        self.name = name


class NonNumericCell(AffectPipeError):
    def __init__(self, row):
        super().__init__(f"non-numeric cell at data row {row}")
        self.row = row


class ValidationFailed(AffectPipeError):
    def __init__(self, violations):
        super().__init__("; ".join(str(v) for v in violations))
        self.violations = list(violations)


class DuplicateSignalFile(AffectPipeError):
    pass


class UnknownModality(AffectPipeError):
    pass


# --- pipeline construction / execution ---

class IncompatibleStages(AffectPipeError):
    def __init__(self, i, j, got, wanted):
        super().__init__(
            f"stage {i} output {got!r} is incompatible with stage {j} input {wanted!r}"
        )
        self.index = i
        self.next_index = j
        self.got = got
        self.wanted = wanted


class MissingStage(AffectPipeError):
    def __init__(self, kind):
        super().__init__(f"required stage missing: {kind}")
        self.kind = kind


class MisorderedStage(AffectPipeError):
    def __init__(self, kind, detail=""):
        super().__init__(f"stage out of order: {kind}" + (f" ({detail})" if detail else ""))
        self.kind = kind


class StageExecutionError(AffectPipeError):
    def __init__(self, stage_index, kind, cause):
        super().__init__(f"stage {stage_index} ({kind}) failed: {cause}")
        self.stage_index = stage_index
        self.kind = kind
        self.cause = cause


# --- signal processing ---

class CutoffOutOfRange(AffectPipeError):
    pass


class InvalidOrder(AffectPipeError):
    pass


class SampleRateMismatch(AffectPipeError):
    pass


# --- feature extraction ---

class SeriesTooShort(AffectPipeError):
    pass


class NoBeatsDetected(AffectPipeError):
    pass


class TooFewBeats(AffectPipeError):
    pass


class DegenerateSpectrum(AffectPipeError):
    pass


class TooFewSamples(AffectPipeError):
    pass


class NoBreathsDetected(AffectPipeError):
    pass


class SampleRateTooLow(AffectPipeError):
    pass


# --- labels / selection ---

class UnmappedPhase(AffectPipeError):
    def __init__(self, name):
        super().__init__(f"phase {name!r} has no class mapping")
        self.name = name


class WrongQuestionnaire(AffectPipeError):
    pass


class InsufficientReports(AffectPipeError):
    def __init__(self, subject):
        super().__init__(f"subject {subject!r} needs reports for at least 2 phases")
        self.subject = subject


class MissingReport(AffectPipeError):
    pass


class KTooLarge(AffectPipeError):
    pass


# --- classification / evaluation ---

class SingleClass(AffectPipeError):
    pass


class NonNumericFeature(AffectPipeError):
    pass


class SchemaMismatch(AffectPipeError):
    pass


class TooFewSubjects(AffectPipeError):
    pass


class TooFewRows(AffectPipeError):
    pass


class LengthMismatch(AffectPipeError):
    pass


class AUCUndefined(AffectPipeError):
    pass


# --- synthesis ---

class InvalidRate(AffectPipeError):
    pass


class SCROutOfRange(AffectPipeError):
    pass


# --- configuration ---

class ConfigError(AffectPipeError):
    pass
