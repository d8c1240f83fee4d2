"""Exception types shared across the workbench.

Every domain failure derives from WorkbenchError so the CLI can map it to
exit code 1 while usage errors stay on argparse's exit code 2.
"""


class WorkbenchError(Exception):
    """Base class for all domain errors."""


class ParseError(WorkbenchError):
    """A corpus file line could not be parsed."""

    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


class DanglingReferenceError(WorkbenchError):
    """A fact or query refers to an unknown entity/relation/fact id."""


class EntityCountMismatchError(WorkbenchError):
    """Donor and target queries mention different numbers of distinct entities."""


class InfeasibleConfigError(WorkbenchError):
    """Synthetic corpus settings cannot be satisfied."""


class EmptyFactSetError(WorkbenchError):
    """An operation that needs at least one fact got none."""


class EmptyMemoryError(WorkbenchError):
    """Attention over an empty memory is undefined."""


class UnknownEntityError(WorkbenchError):
    """Entity id not present in the model's vocabulary or database."""


class DivergenceError(WorkbenchError):
    """Training loss became non-finite."""


class DegenerateDesignError(WorkbenchError):
    """The surrogate design matrix stayed unusable even after the ridge fallback."""


class CoverageMismatchError(WorkbenchError):
    """A relevance vector does not cover exactly the facts of the instance."""


class ExhaustedRetriesError(WorkbenchError):
    """No valid fake fact set was found within the retry budget."""


class EmptyAgreementError(WorkbenchError):
    """The two study models agree on no query."""


class UnknownTaskError(WorkbenchError):
    """Vote for a task id that does not exist."""


class DuplicateVoteError(WorkbenchError):
    """A (task, annotator) pair voted twice."""


class NoVotesError(WorkbenchError):
    """Aggregate score requested over an empty vote set."""


class CheckpointError(WorkbenchError):
    """Model checkpoint is malformed or inconsistent with its config."""
