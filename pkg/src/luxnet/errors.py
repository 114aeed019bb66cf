"""Exception types shared across the package."""


class ScenarioError(ValueError):
    """A scenario definition is malformed or inconsistent.

    Raised before any simulation work starts; the message names the
    offending field or key.
    """


class InfeasibleError(RuntimeError):
    """A well-formed request cannot be satisfied by any schedule.

    Distinct from ScenarioError: the inputs parse fine, but the run
    cannot proceed (for example, energy sharing is requested in a
    network where no node carries an emitter).
    """
