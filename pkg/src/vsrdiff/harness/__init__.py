from . import ablate, analyze, config, dataset, evaluate, io, train  # noqa: F401
