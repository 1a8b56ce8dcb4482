"""Learn session outcomes from clickstreams and explain what moved them.

Pipeline: ingest raw event logs into featured action sequences, train an
LSTM + sigmoid outcome predictor with BPTT and Adadelta, compute per-click
prediction trajectories and their consecutive distances, rank the events
that moved predictions, cluster mispredicted sessions into intent groups,
and support expert contrasting through reports, tags and an HTTP service.
"""

__version__ = "0.1.0"

from .errors import SessionlensError  # noqa: F401
