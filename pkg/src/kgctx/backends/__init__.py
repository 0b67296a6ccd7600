from .base import CandidateSet, Sample, SequenceModel, generate_candidates
from .mocks import MockNeighborCopyModel, MockUniformModel, relation_context_mentions
from .remote import RemoteModel

__all__ = [
    "CandidateSet",
    "Sample",
    "SequenceModel",
    "generate_candidates",
    "MockNeighborCopyModel",
    "MockUniformModel",
    "relation_context_mentions",
    "RemoteModel",
]
