"""Majority-vote debouncing of classification streams.

A fixed-capacity ring holds the most recent labels. An actuation command is
emitted only when some label holds a strict majority of the ring counted
against the full capacity (empty slots are abstentions) and that label
differs from the currently committed state. Holding the same object in view
therefore produces at most one command, and random per-frame glitches never
reach the actuators.
"""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass
from typing import Optional

from .domain import Classification, ClassLabel
from .errors import InvalidParamsError


@dataclass(frozen=True)
class ActuationEvent:
    """A committed-state change that should reach the actuator sink.

    `at` is the monotonic timestamp (ns) of the frame whose classification
    tipped the vote; `votes` is how many ring slots the new state held at
    commit time (always a strict majority of the capacity).
    """

    new_state: ClassLabel
    previous_state: ClassLabel
    at: int
    votes: int

    def __post_init__(self):
        if self.new_state == self.previous_state:
            raise InvalidParamsError("an actuation event must change state")
        if self.votes < 1:
            raise InvalidParamsError("an actuation event needs at least one vote")


class DebounceQueue:
    """Ring of the last <= capacity labels plus the committed majority state.

    The committed state starts at NONE and changes only inside push(), and
    only when a strict majority forms for a different label. Ties and
    majority-less rings hold the previous state rather than resetting, which
    avoids actuator chatter. Single-writer: one pipeline thread pushes;
    concurrent readers may snapshot `committed` at any time.
    """

    def __init__(self, capacity: int, confidence_floor: float | None = None):
        if capacity < 1:
            raise InvalidParamsError(f"queue capacity must be >= 1, got {capacity}")
        if confidence_floor is not None and not 0.0 <= confidence_floor <= 1.0:
            raise InvalidParamsError(
                f"confidence floor must lie in [0, 1], got {confidence_floor}"
            )
        self.capacity = capacity
        self.confidence_floor = confidence_floor
        self._ring: deque[ClassLabel] = deque()
        self._counts: Counter = Counter()
        self._committed = ClassLabel.NONE

    @property
    def committed(self) -> ClassLabel:
        return self._committed

    @property
    def labels(self) -> tuple[ClassLabel, ...]:
        """Current ring contents, oldest first."""
        return tuple(self._ring)

    def __len__(self) -> int:
        return len(self._ring)

    def majority(self) -> Optional[ClassLabel]:
        """The unique label with more than capacity/2 votes, if one exists."""
        for label, count in self._counts.items():
            if count * 2 > self.capacity:
                return label
        return None

    def push(self, classification: Classification) -> Optional[ActuationEvent]:
        """Append a label, evicting the oldest when full, and commit if a new
        strict majority formed.

        Classifications below the confidence floor (when one is set) are
        dropped before they reach the ring. Returns the actuation event for
        a state change, or None. Never raises on valid classifications.
        """
        if (
            self.confidence_floor is not None
            and classification.confidence < self.confidence_floor
        ):
            return None
        label = classification.label
        if len(self._ring) == self.capacity:
            evicted = self._ring.popleft()
            self._counts[evicted] -= 1
            if not self._counts[evicted]:
                del self._counts[evicted]
        self._ring.append(label)
        self._counts[label] += 1

        winner = self.majority()
        if winner is None or winner == self._committed:
            return None
        previous = self._committed
        self._committed = winner
        return ActuationEvent(
            new_state=winner,
            previous_state=previous,
            at=classification.frame_ts,
            votes=self._counts[winner],
        )
