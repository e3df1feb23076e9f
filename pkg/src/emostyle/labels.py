"""The six-way emotion taxonomy."""

import enum


class Emotion(enum.IntEnum):
    ANGER = 0
    DISGUST = 1
    FEAR = 2
    HAPPY = 3
    NEUTRAL = 4
    SAD = 5

    @classmethod
    def parse(cls, value):
        """Accept an ``Emotion``, a class code or a (case-insensitive) name.

        A few common aliases (``angry``, ``fearful``, ``disgusted``) are
        understood; "surprise" is not part of the taxonomy.
        """
        if isinstance(value, cls):
            return value
        if isinstance(value, int):
            return cls(value)
        key = str(value).strip().lower()
        key = _ALIASES.get(key, key)
        try:
            return cls[key.upper()]
        except KeyError:
            raise ValueError(f"unknown emotion {value!r}; expected one of {NAMES}") from None

    def __str__(self):
        return self.name.lower()


_ALIASES = {"angry": "anger", "fearful": "fear", "disgusted": "disgust", "happiness": "happy", "sadness": "sad"}

NAMES = tuple(str(e) for e in Emotion)
N_CLASSES = len(Emotion)
