"""Coded approach-trial ingestion and inter-coder reliability statistics.

A trial is one robot approach toward a seated participant.  Coders annotate
each trial with startle/surprise cue tokens from a fixed vocabulary; a trial
counts as an involuntary-motion occurrence (IMO) exactly when its cue set is
non-empty.  This module parses the trial CSV format, pairs coder annotations,
and computes Cohen's kappa with the usual agreement bands.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Sequence

from .errors import TrialFormatError, UnknownCueError

CATEGORY_STARTLE = "startle"
CATEGORY_SURPRISE = "surprise"
CATEGORY_BOTH = "both"

CHANNEL_FACIAL = "facial"
CHANNEL_GESTURE = "gesture_posture"


@dataclass(frozen=True)
class CueCode:
    """One token of the startle/surprise coding vocabulary."""

    code: str
    category: str  # startle | surprise | both
    channel: str  # facial | gesture_posture


def _vocabulary():
    facial_startle = ["RE", "LE", "CE", "TE", "HSL", "TN", "DFS"]
    facial_surprise = ["REB", "WE", "RUE", "OJ", "RL"]
    gesture_both = ["EHM", "ETM", "BF"]
    gesture_startle = ["SJ", "BT"]
    codes = {}
    for c in facial_startle:
        codes[c] = CueCode(c, CATEGORY_STARTLE, CHANNEL_FACIAL)
    for c in facial_surprise:
        codes[c] = CueCode(c, CATEGORY_SURPRISE, CHANNEL_FACIAL)
    for c in gesture_startle:
        codes[c] = CueCode(c, CATEGORY_STARTLE, CHANNEL_GESTURE)
    for c in gesture_both:
        codes[c] = CueCode(c, CATEGORY_BOTH, CHANNEL_GESTURE)
    return codes


#: Closed coding vocabulary, keyed by token.
CUE_CODES: Mapping[str, CueCode] = _vocabulary()

TRIAL_CSV_HEADER = ("participant", "trial", "d_h", "v_r", "cues", "cp", "coder")


@dataclass(frozen=True)
class TrialRecord:
    """One coded robot-approach trial."""

    participant_id: str
    trial_index: int
    d_h: float
    v_r: float
    cues: frozenset[str]
    contact_perception: bool
    coder_id: str

    def __post_init__(self):
        if self.trial_index < 1:
            raise ValueError(f"trial_index must be >= 1, got {self.trial_index}")
        if self.d_h < 0:
            raise ValueError(f"d_h must be >= 0, got {self.d_h}")
        if not self.v_r > 0:
            raise ValueError(f"v_r must be > 0, got {self.v_r}")
        unknown = set(self.cues) - set(CUE_CODES)
        if unknown:
            raise UnknownCueError(f"unknown cue token(s): {', '.join(sorted(unknown))}")

    @property
    def imo(self) -> bool:
        """IMO is present exactly when at least one cue was coded."""
        return bool(self.cues)


def _parse_bool(token, line):
    t = token.strip().lower()
    if t in ("1", "true"):
        return True
    if t in ("0", "false"):
        return False
    raise TrialFormatError(f"expected boolean 0/1, got {token!r}", line=line)


def _decode(stream) -> str:
    if isinstance(stream, bytes):
        return stream.decode("utf-8")
    if isinstance(stream, str):
        return stream
    data = stream.read()
    if isinstance(data, bytes):
        return data.decode("utf-8")
    return data


def parse_trials(stream, format: str = "csv") -> list[TrialRecord]:
    """Parse coded trials from a CSV byte stream / string / file object.

    Expected header: ``participant,trial,d_h,v_r,cues,cp,coder``.  The cue
    column is a ``;``-separated token list (empty string means no cues, i.e.
    no IMO).  Raises :class:`TrialFormatError` with the offending line number,
    or :class:`UnknownCueError` for tokens outside the vocabulary.
    """
    if format != "csv":
        raise ValueError(f"unsupported trial format: {format!r}")
    text = _decode(stream)
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise TrialFormatError("empty input, expected header row", line=1) from None
    if tuple(h.strip() for h in header) != TRIAL_CSV_HEADER:
        raise TrialFormatError(
            f"bad header {header!r}, expected {','.join(TRIAL_CSV_HEADER)}", line=1
        )
    records = []
    for line, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(TRIAL_CSV_HEADER):
            raise TrialFormatError(
                f"expected {len(TRIAL_CSV_HEADER)} fields, got {len(row)}", line=line
            )
        participant, trial, d_h, v_r, cues, cp, coder = (f.strip() for f in row)
        try:
            trial_index = int(trial)
            dist = float(d_h)
            vel = float(v_r)
        except ValueError as exc:
            raise TrialFormatError(str(exc), line=line) from None
        tokens = frozenset(t for t in cues.split(";") if t)
        unknown = tokens - set(CUE_CODES)
        if unknown:
            raise UnknownCueError(
                f"unknown cue token(s): {', '.join(sorted(unknown))}", line=line
            )
        try:
            records.append(
                TrialRecord(
                    participant_id=participant,
                    trial_index=trial_index,
                    d_h=dist,
                    v_r=vel,
                    cues=tokens,
                    contact_perception=_parse_bool(cp, line),
                    coder_id=coder,
                )
            )
        except ValueError as exc:
            raise TrialFormatError(str(exc), line=line) from None
    return records


def serialize_trials(records: Iterable[TrialRecord]) -> str:
    """Inverse of :func:`parse_trials`; cue sets are emitted sorted."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(TRIAL_CSV_HEADER)
    for r in records:
        writer.writerow(
            [
                r.participant_id,
                r.trial_index,
                repr(r.d_h),
                repr(r.v_r),
                ";".join(sorted(r.cues)),
                int(r.contact_perception),
                r.coder_id,
            ]
        )
    return out.getvalue()


# ---------------------------------------------------------------------------
# Coder agreement


@dataclass(frozen=True)
class AnnotationPair:
    """Aligned boolean labels from two coders over the same trials."""

    items: tuple[tuple[object, bool, bool], ...]

    def __post_init__(self):
        if len(self.items) < 1:
            raise ValueError("AnnotationPair requires at least one item")

    @classmethod
    def from_labels(cls, keys, labels_a, labels_b) -> "AnnotationPair":
        if not (len(keys) == len(labels_a) == len(labels_b)):
            raise ValueError("keys and label sequences must have equal length")
        return cls(tuple(zip(keys, map(bool, labels_a), map(bool, labels_b))))

    @property
    def labels_a(self) -> tuple[bool, ...]:
        return tuple(a for _, a, _ in self.items)

    @property
    def labels_b(self) -> tuple[bool, ...]:
        return tuple(b for _, _, b in self.items)


PAIRS_CSV_HEADER = ("key", "coder_a", "coder_b")


def parse_annotation_pairs(stream) -> AnnotationPair:
    """Parse paired coder labels from CSV with header ``key,coder_a,coder_b``."""
    text = _decode(stream)
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise TrialFormatError("empty input, expected header row", line=1) from None
    if tuple(h.strip() for h in header) != PAIRS_CSV_HEADER:
        raise TrialFormatError(
            f"bad header {header!r}, expected {','.join(PAIRS_CSV_HEADER)}", line=1
        )
    items = []
    for line, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 3:
            raise TrialFormatError(f"expected 3 fields, got {len(row)}", line=line)
        key, a, b = (f.strip() for f in row)
        items.append((key, _parse_bool(a, line), _parse_bool(b, line)))
    if not items:
        raise TrialFormatError("no annotation items found", line=1)
    return AnnotationPair(tuple(items))


def pair_coders(records: Iterable[TrialRecord], coder_a: str, coder_b: str) -> AnnotationPair:
    """Align two coders' IMO ratings over the trials both of them coded."""
    by_key = {}
    for r in records:
        by_key.setdefault((r.participant_id, r.trial_index), {})[r.coder_id] = r.imo
    items = [
        (key, labels[coder_a], labels[coder_b])
        for key, labels in sorted(by_key.items())
        if coder_a in labels and coder_b in labels
    ]
    if not items:
        raise ValueError(f"no trials coded by both {coder_a!r} and {coder_b!r}")
    return AnnotationPair(tuple(items))


def contingency_table(pair: AnnotationPair) -> dict[str, int]:
    """2x2 agreement counts: yes_yes, yes_no, no_yes, no_no (coder A first)."""
    counts = {"yes_yes": 0, "yes_no": 0, "no_yes": 0, "no_no": 0}
    for _, a, b in pair.items:
        key = ("yes" if a else "no") + "_" + ("yes" if b else "no")
        counts[key] += 1
    return counts


def cohen_kappa(pair: AnnotationPair) -> float:
    """Chance-corrected agreement kappa = (p_o - p_e) / (1 - p_e).

    p_o is the observed agreement fraction and p_e the chance agreement from
    the two coders' marginal label rates.  When both coders are constant and
    identical, p_e = 1 and kappa is defined as 1 (total agreement).
    """
    n = len(pair.items)
    agree = sum(1 for _, a, b in pair.items if a == b)
    yes_a = sum(1 for _, a, _ in pair.items if a)
    yes_b = sum(1 for _, _, b in pair.items if b)
    # p_e = 1 exactly when both coders use a single, identical label.
    if yes_a == n and yes_b == n:
        return 1.0
    if yes_a == 0 and yes_b == 0:
        return 1.0
    p_o = agree / n
    p_a = yes_a / n
    p_b = yes_b / n
    p_e = p_a * p_b + (1.0 - p_a) * (1.0 - p_b)
    return (p_o - p_e) / (1.0 - p_e)


#: Landis-Koch agreement bands, as (upper bound, label); kappa <= bound.
_KAPPA_BANDS = (
    (0.0, "poor"),
    (0.20, "slight"),
    (0.40, "fair"),
    (0.60, "moderate"),
    (0.80, "substantial"),
    (1.0, "almost_perfect"),
)

KAPPA_BAND_LABELS = tuple(label for _, label in _KAPPA_BANDS)


def kappa_band(kappa: float) -> str:
    """Landis-Koch label for a kappa value; negative values band as poor."""
    if not -1.0 <= kappa <= 1.0:
        raise ValueError(f"kappa must be in [-1, 1], got {kappa}")
    if kappa < 0.0:
        return "poor"
    for bound, label in _KAPPA_BANDS[1:]:
        if kappa <= bound:
            return label
    return "almost_perfect"


def kappa_report(pair: AnnotationPair) -> dict:
    """Machine-readable reliability report for an annotation pairing."""
    kappa = cohen_kappa(pair)
    return {
        "kappa": kappa,
        "band": kappa_band(kappa),
        "n_items": len(pair.items),
        "contingency": contingency_table(pair),
    }


def format_kappa_report(report: Mapping) -> str:
    """Render a kappa report as a small fixed-width text table."""
    c = report["contingency"]
    lines = [
        f"items: {report['n_items']}",
        "contingency      B:yes   B:no",
        f"  A:yes        {c['yes_yes']:6d} {c['yes_no']:6d}",
        f"  A:no         {c['no_yes']:6d} {c['no_no']:6d}",
        f"kappa: {report['kappa']:.4f}",
        f"band:  {report['band']}",
    ]
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Cue distributions


def cue_counts_by_trial_index(records: Iterable[TrialRecord]) -> dict[int, int]:
    """Total number of coded cues per trial index; absent indices are omitted."""
    counts: dict[int, int] = {}
    for r in records:
        counts[r.trial_index] = counts.get(r.trial_index, 0) + len(r.cues)
    return counts


def first_trial_outlier(counts: Mapping[int, int]) -> bool:
    """True when the first approach gathered strictly more cues than any later one.

    This is the evidence check that justifies dropping first approaches from
    the risk matrix: participants do not anticipate the first motion at all.
    """
    first = counts.get(1, 0)
    later = [c for idx, c in counts.items() if idx >= 2]
    return first > (max(later) if later else 0)


# ---------------------------------------------------------------------------
# Coder merge policies for risk-matrix construction

MERGE_EITHER_CODER = "either_coder"
MERGE_BOTH_CODERS = "both_coders"
MERGE_SPECIFIC_CODER = "specific_coder"

MERGE_POLICIES = (MERGE_EITHER_CODER, MERGE_BOTH_CODERS, MERGE_SPECIFIC_CODER)


class MergedTrial(NamedTuple):
    participant_id: str
    trial_index: int
    d_h: float
    v_r: float
    imo: bool


def merge_imo_by_trial(
    records: Sequence[TrialRecord],
    merge_policy: str = MERGE_EITHER_CODER,
    coder: str | None = None,
) -> list[MergedTrial]:
    """Collapse possibly multi-coder records into one IMO verdict per trial.

    either_coder: IMO if any coder saw a cue; both_coders: IMO only if every
    coder of that trial saw one; specific_coder: keep only ``coder``'s records.
    Distance/velocity must agree across a trial's records.
    """
    if merge_policy not in MERGE_POLICIES:
        raise ValueError(f"unknown merge policy {merge_policy!r}")
    if merge_policy == MERGE_SPECIFIC_CODER:
        if coder is None:
            raise ValueError("specific_coder policy requires a coder id")
        records = [r for r in records if r.coder_id == coder]
    groups: dict[tuple[str, int], list[TrialRecord]] = {}
    for r in records:
        groups.setdefault((r.participant_id, r.trial_index), []).append(r)
    merged = []
    for (participant, index), group in sorted(groups.items()):
        d_h, v_r = group[0].d_h, group[0].v_r
        for r in group[1:]:
            if abs(r.d_h - d_h) > 1e-9 or abs(r.v_r - v_r) > 1e-9:
                raise ValueError(
                    f"inconsistent d_h/v_r across coders for trial {(participant, index)}"
                )
        if merge_policy == MERGE_BOTH_CODERS:
            imo = all(r.imo for r in group)
        else:
            imo = any(r.imo for r in group)
        merged.append(MergedTrial(participant, index, d_h, v_r, imo))
    return merged
