"""Domain model and codec for the data-collection asset interchange format.

The interchange format is a UTF-8 JSON document whose field names and
nesting follow the dashboard export layout (``Metadata.record`` with a
``StartAndDestinationModel`` and a ``SampleDataModel`` array). Numeric
settings travel as strings ("Vicinity": "25"); empty strings mean absent.
Unknown fields are preserved verbatim so documents round-trip.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Any, Optional

from .geo import GeoPoint

MODES = ("Simple", "Sequential", "Dynamic")
QUESTION_TYPES = ("radio", "checkbox", "likert", "textbox")
SENSOR_KINDS = ("light", "gyroscope", "proximity", "accelerometer", "location", "noise")
FREQUENCIES = ("Low", "Medium", "High")


class AssetSyntaxError(ValueError):
    """The document is not well-formed JSON."""


class AssetSchemaError(ValueError):
    """A mandatory field is missing or malformed; carries the field path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class AssetRangeError(ValueError):
    """A field value is out of its allowed range; carries the field path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class NoTaskError(ValueError):
    """Auto-assignment requires at least one task in the project."""


@dataclass(frozen=True)
class SensorSpec:
    kind: str

    def __post_init__(self) -> None:
        if self.kind not in SENSOR_KINDS:
            raise ValueError(f"unknown sensor kind {self.kind!r}")


@dataclass(frozen=True)
class QuestionOption:
    id: int
    name: str
    next_question: Optional[int] = None
    credits: Optional[int] = None
    extra: tuple = ()


@dataclass(frozen=True)
class PoiQuestion:
    id: int
    text: str
    qtype: str
    location: GeoPoint
    sensors: tuple[SensorSpec, ...] = ()
    time_min: float = 0.0
    frequency: str = "Medium"
    sequence_flag: bool = False
    visibility: bool = True
    mandatory: bool = True
    options: tuple[QuestionOption, ...] = ()
    combination: Any = None
    vicinity_m: float = 25.0
    extra: tuple = ()


@dataclass(frozen=True)
class Asset:
    id: str
    name: str
    url: str
    mode: str
    default_credit: int
    questions: tuple[PoiQuestion, ...]
    start: Optional[GeoPoint] = None
    destination: Optional[GeoPoint] = None
    zone_shape: str = "circle"  # or "ellipse"; not part of the wire format
    extra: tuple = ()
    record_extra: tuple = ()
    sd_extra: tuple = ()


@dataclass(frozen=True)
class Project:
    id: str
    name: str
    owner: str
    auto_assign: bool = False
    created_at: int = 0  # epoch ms UTC


@dataclass(frozen=True)
class Task:
    id: str
    project_id: str
    name: str
    created_at: int = 0
    status: str = "Active"  # Draft | Active | Closed


@dataclass(frozen=True)
class Assignment:
    id: str
    asset_id: str
    task_id: str
    participant_ids: frozenset[str] = frozenset()  # empty = open enrollment
    created_at: int = 0


@dataclass(frozen=True)
class Participant:
    id: str
    pseudonym: str
    enrolled_projects: frozenset[str] = frozenset()


@dataclass(frozen=True)
class Finding:
    path: str
    message: str


@dataclass
class ValidationReport:
    findings: list[Finding] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.findings

    def add(self, path: str, message: str) -> None:
        self.findings.append(Finding(path, message))


# --- parsing helpers -------------------------------------------------------

_SENSOR_NAMES = {
    "light": "light",
    "gyroscope": "gyroscope",
    "proximity": "proximity",
    "accelerometer": "accelerometer",
    "location": "location",
    "gps": "location",
    "noise": "noise",
}


def _require(obj: dict, key: str, path: str) -> Any:
    if key not in obj:
        raise AssetSchemaError(f"{path}.{key}", "missing mandatory field")
    return obj[key]


def _num(value: Any, path: str, *, allow_empty: bool = False) -> Optional[float]:
    if value is None or (isinstance(value, str) and value.strip() == ""):
        if allow_empty:
            return None
        raise AssetSchemaError(path, "missing numeric value")
    try:
        return float(value)
    except (TypeError, ValueError):
        raise AssetSchemaError(path, f"not a number: {value!r}") from None


def _bool(value: Any, path: str) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, str) and value.lower() in ("true", "false"):
        return value.lower() == "true"
    raise AssetSchemaError(path, f"not a boolean: {value!r}")


def _latitude(value: Any, path: str) -> float:
    v = _num(value, path)
    if not -90.0 <= v <= 90.0:
        raise AssetRangeError(path, f"latitude {v} out of [-90, 90]")
    return v


def _longitude(value: Any, path: str) -> float:
    v = _num(value, path)
    if not -180.0 <= v < 180.0:
        raise AssetRangeError(path, f"longitude {v} out of [-180, 180)")
    return v


def _extras(obj: dict, consumed: set[str]) -> tuple:
    return tuple((k, obj[k]) for k in obj if k not in consumed)


def _parse_option(obj: dict, path: str) -> QuestionOption:
    consumed = {"id", "Name", "NextQuestion", "Credits"}
    oid = _require(obj, "id", path)
    name = _require(obj, "Name", path)
    nq = obj.get("NextQuestion")
    credits = _num(obj.get("Credits"), f"{path}.Credits", allow_empty=True)
    if credits is not None and credits < 0:
        raise AssetRangeError(f"{path}.Credits", "credits must be >= 0")
    return QuestionOption(
        id=int(oid),
        name=str(name),
        next_question=int(nq) if nq is not None else None,
        credits=int(credits) if credits is not None else None,
        extra=_extras(obj, consumed),
    )


def _parse_question(obj: dict, path: str) -> PoiQuestion:
    consumed = {
        "id", "Question", "Type", "Latitude", "Longitude", "Sensor", "Time",
        "Frequency", "Sequence", "Visibility", "Mandatory", "Option",
        "Combination", "Vicinity",
    }
    qid = int(_require(obj, "id", path))
    text = str(_require(obj, "Question", path))
    qtype = str(_require(obj, "Type", path))
    if qtype not in QUESTION_TYPES:
        raise AssetSchemaError(f"{path}.Type", f"unknown question type {qtype!r}")
    lat = _latitude(_require(obj, "Latitude", path), f"{path}.Latitude")
    lon = _longitude(_require(obj, "Longitude", path), f"{path}.Longitude")

    sensors = []
    for i, s in enumerate(obj.get("Sensor") or []):
        sname = str(_require(s, "Name", f"{path}.Sensor[{i}]")).lower()
        if sname not in _SENSOR_NAMES:
            raise AssetSchemaError(f"{path}.Sensor[{i}].Name", f"unknown sensor {sname!r}")
        sensors.append(SensorSpec(_SENSOR_NAMES[sname]))
    if len({s.kind for s in sensors}) != len(sensors):
        raise AssetSchemaError(f"{path}.Sensor", "duplicate sensor kinds")

    time_min = _num(obj.get("Time", 0), f"{path}.Time")
    if time_min < 0:
        raise AssetRangeError(f"{path}.Time", "duration must be >= 0")
    frequency = str(obj.get("Frequency", "Medium"))
    if frequency not in FREQUENCIES:
        raise AssetSchemaError(f"{path}.Frequency", f"unknown frequency {frequency!r}")
    sequence_flag = str(obj.get("Sequence", "Disable")).lower() == "enable"
    visibility = _bool(obj.get("Visibility", "true"), f"{path}.Visibility")
    mandatory = _bool(obj.get("Mandatory", "true"), f"{path}.Mandatory")
    options = tuple(
        _parse_option(o, f"{path}.Option[{i}]")
        for i, o in enumerate(obj.get("Option") or [])
    )
    vicinity = _num(_require(obj, "Vicinity", path), f"{path}.Vicinity")
    if vicinity <= 0:
        raise AssetRangeError(f"{path}.Vicinity", "vicinity must be > 0")

    return PoiQuestion(
        id=qid,
        text=text,
        qtype=qtype,
        location=GeoPoint(lat, lon),
        sensors=tuple(sensors),
        time_min=time_min,
        frequency=frequency,
        sequence_flag=sequence_flag,
        visibility=visibility,
        mandatory=mandatory,
        options=options,
        combination=obj.get("Combination"),
        vicinity_m=vicinity,
        extra=_extras(obj, consumed),
    )


def parse_asset(document: str) -> Asset:
    """Parse an interchange document into an Asset."""
    try:
        root = json.loads(document)
    except json.JSONDecodeError as e:
        raise AssetSyntaxError(str(e)) from e
    if not isinstance(root, dict):
        raise AssetSchemaError("$", "document root must be an object")

    consumed_root = {"Id", "Name", "Url", "Metadata"}
    asset_id = str(_require(root, "Id", "$"))
    name = str(_require(root, "Name", "$"))
    if not name:
        raise AssetSchemaError("$.Name", "name must be non-empty")
    url = str(root.get("Url", ""))
    metadata = _require(root, "Metadata", "$")
    record = _require(metadata, "record", "$.Metadata")
    sd = _require(record, "StartAndDestinationModel", "$.Metadata.record")

    consumed_sd = {
        "StartLatitude", "StartLongitude", "DestinationLatitude",
        "DestinationLongitude", "Mode", "DefaultCredit",
    }
    mode = str(_require(sd, "Mode", "$...StartAndDestinationModel"))
    if mode not in MODES:
        raise AssetSchemaError("$...StartAndDestinationModel.Mode", f"unknown mode {mode!r}")
    credit = _num(sd.get("DefaultCredit"), "$...StartAndDestinationModel.DefaultCredit",
                  allow_empty=True)
    if credit is not None and credit < 0:
        raise AssetRangeError("$...StartAndDestinationModel.DefaultCredit",
                              "credit must be >= 0")

    start = destination = None
    s_lat = _num(sd.get("StartLatitude"), "$...StartLatitude", allow_empty=True)
    s_lon = _num(sd.get("StartLongitude"), "$...StartLongitude", allow_empty=True)
    if s_lat is not None and s_lon is not None:
        start = GeoPoint(s_lat, s_lon)
    d_lat = _num(sd.get("DestinationLatitude"), "$...DestinationLatitude", allow_empty=True)
    d_lon = _num(sd.get("DestinationLongitude"), "$...DestinationLongitude", allow_empty=True)
    if d_lat is not None and d_lon is not None:
        destination = GeoPoint(d_lat, d_lon)

    samples = _require(record, "SampleDataModel", "$.Metadata.record")
    if not isinstance(samples, list) or not samples:
        raise AssetSchemaError("$.Metadata.record.SampleDataModel",
                               "asset needs at least one question")
    questions = tuple(
        _parse_question(q, f"SampleDataModel[{i}]") for i, q in enumerate(samples)
    )
    ids = [q.id for q in questions]
    if len(set(ids)) != len(ids):
        raise AssetSchemaError("$.Metadata.record.SampleDataModel", "duplicate question ids")

    return Asset(
        id=asset_id,
        name=name,
        url=url,
        mode=mode,
        default_credit=int(credit) if credit is not None else 0,
        start=start,
        destination=destination,
        questions=questions,
        extra=_extras(root, consumed_root),
        record_extra=_extras(record, {"StartAndDestinationModel", "SampleDataModel"}),
        sd_extra=_extras(sd, consumed_sd),
    )


# --- serialization ---------------------------------------------------------

def _fmt_coord(v: float) -> str:
    return repr(v)


def _option_doc(o: QuestionOption) -> dict:
    doc = {
        "id": o.id,
        "Name": o.name,
        "NextQuestion": o.next_question,
        "Credits": str(o.credits) if o.credits is not None else "",
    }
    doc.update(dict(o.extra))
    return doc


def _question_doc(q: PoiQuestion) -> dict:
    doc = {
        "id": q.id,
        "Question": q.text,
        "Type": q.qtype,
        "Latitude": _fmt_coord(q.location.lat_deg),
        "Longitude": _fmt_coord(q.location.lon_deg),
        "Sensor": [
            {"id": i + 1, "Name": s.kind.capitalize()} for i, s in enumerate(q.sensors)
        ],
        "Time": _fmt_num(q.time_min),
        "Frequency": q.frequency,
        "Sequence": "Enable" if q.sequence_flag else "Disable",
        "Visibility": "true" if q.visibility else "false",
        "Mandatory": "true" if q.mandatory else "false",
        "Option": [_option_doc(o) for o in q.options],
        "Combination": q.combination,
        "Vicinity": _fmt_num(q.vicinity_m),
    }
    doc.update(dict(q.extra))
    return doc


def _fmt_num(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(v)


def serialize_asset(a: Asset) -> str:
    """Serialize an Asset back into the interchange document format."""
    sd = {
        "StartLatitude": _fmt_coord(a.start.lat_deg) if a.start else None,
        "StartLongitude": _fmt_coord(a.start.lon_deg) if a.start else None,
        "DestinationLatitude": _fmt_coord(a.destination.lat_deg) if a.destination else None,
        "DestinationLongitude": _fmt_coord(a.destination.lon_deg) if a.destination else None,
        "Mode": a.mode,
        "DefaultCredit": str(a.default_credit),
    }
    sd.update(dict(a.sd_extra))
    record = {
        "StartAndDestinationModel": sd,
        "SampleDataModel": [_question_doc(q) for q in a.questions],
    }
    record.update(dict(a.record_extra))
    root = {
        "Id": a.id,
        "Name": a.name,
        "Url": a.url,
        "Metadata": {"record": record},
    }
    root.update(dict(a.extra))
    return json.dumps(root, indent=2, ensure_ascii=False)


# --- validation ------------------------------------------------------------

def validate_asset(a: Asset) -> ValidationReport:
    """Structural validation beyond what the codec enforces."""
    report = ValidationReport()
    ids = {q.id for q in a.questions}

    for i, q in enumerate(a.questions):
        path = f"SampleDataModel[{i}]"
        if q.qtype in ("radio", "checkbox", "likert") and len(q.options) < 2:
            report.add(f"{path}.Option", f"{q.qtype} question needs at least 2 options")
        if q.qtype == "textbox" and q.options:
            report.add(f"{path}.Option", "textbox question must not carry options")
        seen_opt = set()
        for j, o in enumerate(q.options):
            if o.id in seen_opt:
                report.add(f"{path}.Option[{j}]", f"duplicate option id {o.id}")
            seen_opt.add(o.id)
            if o.next_question is not None and o.next_question not in ids:
                report.add(f"{path}.Option[{j}].NextQuestion",
                           f"dangling NextQuestion {o.next_question}")

    if a.mode == "Dynamic" and a.questions:
        entry = min(ids)
        reachable = {entry}
        frontier = [entry]
        by_id = {q.id: q for q in a.questions}
        while frontier:
            q = by_id[frontier.pop()]
            for o in q.options:
                nq = o.next_question
                if nq is not None and nq in ids and nq not in reachable:
                    reachable.add(nq)
                    frontier.append(nq)
        for q in a.questions:
            if q.id not in reachable:
                report.add(f"SampleDataModel[id={q.id}]", f"unreachable question {q.id}")

    return report


def auto_assign(project: Project, asset: Asset, tasks: list[Task],
                assignment_id: str = "", created_at: int = 0) -> Assignment:
    """Connect a created asset with the project's most recent task.

    The assignment is open to all participants in the pool (empty explicit
    participant set = open enrollment).
    """
    candidates = [t for t in tasks if t.project_id == project.id]
    if not candidates:
        raise NoTaskError(f"project {project.id} has no task")
    latest = max(candidates, key=lambda t: (t.created_at, t.id))
    return Assignment(
        id=assignment_id or f"auto-{asset.id}-{latest.id}",
        asset_id=asset.id,
        task_id=latest.id,
        participant_ids=frozenset(),
        created_at=created_at,
    )


def with_mode(a: Asset, mode: str) -> Asset:
    """Copy of the asset with a different navigational modality."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    return replace(a, mode=mode)
