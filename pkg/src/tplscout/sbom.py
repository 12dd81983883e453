"""Minimal CycloneDX-compatible SBOM projection of library reports.

The field layout is documented in docs/sbom.md. Serialization is a pure
function of the document, so identical reports and an identical timestamp
give byte-identical output.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone

from tplscout import __version__
from tplscout.model import FailureReason, LibraryReport, Status

TOOL_NAME = "tplscout"
SPEC_VERSION = "1.5"
PROPERTY_PREFIX = "tplscout:"
_TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M:%SZ"


@dataclass(frozen=True)
class SbomComponent:
    name: str
    status: Status
    description: str | None = None
    website: str | None = None
    vendor_hint: str | None = None
    version_hint: str | None = None
    failure_reason: FailureReason | None = None
    iterations_used: int = 0
    token_usage: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "status", Status(self.status))
        if self.failure_reason is not None:
            object.__setattr__(self, "failure_reason", FailureReason(self.failure_reason))

    @classmethod
    def from_report(cls, report: LibraryReport) -> SbomComponent:
        return cls(
            name=report.name,
            status=report.status,
            description=report.description,
            website=report.origin_url,
            vendor_hint=report.vendor_hint,
            version_hint=report.version_hint,
            failure_reason=report.failure_reason,
            iterations_used=report.iterations_used,
            token_usage=report.token_usage,
        )


@dataclass(frozen=True)
class SbomDocument:
    generated_at: datetime
    components: tuple[SbomComponent, ...] = ()
    tool_name: str = TOOL_NAME
    tool_version: str = __version__

    def __post_init__(self) -> None:
        ts = self.generated_at
        if ts.tzinfo is None:
            raise ValueError("generated_at must be timezone-aware")
        object.__setattr__(self, "generated_at", ts.astimezone(timezone.utc).replace(microsecond=0))
        object.__setattr__(self, "components", tuple(self.components))

    @classmethod
    def from_reports(cls, reports, generated_at: datetime) -> SbomDocument:
        return cls(generated_at=generated_at, components=tuple(SbomComponent.from_report(r) for r in reports))


def _component_json(comp: SbomComponent, index: int) -> dict:
    out: dict = {"type": "library", "bom-ref": f"component-{index}", "name": comp.name}
    if comp.description:
        out["description"] = comp.description
    if comp.website:
        out["externalReferences"] = [{"type": "website", "url": comp.website}]
    props = [("status", comp.status.value)]
    if comp.failure_reason is not None:
        props.append(("failure_reason", comp.failure_reason.value))
    if comp.vendor_hint:
        props.append(("evidence:vendor_hint", comp.vendor_hint))
    if comp.version_hint:
        props.append(("evidence:version_hint", comp.version_hint))
    props.append(("iterations_used", str(comp.iterations_used)))
    props.append(("token_usage", str(comp.token_usage)))
    out["properties"] = [{"name": PROPERTY_PREFIX + k, "value": v} for k, v in props]
    return out


def to_dict(doc: SbomDocument) -> dict:
    components = [_component_json(c, i) for i, c in enumerate(doc.components)]
    body = {
        "metadata": {
            "timestamp": doc.generated_at.strftime(_TIMESTAMP_FORMAT),
            "tools": {"components": [{"type": "application", "name": doc.tool_name, "version": doc.tool_version}]},
        },
        "components": components,
    }
    # Serial number is content-derived so that replays stay byte-identical.
    digest_src = json.dumps(body, sort_keys=True, separators=(",", ":"))
    serial = uuid.uuid5(uuid.NAMESPACE_URL, f"{TOOL_NAME}:{digest_src}")
    return {
        "bomFormat": "CycloneDX",
        "specVersion": SPEC_VERSION,
        "serialNumber": f"urn:uuid:{serial}",
        "version": 1,
        **body,
    }


def dumps(doc: SbomDocument) -> str:
    return json.dumps(to_dict(doc), indent=2, ensure_ascii=False) + "\n"


def _props(raw: dict) -> dict[str, str]:
    out = {}
    for prop in raw.get("properties", []):
        name = prop["name"]
        if name.startswith(PROPERTY_PREFIX):
            out[name[len(PROPERTY_PREFIX):]] = prop["value"]
    return out


def from_dict(data: dict) -> SbomDocument:
    if data.get("bomFormat") != "CycloneDX":
        raise ValueError("not a CycloneDX document")
    tool = data["metadata"]["tools"]["components"][0]
    components = []
    for raw in data.get("components", []):
        props = _props(raw)
        website = None
        for ref in raw.get("externalReferences", []):
            if ref.get("type") == "website":
                website = ref["url"]
                break
        components.append(
            SbomComponent(
                name=raw["name"],
                status=Status(props["status"]),
                description=raw.get("description"),
                website=website,
                vendor_hint=props.get("evidence:vendor_hint"),
                version_hint=props.get("evidence:version_hint"),
                failure_reason=FailureReason(props["failure_reason"]) if "failure_reason" in props else None,
                iterations_used=int(props.get("iterations_used", 0)),
                token_usage=int(props.get("token_usage", 0)),
            )
        )
    ts = datetime.strptime(data["metadata"]["timestamp"], _TIMESTAMP_FORMAT).replace(tzinfo=timezone.utc)
    return SbomDocument(
        generated_at=ts,
        components=tuple(components),
        tool_name=tool["name"],
        tool_version=tool["version"],
    )


def loads(text: str) -> SbomDocument:
    return from_dict(json.loads(text))


@dataclass
class SbomAssembler:
    """Collects reports from concurrent runs and emits them in submission-slot order."""

    slots: dict[int, LibraryReport] = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def submit(self, index: int, report: LibraryReport) -> None:
        with self._lock:
            if index in self.slots:
                raise ValueError(f"slot {index} already filled")
            self.slots[index] = report

    def reports(self) -> list[LibraryReport]:
        with self._lock:
            return [self.slots[i] for i in sorted(self.slots)]

    def build(self, generated_at: datetime) -> SbomDocument:
        return SbomDocument.from_reports(self.reports(), generated_at)
