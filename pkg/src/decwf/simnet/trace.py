"""Append-only trace records and their line encoding.

One record per line::

    seq=3 time=7 node=p2 kind=aba protocol=aba instance=x detail=decide round=2 value=1

The seven leading fields always appear in this order; any extra fields follow
sorted by name. Values are percent-encoded so a line never contains a space
or an equals sign inside a value. The last record of a complete trace has
``kind=end``, which lets readers tell a finished trace from a truncated one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from urllib.parse import quote, unquote

from decwf.errors import TraceFormatError

FIXED = ("seq", "time", "node", "kind", "protocol", "instance", "detail")
_SAFE = "!$&'()*+,-./:;<>?@[]^_`{|}~"


def _enc(v) -> str:
    s = str(v)
    return quote(s, safe=_SAFE) if s else "%00"


def _dec(s: str) -> str:
    return "" if s == "%00" else unquote(s)


@dataclass(frozen=True)
class TraceRecord:
    seq: int
    time: int
    node: str
    kind: str
    protocol: str
    instance: str
    detail: str
    info: dict = field(default_factory=dict)

    def get(self, key, default=None):
        return self.info.get(key, default)

    def to_line(self) -> str:
        parts = [
            f"seq={self.seq}",
            f"time={self.time}",
            f"node={_enc(self.node)}",
            f"kind={_enc(self.kind)}",
            f"protocol={_enc(self.protocol)}",
            f"instance={_enc(self.instance)}",
            f"detail={_enc(self.detail)}",
        ]
        parts.extend(f"{k}={_enc(self.info[k])}" for k in sorted(self.info))
        return " ".join(parts)

    @classmethod
    def from_line(cls, line: str) -> "TraceRecord":
        fields = []
        for tok in line.split(" "):
            key, sep, val = tok.partition("=")
            if not sep or not key:
                raise TraceFormatError(f"bad token {tok!r}")
            fields.append((key, val))
        if len(fields) < len(FIXED) or tuple(k for k, _ in fields[: len(FIXED)]) != FIXED:
            raise TraceFormatError(f"missing or misordered fixed fields in {line[:60]!r}")
        extra = fields[len(FIXED) :]
        names = [k for k, _ in extra]
        if names != sorted(names) or len(set(names)) != len(names):
            raise TraceFormatError("extra fields not in sorted order")
        vals = dict(fields[: len(FIXED)])
        try:
            seq, time = int(vals["seq"]), int(vals["time"])
        except ValueError:
            raise TraceFormatError("seq and time must be integers") from None
        return cls(
            seq,
            time,
            _dec(vals["node"]),
            _dec(vals["kind"]),
            _dec(vals["protocol"]),
            _dec(vals["instance"]),
            _dec(vals["detail"]),
            {k: _dec(v) for k, v in extra},
        )


class Trace:
    def __init__(self, records=None):
        self.records: list[TraceRecord] = list(records or [])

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def append(self, time, node, kind, protocol="-", instance="-", detail="-", **info) -> TraceRecord:
        info = {k: str(v) for k, v in info.items()}
        rec = TraceRecord(len(self.records) + 1, int(time), str(node), kind, protocol, str(instance), str(detail), info)
        self.records.append(rec)
        return rec

    def select(self, kind=None, protocol=None, detail=None):
        return [
            r
            for r in self.records
            if (kind is None or r.kind == kind)
            and (protocol is None or r.protocol == protocol)
            and (detail is None or r.detail == detail)
        ]

    @property
    def complete(self) -> bool:
        return bool(self.records) and self.records[-1].kind == "end"

    def to_text(self) -> str:
        return "".join(r.to_line() + "\n" for r in self.records)

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_text())

    @classmethod
    def parse(cls, text: str) -> "Trace":
        recs = []
        for n, line in enumerate(text.split("\n"), 1):
            if not line or line.startswith("#"):
                continue
            try:
                recs.append(TraceRecord.from_line(line))
            except TraceFormatError as e:
                raise TraceFormatError(f"line {n}: {e}") from None
        return cls(recs)

    @classmethod
    def read(cls, path) -> "Trace":
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except UnicodeDecodeError:
            raise TraceFormatError("trace is not UTF-8") from None
        if text and not text.endswith("\n"):
            raise TraceFormatError("trace does not end with a newline (truncated?)")
        return cls.parse(text)
