import json
import sys
from datetime import datetime, timezone
from typing import Optional, TextIO

# None means "whatever sys.stdout is at call time"
_routed_stream: Optional[TextIO] = None


def _jsonable(value):
    # numpy scalars and arrays show up in numeric diagnostics
    if hasattr(value, "tolist"):
        return value.tolist()
    return str(value)


def log_event(event: str, level: str = "info", stream: Optional[TextIO] = None, **fields):
    payload = {
        "ts": datetime.now(timezone.utc).isoformat().replace("+00:00", "Z"),
        "event": event,
        "level": level,
        **fields,
    }
    out = stream or _routed_stream or sys.stdout
    print(json.dumps(payload, ensure_ascii=False, default=_jsonable), file=out)


def route_logs_to(stream: Optional[TextIO]) -> Optional[TextIO]:
    """The CLI sends events to stderr so stdout stays machine-readable; returns the previous target."""
    global _routed_stream
    previous, _routed_stream = _routed_stream, stream
    return previous
