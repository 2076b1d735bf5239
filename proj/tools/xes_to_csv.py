#!/usr/bin/env python3
"""Flatten an XES (optionally gzipped) event log into the CSV layout read by streampredict.

Output columns: case_id, activity, timestamp. Rows are written trace by trace in
file order; use `ordering = "timestamp"` in the run config to interleave cases.
Timestamps are normalized to UTC ISO-8601 with millisecond precision.
"""

import argparse
import csv
import gzip
import sys
import xml.etree.ElementTree as ET
from datetime import datetime, timezone


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _open(path: str):
    if path.endswith(".gz"):
        return gzip.open(path, "rb")
    return open(path, "rb")


def _normalize_timestamp(raw: str) -> str:
    if not raw:
        return ""
    ts = datetime.fromisoformat(raw.replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    ts = ts.astimezone(timezone.utc)
    return ts.strftime("%Y-%m-%dT%H:%M:%S.") + f"{ts.microsecond // 1000:03d}Z"


def convert(src: str, dst, case_key: str, activity_keys: list[str], timestamp_key: str) -> tuple[int, int]:
    writer = csv.writer(dst, lineterminator="\n")
    writer.writerow(["case_id", "activity", "timestamp"])
    n_traces = n_events = 0
    case_id = None
    in_event = False
    event_attrs: dict[str, str] = {}
    depth_in_event = 0

    with _open(src) as fh:
        for action, elem in ET.iterparse(fh, events=("start", "end")):
            tag = _local(elem.tag)
            if action == "start":
                if tag == "trace":
                    case_id = None
                elif tag == "event":
                    in_event = True
                    event_attrs = {}
                    depth_in_event = 0
                elif in_event:
                    depth_in_event += 1
                    # nested attributes (depth > 1) belong to their parent, skip
                    if depth_in_event == 1 and "key" in elem.attrib:
                        event_attrs[elem.attrib["key"]] = elem.attrib.get("value", "")
                elif case_id is None and tag != "log" and elem.attrib.get("key") == case_key:
                    case_id = elem.attrib.get("value", "")
                continue

            if tag == "event":
                in_event = False
                if case_id is None:
                    raise ValueError(f"event before trace attribute {case_key!r} in {src}")
                activity = "|".join(event_attrs.get(k, "") for k in activity_keys)
                writer.writerow([case_id, activity, _normalize_timestamp(event_attrs.get(timestamp_key, ""))])
                n_events += 1
                elem.clear()
            elif tag == "trace":
                n_traces += 1
                elem.clear()
            elif in_event:
                depth_in_event -= 1
    return n_traces, n_events


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("input", help="path to .xes or .xes.gz")
    parser.add_argument("output", help="output CSV path, '-' for stdout")
    parser.add_argument("--case-key", default="concept:name", help="trace attribute holding the case id")
    parser.add_argument(
        "--activity-key",
        action="append",
        dest="activity_keys",
        help="event attribute(s) forming the activity; repeat to join with '|' (default concept:name)",
    )
    parser.add_argument("--timestamp-key", default="time:timestamp")
    args = parser.parse_args(argv)
    activity_keys = args.activity_keys or ["concept:name"]

    if args.output == "-":
        traces, events = convert(args.input, sys.stdout, args.case_key, activity_keys, args.timestamp_key)
    else:
        with open(args.output, "w", encoding="utf-8", newline="") as out:
            traces, events = convert(args.input, out, args.case_key, activity_keys, args.timestamp_key)
    print(f"{args.input}: {traces} traces, {events} events", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
