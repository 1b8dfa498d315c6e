#!/usr/bin/env python3
"""Convert vendor Parquet trajectory exports to the trajectory CSV read by `trafficlens ingest`.

Only the column mapping is fixed here; vendor schemas differ, so edit COLUMNS
to match the export at hand. Requires pyarrow.

    python3 tools/parquet_to_csv.py export.parquet out.csv
"""

import csv
import sys

# ingest column -> vendor column
COLUMNS = {
    "journey_id": "JourneyId",
    "timestamp": "CaptureTimestamp",  # epoch seconds or ISO-8601 UTC
    "lat": "Latitude",
    "lon": "Longitude",
    "speed_mps": "Speed",  # may be empty; ingest recomputes from positions
    "ignition": "IgnitionStatus",  # on / off / unknown
}

# vendor ignition values -> on/off/unknown
IGNITION = {"1": "on", "0": "off", "true": "on", "false": "off", "on": "on", "off": "off"}


def main(argv):
    if len(argv) != 3:
        sys.exit(__doc__)
    try:
        import pyarrow.parquet as pq
    except ImportError:
        sys.exit("pyarrow is required: pip install pyarrow")
    table = pq.read_table(argv[1], columns=list(COLUMNS.values())).to_pydict()
    with open(argv[2], "w", newline="") as out:
        w = csv.writer(out)
        w.writerow(COLUMNS.keys())
        for row in zip(*(table[c] for c in COLUMNS.values())):
            rec = dict(zip(COLUMNS.keys(), row))
            rec["ignition"] = IGNITION.get(str(rec["ignition"]).strip().lower(), "unknown")
            rec["speed_mps"] = "" if rec["speed_mps"] is None else rec["speed_mps"]
            w.writerow(rec.values())


if __name__ == "__main__":
    main(sys.argv)
