"""Export report series as CSV files with a manifest; no plotting backend required."""

from __future__ import annotations

import csv
import json
from pathlib import Path


def emit_plots(report_dir, out_dir=None) -> dict:
    """Write one CSV per series found in ``report_dir/**/report.json`` plus ``manifest.json``.

    Output names are derived from the report path and series name, and
    reports are visited in sorted order, so reruns are byte-identical.
    """
    root = Path(report_dir)
    out = Path(out_dir) if out_dir is not None else root / "plots"
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for path in sorted(root.glob("**/report.json")):
        doc = json.loads(path.read_text())
        rel = path.parent.relative_to(root).as_posix() or "."
        for name in sorted(doc.get("series", {})):
            s = doc["series"][name]
            stem = "_".join(p for p in (rel.replace("/", "_").strip("._"), name) if p)
            fname = "".join(c if c.isalnum() or c in "-_." else "_" for c in stem) + ".csv"
            with (out / fname).open("w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow([s.get("xlabel", "x"), s.get("ylabel", "y")])
                for x, y in zip(s["x"], s["y"]):
                    w.writerow([repr(x), repr(y)])
            entries.append({"report": path.relative_to(root).as_posix(), "suite": doc.get("suite"),
                            "series": name, "csv": fname, "points": len(s["x"])})
    manifest = {"series": entries}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
