"""
Output files
كاتب المخرجات - كتابة CSV و JSONL و JSON بشكل ذري مع ملف البيان

Lines are emitted into a buffer and each file is written to a temporary
file in the target directory, then moved into place with os.replace.
"""

import csv
import io
import json
import logging
import os
import tempfile

logger = logging.getLogger(__name__)

VERSION = "hldimer 1.0.0"


def _plain(value):
    """JSON-friendly scalars and containers (numpy values included)"""
    if hasattr(value, "item") and not isinstance(value, (list, tuple, dict)):
        return value.item()
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


class OutputWriter:
    """كاتب المخرجات - Emit buffer bound to one output directory"""

    def __init__(self, directory):
        self.directory = directory
        self.lines = []
        self.written = []
        os.makedirs(directory, exist_ok=True)

    def emit(self, line):
        """إصدار سطر - Emit one line into the buffer"""
        self.lines.append(line)

    def emit_blank(self):
        self.lines.append("")

    def flush(self, name):
        """Write the buffered lines to name and clear the buffer"""
        text = "\n".join(self.lines) + ("\n" if self.lines else "")
        self.lines = []
        return self.write_text(name, text)

    def path(self, name):
        return os.path.join(self.directory, name)

    def write_text(self, name, text):
        """كتابة ذرية - Temporary file in the same directory, then rename"""
        target = self.path(name)
        fd, tmp = tempfile.mkstemp(prefix=f".{name}.", dir=self.directory)
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
                handle.write(text)
            os.replace(tmp, target)
        except BaseException:
            if os.path.exists(tmp):
                os.remove(tmp)
            raise
        self.written.append(name)
        logger.debug("wrote %s", target)
        return target

    def write_csv(self, name, rows, fieldnames=None):
        rows = [_plain(r) for r in rows]
        if fieldnames is None:
            fieldnames = []
            for row in rows:
                fieldnames += [k for k in row if k not in fieldnames]
        buffer = io.StringIO()
        writer = csv.DictWriter(buffer, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        return self.write_text(name, buffer.getvalue())

    def write_jsonl(self, name, rows):
        for row in rows:
            self.emit(json.dumps(_plain(row), sort_keys=True))
        return self.flush(name)

    def write_json(self, name, payload):
        return self.write_text(name, json.dumps(_plain(payload), sort_keys=True, indent=2) + "\n")

    def write_rows(self, stem, rows, formats):
        """Write rows once per requested tabular format"""
        paths = []
        if "csv" in formats:
            paths.append(self.write_csv(f"{stem}.csv", rows))
        if "jsonl" in formats:
            paths.append(self.write_jsonl(f"{stem}.jsonl", rows))
        if "json" in formats:
            paths.append(self.write_json(f"{stem}.json", rows))
        return paths

    def __repr__(self):
        return f"OutputWriter({self.directory!r}, written={len(self.written)})"


# دوال مساعدة للاستدعاء المباشر
def write_manifest(writer, config, subcommand, seeds, extra=None):
    """البيان - Resolved config, version string, seeds and subcommand"""
    writer.write_text("resolved_config.ini", config.to_ini())
    payload = {
        "version": VERSION,
        "subcommand": subcommand,
        "seeds": list(seeds),
        "config": config.as_dict(),
        "files": sorted(set(writer.written)),
    }
    if extra:
        payload.update(extra)
    return writer.write_json("manifest.json", payload)
