#!/usr/bin/env python3
"""Run every shipped preset into ./out/<name>/ (figure data + summaries)."""

import sys
from pathlib import Path

from gemxpm.cli import run_config
from gemxpm.config import parse_config
from gemxpm.presets import get_preset, preset_names


def main(out_root: str = "out") -> int:
    for name in preset_names():
        cfg = parse_config(get_preset(name), default_name=name)
        paths = run_config(cfg, Path(out_root) / name, workers=1)
        for key, path in sorted(paths.items()):
            print(f"{name} {key}: {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main(*sys.argv[1:]))
