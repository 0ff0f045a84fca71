#!/usr/bin/env python
"""Show or change the pyspforecast version.

Usage:
    python scripts/version.py              # show the current version
    python scripts/version.py patch        # 0.1.0 -> 0.1.1
    python scripts/version.py minor        # 0.1.0 -> 0.2.0
    python scripts/version.py set 1.2.3

The version lives in pyspforecast/__init__.py and pyproject.toml; a dated
section is added to CHANGELOG.md under [Unreleased].
"""

import argparse
import re
import sys
from datetime import date
from pathlib import Path
from typing import Tuple

ROOT_DIR = Path(__file__).resolve().parent.parent
VERSION_FILES = ("pyspforecast/__init__.py", "pyproject.toml")
_VERSION_RE = re.compile(r'^(__version__|version)\s*=\s*"(\d+\.\d+\.\d+)"', re.MULTILINE)


def read_version(root: Path = ROOT_DIR) -> str:
    text = (root / "pyspforecast" / "__init__.py").read_text(encoding="utf-8")
    match = _VERSION_RE.search(text)
    if not match:
        raise ValueError("no __version__ in pyspforecast/__init__.py")
    return match.group(2)


def parse_version(version: str) -> Tuple[int, int, int]:
    parts = version.split(".")
    if len(parts) != 3 or not all(p.isdigit() for p in parts):
        raise ValueError(f"invalid version: {version}")
    major, minor, patch = (int(p) for p in parts)
    return major, minor, patch


def bump_version(current: str, part: str) -> str:
    major, minor, patch = parse_version(current)
    if part == "major":
        return f"{major + 1}.0.0"
    if part == "minor":
        return f"{major}.{minor + 1}.0"
    if part == "patch":
        return f"{major}.{minor}.{patch + 1}"
    raise ValueError(f"invalid bump type: {part}")


def set_version(new_version: str, root: Path = ROOT_DIR) -> None:
    parse_version(new_version)
    for rel in VERSION_FILES:
        path = root / rel
        text = path.read_text(encoding="utf-8")
        path.write_text(_VERSION_RE.sub(rf'\1 = "{new_version}"', text, count=1), encoding="utf-8")
        print(f"   ✓ {rel}")

    changelog = root / "CHANGELOG.md"
    if changelog.exists():
        text = changelog.read_text(encoding="utf-8")
        section = f"## [Unreleased]\n\n## [{new_version}] - {date.today():%Y-%m-%d}"
        changelog.write_text(text.replace("## [Unreleased]", section, 1), encoding="utf-8")
        print("   ✓ CHANGELOG.md")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="pyspforecast version manager")
    parser.add_argument("command", nargs="?", choices=["major", "minor", "patch", "set"])
    parser.add_argument("version", nargs="?", help="new version for 'set'")
    args = parser.parse_args(argv)

    current = read_version()
    print(f"Current version: {current}")
    if args.command is None:
        return 0
    try:
        new = args.version if args.command == "set" else bump_version(current, args.command)
        if new is None:
            parser.error("'set' requires a version number")
        set_version(new)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"Version updated: {current} -> {new}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
