#!/usr/bin/env python
"""
Entry point for the laboratory's commands.

    python manage.py train --config configs/smoke.toml
    python manage.py test alpn_lab
"""
import os
import sys
from pathlib import Path

SRC_DIR = Path(__file__).resolve().parent / 'src'


def main():
    if str(SRC_DIR) not in sys.path:
        sys.path.insert(0, str(SRC_DIR))

    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'core.settings')
    try:
        from django.core.management import execute_from_command_line
    except ImportError as exc:
        raise ImportError(
            "Couldn't import Django. Install the project first (pip install -e .) "
            "inside the active virtual environment."
        ) from exc
    execute_from_command_line(sys.argv)


if __name__ == '__main__':
    main()
