from __future__ import annotations

from wvq.cli.main import main

raise SystemExit(main())
