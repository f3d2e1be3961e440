from sheetlint.cli import main

raise SystemExit(main())
