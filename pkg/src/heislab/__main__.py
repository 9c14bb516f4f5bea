from heislab.cli import main

raise SystemExit(main())
