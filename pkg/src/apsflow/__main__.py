"""Allow ``python -m apsflow`` as an alternative to the console script."""

from .cli import main

main()
