#!/usr/bin/env python3
"""Command line entry point.

Ex.

```bash
python3 -m randqb factorize --input a.mtx --alg qb_pb --tol-rel 1e-6 --block 10 --power 1 --out factors
python3 -m randqb bench --experiment accuracy --matrix m2 --format csv --out m2.csv
```

Exit codes: 0 on success, 2 on invalid input, 3 on numerical failure.
"""
import logging
import sys

import pydantic

from . import _commands as _
from . import _cli
from . import _errors

logger = logging.getLogger('randqb')


def main(args: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format='%(levelname)s: %(name)s: %(message)s')

    try:
        _cli.Decorator().run('randqb', sys.argv[1:] if args is None else args)
    except (_errors.InvalidArgument, pydantic.ValidationError, OSError) as e:
        logger.error('%s', e)
        return 2
    except _errors.NumericalError as e:
        logger.error('%s', e)
        return 3
    return 0


if __name__ == '__main__':
    sys.exit(main())
