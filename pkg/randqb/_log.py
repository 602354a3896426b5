from __future__ import annotations

import dataclasses
import inspect
import logging
import time
import typing

import numpy

from . import _base


Level = typing.Literal['CRITICAL', 'ERROR', 'WARNING', 'INFO', 'DEBUG', 'NOTSET']


def summarize(value: object, /) -> str:
    """Renders `value` for a log line without dumping matrix contents."""

    match value:
        case numpy.ndarray(ndim=2):
            return f'ndarray[{value.shape[0]}x{value.shape[1]}]'
        case numpy.ndarray():
            return f'ndarray[{"x".join(map(str, value.shape))}]'
        case list() | tuple() if len(value) > 4:
            return f'{type(value).__name__}[{len(value)}]'
        case list() | tuple():
            return f'{type(value).__name__}({", ".join(map(summarize, value))})'
        case _ if dataclasses.is_dataclass(value) and not isinstance(value, type):
            fields = ', '.join(
                f'{field.name}={summarize(getattr(value, field.name))}'
                for field in dataclasses.fields(value) if field.repr
            )
            return f'{type(value).__name__}({fields})'
        case _:
            return repr(value)


def summarize_arguments(bound_arguments: inspect.BoundArguments, /) -> str:
    return ', '.join(f'{name}={summarize(value)}' for name, value in bound_arguments.arguments.items())


@dataclasses.dataclass(frozen=True, kw_only=True)
class ExitContext[** Params, Return](_base.ExitContext[Params, Return]):
    arguments: str
    err_level: Level
    logger: logging.Logger
    name: str
    ok_level: Level
    started: float

    def __call__(self, result: _base.Raise | Return) -> _base.Raise | Return:
        elapsed_ms = (time.perf_counter() - self.started) * 1e3
        if isinstance(result, _base.Raise):
            self.logger.log(
                logging.getLevelNamesMapping()[self.err_level],
                '%s(%s) raised %r after %.3f ms',
                self.name, self.arguments, result.exc_val, elapsed_ms,
            )
        else:
            self.logger.log(
                logging.getLevelNamesMapping()[self.ok_level],
                '%s(%s) -> %s in %.3f ms',
                self.name, self.arguments, summarize(result), elapsed_ms,
            )

        return result


@dataclasses.dataclass(frozen=True, kw_only=True)
class EnterContext[** Params, Return](_base.EnterContext[Params, Return]):
    call_level: Level
    err_level: Level
    logger: logging.Logger
    name: str
    ok_level: Level
    signature: inspect.Signature

    def __call__(
        self,
        *args: Params.args,
        **kwargs: Params.kwargs,
    ) -> tuple[ExitContext[Params, Return], _base.EnterContext[Params, Return] | _base.Base[Params, Return]]:
        arguments = summarize_arguments(self.signature.bind(*args, **kwargs))

        self.logger.log(logging.getLevelNamesMapping()[self.call_level], '%s(%s)', self.name, arguments)

        return ExitContext(
            arguments=arguments,
            err_level=self.err_level,
            logger=self.logger,
            name=self.name,
            ok_level=self.ok_level,
            started=time.perf_counter(),
        ), self.next_enter_context


@dataclasses.dataclass(frozen=True, kw_only=True)
class Decorator[** Params, Return](_base.Decorator[Params, Return]):
    """Logs each call, its result or exception, and the elapsed wall time.

    The logger defaults to the decoratee's module logger.
    """
    call_level: Level = 'DEBUG'
    err_level: Level = 'ERROR'
    logger: logging.Logger = ...
    ok_level: Level = 'DEBUG'

    def __call__(
        self,
        decoratee: _base.Decoratee[Params, Return] | _base.Decorated[Params, Return],
        /,
    ) -> _base.Decorated[Params, Return]:
        decoratee = super().__call__(decoratee)

        logger = logging.getLogger(decoratee.__module__) if self.logger is ... else self.logger

        decorated = self.register.decorateds[decoratee.register_key] = dataclasses.replace(
            decoratee,
            enter_context=EnterContext(
                call_level=self.call_level,
                err_level=self.err_level,
                logger=logger,
                name=decoratee.__name__,
                next_enter_context=decoratee.enter_context,
                ok_level=self.ok_level,
                signature=decoratee.signature,
            ),
        )

        return decorated
