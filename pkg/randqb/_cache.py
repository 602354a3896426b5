from __future__ import annotations

import collections
import concurrent.futures
import dataclasses
import functools
import inspect
import sys
import threading
import typing

import numpy

from . import _base


type Key = typing.Hashable
type GenerateKey[** Params] = typing.Callable[Params, Key]


def freeze(value: object, /) -> object:
    """Returns `value` with any arrays inside it marked read-only, so cached results cannot be mutated in place."""

    match value:
        case numpy.ndarray():
            value.setflags(write=False)
        case tuple() | list():
            for item in value:
                freeze(item)
        case _ if dataclasses.is_dataclass(value) and not isinstance(value, type):
            for field in dataclasses.fields(value):
                freeze(getattr(value, field.name))
    return value


@dataclasses.dataclass(frozen=True, kw_only=True)
class ExitContext[** Params, Return](_base.ExitContext[Params, Return]):
    evict: typing.Callable[[ExitContext[Params, Return]], None]
    future: concurrent.futures.Future[Return] = dataclasses.field(default_factory=concurrent.futures.Future)

    def __call__(self, result: _base.Raise | Return) -> _base.Raise | Return:
        if isinstance(result, _base.Raise):
            self.evict(self)
            self.future.set_exception(result.exc_val)
        else:
            self.future.set_result(freeze(result))
        return result


@dataclasses.dataclass(frozen=True, kw_only=True)
class EnterContext[** Params, Return](_base.EnterContext[Params, Return]):
    exit_context_by_key: collections.OrderedDict[Key, ExitContext[Params, Return]] = dataclasses.field(
        default_factory=collections.OrderedDict
    )
    generate_key: GenerateKey[Params]
    lock: threading.Lock = dataclasses.field(default_factory=threading.Lock)
    signature: inspect.Signature
    size: int

    def __call__(
        self,
        *args: Params.args,
        **kwargs: Params.kwargs,
    ) -> tuple[ExitContext[Params, Return], _base.EnterContext[Params, Return] | _base.Base[Params, Return]] | Return:
        bound_arguments = self.signature.bind(*args, **kwargs)
        bound_arguments.apply_defaults()
        key = self.generate_key(*bound_arguments.args, **bound_arguments.kwargs)

        with self.lock:
            if (exit_context := self.exit_context_by_key.pop(key, None)) is None:
                exit_context = self.exit_context_by_key[key] = ExitContext(
                    evict=functools.partial(self._evict, key),
                )
                while self.size < len(self.exit_context_by_key):
                    self.exit_context_by_key.popitem(last=False)
                return exit_context, self.next_enter_context
            self.exit_context_by_key[key] = exit_context

        return exit_context.future.result()

    def _evict(self, key: Key, exit_context: ExitContext[Params, Return], /) -> None:
        """Drops a failed computation so that the next call retries it. Callers already waiting share the failure."""

        with self.lock:
            if self.exit_context_by_key.get(key) is exit_context:
                del self.exit_context_by_key[key]


@dataclasses.dataclass(frozen=True, kw_only=True)
class Decorator[** Params, Return](_base.Decorator[Params, Return]):
    """Bounded least-recently-used memoization keyed on the bound call arguments.

    Concurrent callers with the same key share one computation. Array results are frozen read-only.
    """
    size: int = sys.maxsize
    generate_key: GenerateKey[Params] = lambda *args, **kwargs: (tuple(args), tuple(sorted(kwargs.items())))

    register: typing.ClassVar[_base.Register] = _base.Register()

    def __call__(
        self,
        decoratee: _base.Decoratee[Params, Return] | _base.Decorated[Params, Return],
        /,
    ) -> _base.Decorated[Params, Return]:
        decoratee = super().__call__(decoratee)

        decorated = self.register.decorateds[decoratee.register_key] = dataclasses.replace(
            decoratee,
            enter_context=EnterContext(
                generate_key=self.generate_key,
                next_enter_context=decoratee.enter_context,
                signature=decoratee.signature,
                size=self.size,
            ),
        )

        return decorated
