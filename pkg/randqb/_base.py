from __future__ import annotations

import abc
import dataclasses
import inspect
import re
import sys
import types
import typing

import annotated_types

type Name = typing.Annotated[str, annotated_types.Predicate(str.isidentifier)]


@dataclasses.dataclass(frozen=True)
class Raise:
    exc_type: type[BaseException]
    exc_val: BaseException
    exc_tb: types.TracebackType


@dataclasses.dataclass(frozen=True, kw_only=True)
class Register:
    class Key(tuple[str, ...]):
        def __str__(self) -> str:
            return '.'.join(self)

    decorateds: dict[Key, Decorated] = dataclasses.field(default_factory=dict)
    links: dict[Key, set[Name]] = dataclasses.field(default_factory=dict)


@typing.runtime_checkable
class Decoratee[** Params, Return](typing.Protocol):
    def __call__(*args: Params.args, **kwargs: Params.kwargs) -> Return: ...


@dataclasses.dataclass(frozen=True, kw_only=True)
class Base[** Params, Return]:
    decoratee: Decoratee[Params, Return]


@dataclasses.dataclass(frozen=True, kw_only=True)
class EnterContext[** Params, Return](abc.ABC):
    """One layer of decoration.

    Returns either the final result (short-circuit) or a pair of (exit context, next layer to enter).
    """
    next_enter_context: EnterContext[Params, Return] | Base[Params, Return]

    @abc.abstractmethod
    def __call__(
        self,
        *args: Params.args,
        **kwargs: Params.kwargs,
    ) -> tuple[ExitContext[Params, Return], EnterContext[Params, Return] | Base[Params, Return]] | Return: ...


@dataclasses.dataclass(frozen=True, kw_only=True)
class ExitContext[** Params, Return](abc.ABC):

    @abc.abstractmethod
    def __call__(self, result: Raise | Return) -> Raise | Return: ...


def register_key_of(name: str) -> Register.Key:
    return Register.Key([*re.sub(r'.<.*>', '', name).split('.')])


@dataclasses.dataclass(frozen=True, kw_only=True)
class Decorated[** Params, Return]:
    enter_context: EnterContext[Params, Return] | Base[Params, Return]
    register_key: Register.Key
    signature: inspect.Signature
    __doc__: str
    __module__: str
    __name__: str
    __qualname__: str
    __wrapped__: Decoratee[Params, Return]

    def __call__(self, *args: Params.args, **kwargs: Params.kwargs) -> Return:
        stack = [self.enter_context]
        result: Raise | Return = ...

        while stack:
            try:
                match item := stack.pop():
                    case Base():
                        stack.append(item.decoratee(*args, **kwargs))
                    case EnterContext():
                        stack.append(item(*args, **kwargs))
                    case (ExitContext(), (Base() | EnterContext())):
                        stack += [*item]
                    case ExitContext():
                        stack.append(item(result))
                    case result: ...
            except Exception:  # noqa
                stack.append(Raise(*sys.exc_info()))

        if isinstance(result, Raise):
            raise result.exc_val.with_traceback(result.exc_tb)

        return result


@dataclasses.dataclass(frozen=True, kw_only=True)
class Decorator[** Params, Return]:
    """Registers the decoratee under a dotted key.

    The key defaults to `<module>.<qualname>`; `key` overrides it, which is how CLI commands get short names.
    """
    register: typing.ClassVar[Register] = Register()

    key: str | None = None

    def __call__(
        self,
        decoratee: Decoratee[Params, Return] | Decorated[Params, Return],
        /,
    ) -> Decorated[Params, Return]:
        if isinstance(decoratee, Decorated):
            return decoratee

        register_key = register_key_of(
            self.key if self.key is not None else '.'.join([decoratee.__module__, decoratee.__qualname__])
        )

        for i in range(len(register_key)):
            self.register.links.setdefault(Register.Key(register_key[:i]), set()).add(register_key[i])
        self.register.links.setdefault(register_key, set())

        decorated = self.register.decorateds[register_key] = Decorated(
            enter_context=Base(decoratee=decoratee),
            register_key=register_key,
            signature=inspect.signature(decoratee),
            __doc__=str(decoratee.__doc__),
            __module__=str(decoratee.__module__),
            __name__=str(decoratee.__name__),
            __qualname__=str(decoratee.__qualname__),
            __wrapped__=decoratee,
        )

        return decorated
