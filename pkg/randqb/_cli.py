"""Signature-driven command line: `CLI` registers functions under dotted keys and builds argparse parsers from them.

    @CLI(key='randqb.factorize')
    def factorize(*, input_: Annotated[str, CLI.AddArgument(name_or_flags=['--input'])], rank: int = 10) -> None:
        ...

    CLI().run('randqb', ['factorize', '--input', 'a.mtx', '--rank', '20'])

Keyword-only parameters become `--flags`, positional parameters become positionals, and `Literal`/enum annotations become
choices. Registered keys that share a prefix become subcommands of it. Bad values raise `CLI.Exception`, an
InvalidArgument.
"""
from __future__ import annotations

import argparse
import ast
import builtins
import dataclasses
import enum
import inspect
import logging
import pprint
import sys
import types
import typing

import annotated_types

from . import _base
from . import _errors


class _Exception(_errors.InvalidArgument):
    ...


@dataclasses.dataclass(frozen=True, kw_only=True)
class ParseOne[T]:
    t: type[T]

    type _Arg = bool | float | int | str | list | dict | None

    def _expect(self, condition: bool, arg: object, /) -> None:
        if not condition:
            raise _Exception(f'expected {self.t!r}, got {arg!r}')

    def _parse_arg(self, arg: _Arg, /) -> T:
        match self.t if (origin := typing.get_origin(self.t)) is None else (origin, typing.get_args(self.t)):
            case types.NoneType | None:
                self._expect(arg is None, arg)
            case builtins.float:
                self._expect(isinstance(arg, (int, float)) and not isinstance(arg, bool), arg)
                arg = float(arg)
            case builtins.bool | builtins.int | builtins.str:
                self._expect(isinstance(arg, self.t), arg)
            case builtins.list, (Value,):
                self._expect(isinstance(arg, (list, tuple)), arg)
                arg = [ParseOne(t=Value)._parse_arg(value) for value in arg]
            case builtins.tuple, (Value, builtins.Ellipsis):
                arg = (arg,) if isinstance(arg, (int, float)) and not isinstance(arg, bool) else arg
                self._expect(isinstance(arg, (list, tuple)), arg)
                arg = tuple(ParseOne(t=Value)._parse_arg(value) for value in arg)
            case typing.Annotated, (Value, *_):
                arg = ParseOne(t=Value)._parse_arg(arg)
            case typing.Literal, Values:
                self._expect(arg in Values, arg)
            case Value if isinstance(Value, type) and issubclass(Value, enum.Enum):
                self._expect(isinstance(arg, str) and arg in {member.value for member in Value}, arg)
                arg = Value(arg)
            case _:
                raise _Exception(f'unsupported annotation {self.t!r}')

        return arg

    def parse_arg(self, arg: str, /) -> T:
        """Returns a T parsed from `arg`, raising _Exception on failure."""

        value: ParseOne._Arg = arg
        if self.t is not str and not (isinstance(self.t, type) and issubclass(self.t, enum.Enum)):
            try:
                value = ast.literal_eval(arg)
            except (SyntaxError, ValueError):
                pass

        return self._parse_arg(value)


@dataclasses.dataclass(frozen=True, kw_only=True)
class _AddArgument[T]:
    """Keyword arguments for argparse.ArgumentParser.add_argument. Fields left as `...` are not passed.

    Put one in a parameter's `typing.Annotated[...]` metadata to override what would be generated from the parameter.
    """
    name_or_flags: list[str] = ...
    action: type[argparse.Action] | typing.Literal['store', 'store_true', 'store_false', 'count'] = ...
    choices: typing.Iterable[T] = ...
    default: T = ...
    dest: str = ...
    help: str = ...
    metavar: str | None = ...
    nargs: typing.Annotated[int, annotated_types.Ge(0)] | typing.Literal['?', '*', '+'] = ...
    required: bool = ...
    type: typing.Callable[[str], T] = ...

    @staticmethod
    def of_parameter(parameter: inspect.Parameter, /) -> _AddArgument[T]:
        if isinstance(parameter.annotation, str):
            raise _Exception(f'{parameter.name}: annotation {parameter.annotation!r} is not evaluated.')
        if parameter.kind in (parameter.VAR_POSITIONAL, parameter.VAR_KEYWORD):
            raise _Exception(f'{parameter.name}: variadic parameters are not supported.')

        add_argument = _AddArgument()
        t = parameter.annotation

        help_lines = []
        if typing.get_origin(t) is typing.Annotated:
            t, *metadata = typing.get_args(t)
            help_lines += [item for item in metadata if isinstance(item, str)]
            for override in (item for item in metadata if isinstance(item, _AddArgument)):
                add_argument = dataclasses.replace(
                    add_argument,
                    **{key: value for key, value in dataclasses.asdict(override).items() if value is not ...},
                )

        has_default = parameter.default is not parameter.empty
        positional = parameter.kind is parameter.POSITIONAL_ONLY or (
            parameter.kind is parameter.POSITIONAL_OR_KEYWORD and not has_default
        )

        if add_argument.name_or_flags is ...:
            name_or_flags = [parameter.name] if positional else [f'--{parameter.name.strip("_").replace("_", "-")}']
            add_argument = dataclasses.replace(add_argument, name_or_flags=name_or_flags)

        if add_argument.dest is ... and add_argument.name_or_flags[0].startswith('-'):
            add_argument = dataclasses.replace(add_argument, dest=parameter.name)

        if add_argument.choices is ...:
            match typing.get_origin(t) or type(t):
                case typing.Literal:
                    add_argument = dataclasses.replace(add_argument, choices=typing.get_args(t))
                case enum.EnumType:
                    add_argument = dataclasses.replace(add_argument, choices=tuple(t))

        if add_argument.default is ... and has_default:
            add_argument = dataclasses.replace(add_argument, default=parameter.default)

        if add_argument.help is ...:
            if add_argument.default is not ...:
                help_lines.append(f'default: {add_argument.default!r}')
            if add_argument.choices is not ...:
                names = [getattr(choice, 'value', choice) for choice in add_argument.choices]
                help_lines.append(f'choices: {pprint.pformat(tuple(map(str, names)), compact=True, width=60)}')
            add_argument = dataclasses.replace(add_argument, help='\n'.join(help_lines))

        if add_argument.metavar is ... and add_argument.choices is not ...:
            add_argument = dataclasses.replace(add_argument, metavar=f'{{{parameter.name.strip("_")}}}')

        if add_argument.nargs is ... and parameter.kind is parameter.POSITIONAL_ONLY and has_default:
            add_argument = dataclasses.replace(add_argument, nargs='?')

        if add_argument.required is ... and add_argument.name_or_flags[0].startswith('-'):
            add_argument = dataclasses.replace(add_argument, required=not has_default)

        if add_argument.type is ... and add_argument.action in (..., 'store'):
            add_argument = dataclasses.replace(add_argument, type=lambda arg: ParseOne(t=t).parse_arg(arg))

        return add_argument


# Override __init__ so that we can make `_side_effect` positional-only while instantiating.
@dataclasses.dataclass(frozen=True, init=False)
class _SideEffect[T]:
    _side_effect: typing.Callable[[T], T]

    def __init__(self, _side_effect: typing.Callable[[T], T], /) -> None:
        object.__setattr__(self, '_side_effect', _side_effect)


_LogLevelInt = typing.Annotated[int, annotated_types.Interval(ge=10, le=60)]
_LogLevelStr = typing.Literal['CRITICAL', 'ERROR', 'WARNING', 'INFO', 'DEBUG', 'NOTSET']


def _logger(logger_or_name: logging.Logger | str, /) -> logging.Logger:
    return logger_or_name if isinstance(logger_or_name, logging.Logger) else logging.getLogger(logger_or_name)


@dataclasses.dataclass(frozen=True, kw_only=True)
class _Annotated:
    """Ready-made parameter annotations that adjust a logger's level from the command line."""

    LogLevelStr: typing.ClassVar[type[_LogLevelStr]] = _LogLevelStr
    LogLevelInt: typing.ClassVar[type[_LogLevelInt]] = _LogLevelInt

    @staticmethod
    def verbosity(logger_or_name: logging.Logger | str, /) -> type[_LogLevelInt | None]:
        """`-v` lowers and `-q` raises the level by one step from WARNING per use. Applied after `log_level`."""

        logger = _logger(logger_or_name)

        class VerbosityAction(argparse.Action):
            def __call__(self, parser, namespace, values, option_string=None) -> None:
                step = -10 if option_string in ('-v', '--verbose') else 10
                level = (getattr(namespace, self.dest) or logging.WARNING) + step
                setattr(namespace, self.dest, min(max(level, logging.DEBUG), logging.CRITICAL + 10))

        def side_effect(level: int | None) -> None:
            if level is not None:
                logger.setLevel(level)

        return typing.Annotated[
            _LogLevelInt | None,
            _AddArgument[_LogLevelInt](
                name_or_flags=['-v', '--verbose', '-q', '--quiet'], action=VerbosityAction, nargs=0,
            ),
            _SideEffect[_LogLevelInt | None](side_effect),
        ]

    @staticmethod
    def log_level(logger_or_name: logging.Logger | str, /) -> type[_LogLevelStr]:
        logger = _logger(logger_or_name)

        return typing.Annotated[
            _LogLevelStr,
            _AddArgument[_LogLevelStr](name_or_flags=['-l', '--log-level']),
            _SideEffect[_LogLevelStr](lambda level: logger.setLevel(level)),
        ]


class ArgumentParser(argparse.ArgumentParser):
    ...


@dataclasses.dataclass(frozen=True, kw_only=True)
class Decorator[** Params, Return](_base.Decorator[Params, Return]):
    """Registers the decoratee as a command. The key (default `<module>.<qualname>`) is its command path.

    `CLI().run(prefix, args)` walks `args` down the registered keys below `prefix`, parses the rest against the reached
    command's signature, and calls it. A prefix with no command of its own prints the usage of its subcommands.
    """

    register: typing.ClassVar[_base.Register] = _base.Register()

    AddArgument: typing.ClassVar = _AddArgument
    Annotated: typing.ClassVar = _Annotated
    Exception: typing.ClassVar = _Exception
    type Key = str | _base.Register.Key | _base.Decorated

    @staticmethod
    def _register_key(key: Key, /) -> _base.Register.Key:
        match key:
            case str(name):
                return _base.register_key_of(name)
            case _base.Decorated() as decorated:
                return decorated.register_key
            case tuple():
                return _base.Register.Key(key)
            case _:
                raise _Exception(f'Not a command key: {key!r}.')

    def gen_decorated(self, key: Key) -> _base.Decorated[Params, Return]:
        register_key = self._register_key(key)

        if (decorated := self.register.decorateds.get(register_key)) is None:
            if register_key not in self.register.links:
                raise _Exception(f'No command registered under {str(register_key)!r}.')

            subcommands = tuple(sorted(self.register.links[register_key]))

            def usage(subcommand: typing.Literal[subcommands]) -> None:  # noqa
                self.get_argument_parser(register_key).print_usage()

            usage.__annotations__['subcommand'] = typing.Literal[subcommands]
            decorated = dataclasses.replace(self, key=str(register_key))(usage)

        return decorated

    def get_argument_parser(self, key: Key) -> ArgumentParser:
        decorated = self.gen_decorated(key)

        argument_parser = ArgumentParser(
            prog=' '.join(self._register_key(key)),
            description=decorated.__doc__ if decorated.__doc__ != 'None' else None,
            formatter_class=argparse.RawTextHelpFormatter,
        )

        for parameter in decorated.signature.parameters.values():
            add_argument_params = {
                name: value
                for name, value in dataclasses.asdict(_AddArgument.of_parameter(parameter)).items()
                if value is not ...
            }
            argument_parser.add_argument(*add_argument_params.pop('name_or_flags'), **add_argument_params)

        return argument_parser

    def run(self, decorated_or_key: Key, args: list[str] = ...) -> Return:
        register_key = self._register_key(decorated_or_key)
        args = sys.argv[1:] if args is ... else list(args)

        while args and (_base.Register.Key([*register_key, args[0]]) in self.register.links):
            register_key = _base.Register.Key([*register_key, args.pop(0)])

        parsed_args = vars(self.get_argument_parser(register_key).parse_args(args))
        decorated = self.gen_decorated(register_key)

        args, kwargs = [], {}
        for parameter in decorated.signature.parameters.values():
            side_effects = [
                annotation._side_effect
                for annotation in typing.get_args(parameter.annotation)
                if isinstance(annotation, _SideEffect)
            ] if typing.get_origin(parameter.annotation) is typing.Annotated else []

            value = parsed_args.pop(parameter.name)
            for side_effect in side_effects:
                side_effect(value)

            match parameter.kind:
                case inspect.Parameter.POSITIONAL_ONLY:
                    args.append(value)
                case _:
                    kwargs[parameter.name] = value

        if parsed_args:
            raise _Exception(f'Unrecognized args: {parsed_args!r}.')

        return decorated(*args, **kwargs)
