"""
Util functions
"""

# Imports
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
import yaml


# Functions / Utils
@dataclass
class ConfigurationKey:
    key_name: str
    key_type: Union[type, List[type]]
    key_supported_values: Optional[List[Any]] = None


def _check_value_type(_k: ConfigurationKey, _v: Any):
    """
    Confirm that `_v` has the type (or one of the types) of `_k` and, if `_k` restricts
    its values, that `_v` is one of them. Booleans are never accepted as numbers.

    raises:
        ValueError if either condition is not satisfied
    """
    types = _k.key_type if isinstance(_k.key_type, list) else [_k.key_type]
    flag_any_type = False
    for _type in types:
        if isinstance(_v, bool) and _type in (int, float):
            continue
        if isinstance(_v, _type):
            flag_any_type = True
    if not flag_any_type:
        if not isinstance(_k.key_type, list):
            raise ValueError(
                f"`{_k.key_name}` is not the correct type...should be a {str(_k.key_type)}"  # noqa: E501
            )
        raise ValueError(
            f"`{_k.key_name}` is not the correct type...should be one of {str(_k.key_type)}"  # noqa: E501
        )

    if _k.key_supported_values is not None:
        if _v not in _k.key_supported_values:
            raise ValueError(
                f"Unsupported value `{_v}` for key `{_k.key_name}`"
            )


def _check_key_in_conf(
    _k: ConfigurationKey,
    conf: Dict[str, Any],
    conf_name: str,
):
    """
    Internal function to help us determine if a key exists in a configuration

    args:
        _k: ConfigurationKey
        conf: configuration (or configuration component)
        conf_name: name of configuration (or configuration component)
    returns:
        True if the key exists, is the right type, and is a supported value
    raises:
        ValueError if any of the above conditions are not satisfied
    """
    if _k.key_name not in conf.keys():
        raise ValueError(
            f"`{_k.key_name}` not found in `{conf_name}`'s configuration!"
        )
    _check_value_type(_k, conf[_k.key_name])
    return True


def _check_optional_key_in_conf(
    _k: ConfigurationKey,
    conf: Dict[str, Any],
):
    """
    Internal function to help us determine if an *optional* key exists in a
    configuration

    args:
        _k: ConfigurationKey
        conf: configuration (or configuration component)
    returns:
        True if the key exists, is the right type, and is a supported value
        False if the key doesn't exist or is null
    raises:
        ValueError if the key exists but has the wrong type or value
    """
    if _k.key_name not in conf.keys():
        return False
    _v = conf[_k.key_name]
    if _v is None:
        return False
    _check_value_type(_k, _v)
    return True


def _check_no_unknown_keys(
    conf: Dict[str, Any],
    known: Iterable[ConfigurationKey],
    conf_name: str,
):
    """
    Reject keys that no ConfigurationKey describes.

    raises:
        ValueError naming the first unknown key
    """
    known_names = [_k.key_name for _k in known]
    for key in conf.keys():
        if key not in known_names:
            raise ValueError(f"Unrecognized key `{key}` in `{conf_name}`")


def parse_override(override: str) -> Tuple[List[str], Any]:
    """
    Parse a `section.key=value` command-line override. The value is read as YAML so
    that `--set test.K=4` yields an int and `--set query.cond_set=[1,2]` a list.
    """
    if "=" not in override:
        raise ValueError(
            f"override `{override}` not properly formatted...should be <section>.<key>=<value>"  # noqa: E501
        )
    path, raw_value = override.split("=", 1)
    keys = [p for p in path.strip().split(".") if p != ""]
    if len(keys) == 0:
        raise ValueError(f"override `{override}` has an empty key")
    return keys, yaml.safe_load(raw_value)


def apply_overrides(conf: Dict[str, Any], overrides: List[str]) -> Dict[str, Any]:
    """
    Apply `section.key=value` overrides to `conf` in place. Command line wins.
    """
    for override in overrides:
        keys, value = parse_override(override)
        node = conf
        for key in keys[:-1]:
            if key not in node or node[key] is None:
                node[key] = {}
            if not isinstance(node[key], dict):
                raise ValueError(
                    f"cannot override `{'.'.join(keys)}`...`{key}` is not a section"
                )
            node = node[key]
        node[keys[-1]] = value
    return conf


def derive_seed(run_seed: int, *indices: int) -> int:
    """
    Derive an independent 63-bit seed from a run seed and a tuple of indices
    (repetition, replicate, trajectory, ...). Schedule-independent by construction.
    """
    seq = np.random.SeedSequence([int(run_seed), *[int(i) for i in indices]])
    return int(seq.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
