"""
YAML parser class. Run configurations are Jinja templates first and YAML second.
"""


# Imports
from pathlib import Path
from jinja2 import Environment, FileSystemLoader, StrictUndefined
from jinja2.exceptions import TemplateError
import os
import yaml
from typing import Any, Dict, Optional

# Internal imports
from lcmito.constants import (
    PLATFORM,
    PYTHON_VERSION,
    VERSION,
)


# Class definition
class YmlParser:

    def __init__(self,
        fpath: Path
    ):
        self.fpath = Path(fpath)
        self.fname = self.fpath.name

    def env(self, var: str, default: Optional[str] = None) -> str:
        """
        Get environment variable {var}. Can be called in YAML file via {{ env(...) }}
        """
        val: Optional[str] = os.environ.get(var, default)
        if val is None:
            raise ValueError(f"environment variable `{var}` not found")
        return val

    def string_to_pathlib(self, str):
        """
        Convert string to a Path object. Relative paths are taken from the directory
        holding the configuration file.
        """
        path = Path(str)
        if path.is_absolute():
            return path
        return self.fpath.resolve().parent / path

    def create_yml_dict(self,
        rendered_str: str
    ) -> Dict[Any, Any]:
        """
        Create dict representation of YAML file from rendered string

        args:
            rendered_str: rendered string
        returns:
            yml_dict: YAML file represented as dictionary
        """
        try:
            temp_dict = yaml.safe_load(rendered_str)
        except yaml.YAMLError as e:
            raise ValueError(f"`{self.fname}` is not valid YAML: {e}") from e
        if temp_dict is None:
            return {}
        if not isinstance(temp_dict, dict):
            raise ValueError(
                f"`{self.fname}` must map run names to run configurations"
            )
        return temp_dict

    def render(self,
        parent_path: Path,
        filename: str,
        func_dict: Dict[Any, Any]
    ) -> str:
        """
        Interpret/execute Jinja syntax in `filename` and return `filename` as a string

        args:
            parent_path: path containing YAML file (for loading Environment)
            filename: name of template
            func_dict: function dictionary for Jinja globals
        returns:
            rendered_string: `filename` with executed Jinja
        """
        env = Environment(
            loader=FileSystemLoader(str(parent_path)),
            undefined=StrictUndefined,
        )
        try:
            jinja_template = env.get_template(filename)
        except TemplateError as e:
            raise ValueError(f"could not load `{filename}`: {e}") from e
        self.globals = jinja_template.globals

        self.globals["__file__"] = str(self.fpath.resolve())
        self.globals["__version__"] = PYTHON_VERSION
        self.globals["__lcmito_version__"] = VERSION
        self.globals["__platform__"] = PLATFORM
        jinja_template.globals.update(func_dict)

        try:
            rendered_string = jinja_template.render()
        except TemplateError as e:
            raise ValueError(f"could not render `{filename}`: {e}") from e
        return rendered_string

    def parse(self) -> Dict[Any, Any]:
        """
        Parse YAML file with Jinja syntax

        returns:
            yml_dict: run name -> run configuration
        """
        if not self.fpath.is_file():
            raise ValueError(f"no file found at `{self.fpath}`")
        func_dict = {
            "env": self.env,
            "Path": self.string_to_pathlib,
        }
        rendered_string = self.render(self.fpath.parent, self.fpath.name, func_dict)
        return self.create_yml_dict(rendered_string)
