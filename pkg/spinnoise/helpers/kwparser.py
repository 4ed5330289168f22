import argparse
import yaml


class KeyValueAction(argparse.Action):
    """Parses dotted key=value pairs into a dictionary, accumulating across uses.

    Values are read as YAML scalars so `--set physical.b_dc=6e-6` yields a
    number and `--set grid.polarizations=[false]` a list.
    """

    def __call__(self, parser, namespace, values, option_string=None):
        kv_dict = dict(getattr(namespace, self.dest, None) or {})
        for item in values:
            if "=" not in item:
                parser.error(f"expected key=value, got '{item}'")
            key, value = item.split("=", 1)  # Split only on the first '='
            kv_dict[key.strip()] = yaml.safe_load(value) if value else None
        setattr(namespace, self.dest, kv_dict)
