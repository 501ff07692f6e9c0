# -*- coding: utf-8 -*-

import csv
import json
import re

from .errors import ConfigError

class ListWithHoles(dict):
    """
    collect list items by (possibly non-continuous) index and later compress into a list
    """

    def __setitem__(self, key, item):
        if isinstance(key, int):
            super().__setitem__(key, item)
        else:
            raise ConfigError("list index must be of type 'int', got [{}]".format(key))

    def squeeze(self):
        return [ self[i] for i in sorted(self.keys()) ]


def parse_value(text):
    """
    interpret an override value as JSON where possible (numbers, lists, null), else keep the string
    """
    if not isinstance(text, str):
        return text
    try:
        return json.loads(text)
    except ValueError:
        return text.strip(" \n\r\t\v\f")


def flat_to_nested(flatdict):
    """
    converts a "flattened" dict into a nested structure

    (keys use . for sub-objects and [n] for list items, e.g. experiment.d_T[1] or
    quadrature.init_tiles[0]; string values are parsed as JSON where possible)
    """

    index_pattern = re.compile(r"\s*(.*)\[(\d+)\]\s*$")

    def _descend(target, key, index, path):
        """
        return the container addressed by key (and optional list index), creating it if needed
        """
        if index is None:
            if key not in target:
                target[key] = dict()
            elif not isinstance(target[key], dict) or isinstance(target[key], ListWithHoles):
                raise ConfigError(f"{path} is used as dict but exists with another type already")
            return target[key]
        holes = target.setdefault(key, ListWithHoles())
        if not isinstance(holes, ListWithHoles):
            raise ConfigError(f"{path} is used as list but exists with another type already")
        if index not in holes:
            holes[index] = dict()
        return holes[index]

    def _place(target, key, index, value, path):
        if index is None:
            if isinstance(target.get(key), dict):
                raise ConfigError(f"{path} is used as scalar but exists as dict already")
            target[key] = value
        else:
            holes = target.setdefault(key, ListWithHoles())
            if not isinstance(holes, ListWithHoles):
                raise ConfigError(f"{path} is used as list but exists with another type already")
            holes[index] = value

    def _squeeze_lists(origin):
        for key in list(origin):
            if isinstance(origin[key], dict):
                _squeeze_lists(origin[key])
                if isinstance(origin[key], ListWithHoles):
                    origin[key] = origin[key].squeeze()

    nested = dict()
    for flat_key, raw in flatdict.items():
        value = parse_value(raw)
        if value == '':
            continue
        parts = flat_key.strip(" \n\r\t\v\f").split(".")
        target = nested
        for depth, part in enumerate(parts):
            match = index_pattern.match(part)
            key, index = (match[1], int(match[2])) if match else (part, None)
            path = ".".join(parts[:depth + 1])
            if depth == len(parts) - 1:
                _place(target, key, index, value, path)
            else:
                target = _descend(target, key, index, path)
    _squeeze_lists(nested)
    return nested


def nested_update(base, overrides):
    """
    recursively merge overrides into a copy of base; dicts merge, everything else replaces
    """
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = nested_update(merged[key], value)
        else:
            merged[key] = value
    return merged


class HashedCsvWriter:
    """
    CSV writer emitting a "# config-hash: ..." comment line, then the header row
    """

    def __init__(self, outfile, header, config_hash):
        outfile.write("# config-hash: {}\n".format(config_hash))
        self.writer = csv.writer(outfile, lineterminator="\n")
        self.writer.writerow(header)
        self.header = header

    def writerow(self, row):
        if len(row) != len(self.header):
            raise ValueError("row has {} fields, header has {}".format(len(row), len(self.header)))
        self.writer.writerow([ "" if v is None else v for v in row ])

    def writerows(self, rows):
        for row in rows:
            self.writerow(row)


def write_csv(path, header, rows, config_hash):
    with open(path, 'w', newline='', encoding='utf-8') as outfile:
        writer = HashedCsvWriter(outfile, header, config_hash)
        writer.writerows(rows)


def read_csv(path):
    """
    read a file written by write_csv: returns (config hash, list of dict rows)
    """
    with open(path, newline='', encoding='utf-8') as infile:
        first = infile.readline()
        match = re.match(r"# config-hash: (\S+)", first)
        if not match:
            raise ConfigError(f"{path} does not start with a config-hash line")
        return match[1], list(csv.DictReader(infile))
