# -*- coding: utf-8 -*-

"""
Binary containers for training sets and trained models.

dataset file:  b'RFSDSET\\0' | uint32 version | uint32 F | uint64 K |
               K records of (6 condition values, F profile values), float64 LE
model file:    b'RFSMODL\\0' | uint32 version | uint32 header length |
               JSON header (architecture descriptor, parameter shapes) |
               parameters, float64 LE, in network order

Both carry a JSON sidecar (<file>.json) with the normalization statistics.
"""

import json
import logging
import struct

import numpy as np

from .errors import *
from .prior import Normalization, TrainingSet
from .cvae import CvaeModel, CONDITION_SIZE

logger = logging.getLogger(__name__)

DATASET_MAGIC = b'RFSDSET\0'
MODEL_MAGIC = b'RFSMODL\0'
FORMAT_VERSION = 1

_DATASET_HEADER = struct.Struct('<8sIIQ')
_MODEL_HEADER = struct.Struct('<8sII')


def sidecar_path(path):
    return str(path) + '.json'


def _write_sidecar(path, kind, normalization):
    with open(sidecar_path(path), 'w', encoding='utf-8') as outfile:
        json.dump(dict(kind=kind, version=FORMAT_VERSION, normalization=normalization.to_dict()),
                  outfile, sort_keys=True, indent=2)


def _read_sidecar(path, kind):
    try:
        with open(sidecar_path(path), encoding='utf-8') as infile:
            data = json.load(infile)
    except OSError as e:
        raise FormatError("{}: cannot read normalization sidecar ({})".format(path, e.strerror))
    except ValueError as e:
        raise FormatError("{}: normalization sidecar is not valid JSON ({})".format(path, e))
    if data.get('kind') != kind or data.get('version') != FORMAT_VERSION:
        raise FormatError("{}: sidecar is for {} version {}, expected {} version {}".format(
            path, data.get('kind'), data.get('version'), kind, FORMAT_VERSION))
    return Normalization.from_dict(data['normalization'])


def _read_bytes(path):
    try:
        with open(path, 'rb') as infile:
            return infile.read()
    except OSError as e:
        raise FormatError("{}: {}".format(path, e.strerror))


def _check_magic(path, blob, magic, header_size):
    if len(blob) < header_size:
        raise FormatError("{}: truncated header at byte offset {} (need {} bytes)".format(path, len(blob), header_size))
    if blob[:len(magic)] != magic:
        raise FormatError("{}: bad magic bytes at byte offset 0, not a {} file".format(path, magic.rstrip(b'\0').decode()))


def save_dataset(path, dataset):
    records = np.concatenate([dataset.conditions, dataset.profiles], axis=1).astype('<f8')
    with open(path, 'wb') as outfile:
        outfile.write(_DATASET_HEADER.pack(DATASET_MAGIC, FORMAT_VERSION, dataset.F, len(dataset)))
        outfile.write(records.tobytes())
    _write_sidecar(path, 'dataset', dataset.normalization)
    logger.info("saved {} to {}".format(dataset, path))


def load_dataset(path):
    blob = _read_bytes(path)
    _check_magic(path, blob, DATASET_MAGIC, _DATASET_HEADER.size)
    _, version, F, K = _DATASET_HEADER.unpack_from(blob)
    if version != FORMAT_VERSION:
        raise FormatError("{}: format version {} at byte offset 8, expected {}".format(path, version, FORMAT_VERSION))
    width = CONDITION_SIZE + F
    expected = _DATASET_HEADER.size + 8 * width * K
    if len(blob) < expected:
        complete = (len(blob) - _DATASET_HEADER.size) // (8 * width)
        raise FormatError("{}: truncated at byte offset {} (record {} of {}, expected {} bytes)".format(
            path, len(blob), complete, K, expected))
    if len(blob) > expected:
        raise FormatError("{}: {} trailing bytes after byte offset {}".format(path, len(blob) - expected, expected))
    records = np.frombuffer(blob, dtype='<f8', count=width * K, offset=_DATASET_HEADER.size).reshape(K, width)
    normalization = _read_sidecar(path, 'dataset')
    dataset = TrainingSet(records[:, :CONDITION_SIZE].copy(), records[:, CONDITION_SIZE:].copy(), normalization)
    logger.info("loaded {} from {}".format(dataset, path))
    return dataset


def save_model(path, model):
    params = model.params()
    header = json.dumps(dict(architecture=model.descriptor(), shapes=[list(p.shape) for p in params]),
                        sort_keys=True).encode('utf-8')
    with open(path, 'wb') as outfile:
        outfile.write(_MODEL_HEADER.pack(MODEL_MAGIC, FORMAT_VERSION, len(header)))
        outfile.write(header)
        for p in params:
            outfile.write(np.ascontiguousarray(p, dtype='<f8').tobytes())
    _write_sidecar(path, 'model', model.normalization)
    logger.info("saved {} to {}".format(model, path))


def load_model(path, expected_F=None):
    blob = _read_bytes(path)
    _check_magic(path, blob, MODEL_MAGIC, _MODEL_HEADER.size)
    _, version, header_length = _MODEL_HEADER.unpack_from(blob)
    if version != FORMAT_VERSION:
        raise FormatError("{}: format version {} at byte offset 8, expected {}".format(path, version, FORMAT_VERSION))
    offset = _MODEL_HEADER.size
    if len(blob) < offset + header_length:
        raise FormatError("{}: truncated architecture header at byte offset {}".format(path, len(blob)))
    try:
        header = json.loads(blob[offset:offset + header_length].decode('utf-8'))
        architecture = header['architecture']
        shapes = [tuple(s) for s in header['shapes']]
        F = int(architecture['F'])
    except (ValueError, KeyError, TypeError) as e:
        raise FormatError("{}: unreadable architecture header at byte offset {} ({!r})".format(path, offset, e))
    offset += header_length

    if expected_F is not None and F != expected_F:
        raise FormatError("{}: model emits F={} frequencies, configuration expects F={}".format(path, F, expected_F))

    normalization = _read_sidecar(path, 'model')
    try:
        model = CvaeModel.from_descriptor(architecture, normalization)
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError("{}: incomplete architecture descriptor ({!r})".format(path, e))
    if [p.shape for p in model.params()] != shapes:
        raise FormatError("{}: parameter shapes do not match the architecture descriptor".format(path))

    arrays = []
    for shape in shapes:
        size = int(np.prod(shape))
        if len(blob) < offset + 8 * size:
            raise FormatError("{}: truncated parameters at byte offset {}".format(path, len(blob)))
        arrays.append(np.frombuffer(blob, dtype='<f8', count=size, offset=offset).reshape(shape))
        offset += 8 * size
    if offset != len(blob):
        raise FormatError("{}: {} trailing bytes after byte offset {}".format(path, len(blob) - offset, offset))
    model.load_params(arrays)
    logger.info("loaded {} from {}".format(model, path))
    return model
