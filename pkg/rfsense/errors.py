# -*- coding: utf-8 -*-

class DataError (Exception):

    """ Raised when input data is malformed etc. """

    pass

class DomainError (DataError):

    """ Raised when an argument lies outside the domain of an operation """

    pass

class ConfigError (DataError):

    """ Raised when a configuration block fails validation """

    pass

class QuadratureError (Exception):

    """ Raised when the adaptive integration does not reach its tolerance """

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error

class SamplingError (Exception):

    """ Raised when no admissible target state could be drawn """

    pass

class ShapeError (Exception):

    """ Raised when tensor shapes do not chain through a network """

    pass

class StaleCacheError (Exception):

    """ Raised when backward is called with a cache from another forward pass """

    pass

class NumericalError (Exception):

    """ Raised on NaN/Inf values, e.g. a diverging training run """

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch

class FormatError (Exception):

    """ Raised when a dataset or model file cannot be read """

    pass

class BenchError (Exception):

    """ Raised when a timing measurement is not trustworthy """

    pass

class DataWarning (Warning):

    """ Warnings triggered by input data issues """

    pass
