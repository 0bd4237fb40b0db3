"""Exception types shared by the measurement modules"""


class ProtocolError(Exception):
    """Base class for every failure raised by the measurement modules"""


class ValidationError(ProtocolError, ValueError):
    """Invalid input: bad dimensions, labels, non-Hermitian or non-unitary matrices"""


class ContainmentError(ProtocolError):
    """Battery wavefunction not contained in its momentum grid"""
