"""Exception hierarchy shared by every broker module."""

from __future__ import annotations


class BrokerError(Exception):
    """Base class for all domain errors raised by saasbroker."""


# -- selection -----------------------------------------------------------------

class EmptyOfferSet(BrokerError, ValueError):
    pass


class AttributeMismatch(BrokerError, ValueError):
    pass


class NonFiniteValue(BrokerError, ValueError):
    pass


class WeightSumError(BrokerError, ValueError):
    pass


class TooFewOffers(BrokerError, ValueError):
    pass


class DegenerateColumn(BrokerError, ValueError):
    pass


# -- negotiation ---------------------------------------------------------------

class DomainError(BrokerError, ValueError):
    """A utility-function argument is outside its mathematical domain."""


class ProtocolViolation(BrokerError):
    """A message is illegal in the receiving party's current state."""

    def __init__(self, state, message, detail: str = ""):
        self.state = state
        self.message = message
        kind = getattr(message, "kind", message)
        text = f"{kind} not allowed in state {state}"
        if detail:
            text += f": {detail}"
        super().__init__(text)


# -- SLA documents -------------------------------------------------------------

class XmlSyntaxError(BrokerError, ValueError):
    pass


class SchemaError(BrokerError, ValueError):
    pass


class RangeError(BrokerError, ValueError):
    pass


class UnknownAttributeDirection(BrokerError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unknown attribute direction"


class NotAgreed(BrokerError):
    pass


# -- monitoring ----------------------------------------------------------------

class MalformedRecord(BrokerError, ValueError):
    pass


class UnmappedIndicator(BrokerError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unmapped indicator"


# -- broker service ------------------------------------------------------------

class NotFound(BrokerError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "not found"


class ConflictingRecord(BrokerError):
    pass


class NoProviders(BrokerError):
    pass


class SelectionFailed(BrokerError):
    pass
