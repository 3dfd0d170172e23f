class ProtocolError(Exception):
    """Base class for every protocol-level rejection."""


class MalformedMessage(ProtocolError):
    pass


class MalformedRequest(MalformedMessage):
    """Login request whose encrypted D_u does not decode to a curve point."""


class FreshnessViolation(ProtocolError):
    pass


class ReplayDetected(FreshnessViolation):
    pass


class UnknownIdentity(ProtocolError):
    pass


class IdentityNotAvailable(ProtocolError):
    def __init__(self, msg: str = "Identity not available"):
        super().__init__(msg)


class AuthenticationFailure(ProtocolError):
    """Gateway-side PID mismatch."""


class GatewayAuthenticationFailure(ProtocolError):
    """User-side SQ_i mismatch: the responder did not prove knowledge of K_gw."""


class LocalAuthenticationFailure(ProtocolError):
    """Card reader rejected the (card, password) pair before any message left."""


class IntegrityError(ProtocolError):
    pass
